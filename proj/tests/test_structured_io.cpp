#include <gtest/gtest.h>

#include <random>

#include "memerl/rewards.hpp"
#include "memerl/structured_io.hpp"
#include "checks.hpp"

using namespace memerl;

using namespace checks;

TEST(StructuredIo, SerializeParseRoundTrip) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 1000; ++i) {
        const auto out = random_output(rng);
        ASSERT_FALSE(contains_delimiter(out.think + " " + out.explanation));
        const auto parsed = parse(serialize(out));
        ASSERT_TRUE(std::holds_alternative<StructuredOutput>(parsed)) << serialize(out);
        EXPECT_EQ(std::get<StructuredOutput>(parsed), out);
    }
}

TEST(StructuredIo, AcceptsCaseAndSpacingVariants) {
    const auto parsed = parse("  <THINK> a </Think>\n  label :  HATEFUL\nEXPLANATION:\n it mocks  ");
    ASSERT_TRUE(std::holds_alternative<StructuredOutput>(parsed));
    const auto& out = std::get<StructuredOutput>(parsed);
    EXPECT_EQ(out.think, "a");
    EXPECT_EQ(out.label, Label::Hateful);
    EXPECT_EQ(out.explanation, "it mocks");
}

TEST(StructuredIo, MalformedFixturesReportFlags) {
    const auto& fixtures = malformed_fixtures();
    ASSERT_EQ(fixtures.size(), 12u);
    for (const auto& f : fixtures) {
        SCOPED_TRACE(f.name);
        const auto rep = check_format(f.text);
        EXPECT_EQ(rep, f.expected);
        EXPECT_FALSE(rep.compliant);
        EXPECT_EQ(reward_format(f.text), 0.0);
        ASSERT_TRUE(std::holds_alternative<FormatReport>(parse(f.text)));
    }
}

TEST(StructuredIo, ExtractFieldsKeepsPartialCredit) {
    const auto f = extract_fields("Label: not_hateful\nExplanation: benign words");
    EXPECT_FALSE(f.report.compliant);
    EXPECT_EQ(f.label, Label::NonHateful);
    ASSERT_TRUE(f.explanation.has_value());
    EXPECT_EQ(*f.explanation, "benign words");
}

TEST(StructuredIo, DelimiterDetection) {
    EXPECT_TRUE(contains_delimiter("a <Think> b"));
    EXPECT_TRUE(contains_delimiter("x Label : y"));
    EXPECT_TRUE(contains_delimiter("explanation:"));
    EXPECT_FALSE(contains_delimiter("labels explanations label-free"));
}
