#include <gtest/gtest.h>

#include <json.hpp>

#include "memerl/config.hpp"
#include "memerl/errors.hpp"
#include "memerl/plot.hpp"
#include "memerl/telemetry.hpp"
#include "memerl/util.hpp"

using namespace memerl;

namespace {

std::vector<TelemetryRecord> synthetic_stream(std::size_t n) {
    std::vector<TelemetryRecord> rows;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i);
        rows.push_back({i, 0.4 + 0.5 * t / static_cast<double>(n), 40.0 - 0.1 * t, 30.0 * std::exp(-t / 20.0),
                        -0.1 * t, 0.001 * t, i % 3 ? 0.0 : 0.125});
    }
    return rows;
}

}  // namespace

TEST(Config, SchemaDocumentIsCurrent) {
    EXPECT_EQ(read_file(std::string(MEMERL_SOURCE_DIR) + "/docs/config_schema.json"), config_schema_json());
}

TEST(Config, SchemaDescribesEveryKey) {
    const auto j = nlohmann::json::parse(config_schema_json());
    EXPECT_EQ(j.at("keys").size(), config_schema().size());
    for (const auto& k : config_schema()) EXPECT_FALSE(k.description.empty()) << k.key;
}

TEST(Config, SetValuesAndRejectUnknownKeys) {
    RunConfig c;
    set_config_value(c, "grpo.group_size", "4");
    set_config_value(c, "decode.top_p", "0.9");
    set_config_value(c, "sft.variant", "cls_fg_exp_nocot");
    set_config_value(c, "reward.graded_format", "true");
    set_config_value(c, "modelsvc.timeout_ms", "1500");
    EXPECT_EQ(c.grpo.group_size, 4u);
    EXPECT_DOUBLE_EQ(c.grpo.decode.top_p, 0.9);
    EXPECT_EQ(c.sft.variant, SftVariant::ClsFGExp_NoCoT);
    EXPECT_TRUE(c.grpo.reward.graded_format);
    EXPECT_EQ(c.modelsvc.timeout.count(), 1500);
    EXPECT_TRUE(c.prompt_context().include_fine_grained);
    EXPECT_THROW(set_config_value(c, "grpo.nope", "1"), InvalidConfig);
    EXPECT_THROW(set_config_value(c, "grpo.group_size", "-3"), InvalidConfig);
    EXPECT_THROW(set_config_value(c, "reward.graded_format", "maybe"), InvalidConfig);
}

TEST(Config, FileFormats) {
    RunConfig a, b, c;
    apply_config_text(a, R"({"grpo": {"kl_beta": 0.1}, "synth.trigger_tokens": ["zorb", "krell"]})");
    apply_config_text(b, "# comment\ngrpo.kl_beta = 0.1\n\nsynth.trigger_tokens = zorb, krell\n");
    EXPECT_DOUBLE_EQ(a.grpo.kl_beta, 0.1);
    EXPECT_EQ(a.synth.trigger_tokens, (std::vector<std::string>{"zorb", "krell"}));
    EXPECT_EQ(config_to_json(a), config_to_json(b));
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_NE(config_hash(a), config_hash(c));
    EXPECT_THROW(apply_config_text(c, R"({"bogus": 1})"), InvalidConfig);
    EXPECT_THROW(apply_config_text(c, "no equals sign"), InvalidConfig);
}

TEST(Config, SeedPropagatesAndDefaultsValidate) {
    RunConfig c;
    c.seed = 7;
    c.apply_seed();
    EXPECT_EQ(c.synth.seed, 7u);
    EXPECT_EQ(c.sft.seed, 7u);
    EXPECT_EQ(c.grpo.seed, 7u);
    EXPECT_EQ(c.grpo.decode.rng_seed, 7u);
    EXPECT_NO_THROW(validate(c));
    EXPECT_EQ(c.feature_spec().watch_tokens, c.synth.trigger_tokens);
    c.eval_best_of = 0;
    EXPECT_THROW(validate(c), InvalidConfig);
    EXPECT_FALSE(version_string().empty());
}

TEST(Telemetry, CsvRoundTripAndHeader) {
    const auto rows = synthetic_stream(12);
    const auto csv = telemetry_to_csv(rows);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,mean_reward,mean_len,mean_think_len,loss,kl,clip_frac");
    EXPECT_EQ(telemetry_from_csv(csv), rows);
    EXPECT_THROW(telemetry_from_csv("step,reward\n1,2\n"), HeaderMismatch);
    EXPECT_THROW(telemetry_from_csv(""), HeaderMismatch);
}

TEST(Telemetry, SmoothingHelpers) {
    const std::vector<double> xs = {1, 2, 3, 4, 5};
    EXPECT_EQ(moving_average(xs, 2), (std::vector<double>{1, 1.5, 2.5, 3.5, 4.5}));
    EXPECT_EQ(block_means(xs, 2), (std::vector<double>{1.5, 3.5, 5}));
    EXPECT_EQ(default_smoothing_window(20), 5u);
    EXPECT_EQ(default_smoothing_window(200), 20u);
}

TEST(CollapseMonitor, ShrinkingThinkLengthRaisesTheFlag) {
    CollapseMonitor m(0.5, 10);
    std::size_t fired_at = 0;
    for (std::size_t i = 0; i < 100; ++i) {
        if (m.observe(30.0 * std::exp(-static_cast<double>(i) / 20.0)) && !fired_at) fired_at = i;
    }
    EXPECT_TRUE(m.collapsed());
    EXPECT_GT(fired_at, 10u);
    EXPECT_NEAR(m.baseline(), 30.0 * (1 - std::exp(-0.5)) / (1 - std::exp(-0.05)) / 10.0, 1e-9);
}

TEST(CollapseMonitor, SteadyLengthStaysQuiet) {
    CollapseMonitor m(0.5, 5);
    for (int i = 0; i < 50; ++i) EXPECT_FALSE(m.observe(10.0 + (i % 2)));
    CollapseMonitor zero(0.5, 3);
    for (int i = 0; i < 10; ++i) EXPECT_FALSE(zero.observe(0.0));
    EXPECT_THROW(CollapseMonitor(1.5, 3), InvalidConfig);
}

TEST(Plot, DeterministicSvgWithBothSeries) {
    const auto rows = synthetic_stream(60);
    const auto a = plot_telemetry(rows);
    const auto b = plot_telemetry(telemetry_from_csv(telemetry_to_csv(rows)));
    EXPECT_EQ(a.svg, b.svg);
    EXPECT_EQ(a.window, 6u);
    EXPECT_TRUE(a.warnings.empty());
    EXPECT_EQ(a.svg.rfind("<svg", 0), 0u);
    EXPECT_NE(a.svg.find("id=\"reward\""), std::string::npos);
    EXPECT_NE(a.svg.find("id=\"length\""), std::string::npos);
    EXPECT_NE(a.svg.find("(MA 6)"), std::string::npos);
}

TEST(Plot, OversizedWindowIsClampedWithAWarning) {
    const auto rows = synthetic_stream(8);
    PlotOptions o;
    o.window = 50;
    const auto r = plot_telemetry(rows, o);
    EXPECT_EQ(r.window, 8u);
    EXPECT_EQ(r.warnings.size(), 1u);
    EXPECT_FALSE(plot_telemetry({}).warnings.empty());
}
