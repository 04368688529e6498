#include "memerl/rewards.hpp"

#include <cmath>

#include "memerl/errors.hpp"
#include "memerl/structured_io.hpp"
#include "memerl/util.hpp"

namespace memerl {

void validate(const RewardWeights& w) {
    if (w.alpha_fmt < 0 || w.alpha_lbl < 0 || w.alpha_len < 0 || w.alpha_met < 0)
        throw InvalidConfig("reward weights must be non-negative");
}

void validate(const LengthRewardParams& p) {
    if (!(p.sigma > 0)) throw InvalidConfig("reward.sigma must be positive");
}

namespace {

double format_score(const FormatReport& rep, bool graded) {
    if (!graded) return rep.compliant ? 1.0 : 0.0;
    const int passed = rep.has_think_block + rep.think_well_nested + rep.has_label_field + rep.label_parseable +
                       rep.has_explanation;
    return passed / 5.0;
}

}  // namespace

double reward_format(std::string_view text, bool graded) { return format_score(check_format(text), graded); }

double reward_label(std::optional<Label> pred, Label gold) { return pred && *pred == gold ? 1.0 : 0.0; }

double reward_length_from_count(std::size_t words, const LengthRewardParams& params) {
    const double d = static_cast<double>(words) - params.target_words;
    return std::exp(-(d * d) / (2.0 * params.sigma * params.sigma));
}

double reward_length(std::string_view explanation, const LengthRewardParams& params) {
    return reward_length_from_count(split_whitespace(explanation).size(), params);
}

double reward_meteor(std::string_view explanation, std::string_view gold, const MeteorOptions& opts) {
    if (trim(gold).empty()) throw MissingReference("gold explanation is empty");
    return meteor(explanation, gold, opts);
}

double weighted_total(const RewardBreakdown& b, const RewardWeights& w) {
    return w.alpha_fmt * b.r_fmt + w.alpha_lbl * b.r_lbl + w.alpha_len * b.r_len + w.alpha_met * b.r_met;
}

RewardBreakdown reward_total(std::string_view completion_text, const MemeRecord& gold, const RewardOptions& options) {
    const ExtractedFields fields = extract_fields(completion_text);
    RewardBreakdown b;
    b.r_fmt = format_score(fields.report, options.graded_format);
    b.r_lbl = reward_label(fields.label, gold.label);
    // Length and METEOR need an isolable explanation, even when the format is otherwise off.
    if (fields.explanation && !fields.explanation->empty()) {
        b.r_len = reward_length(*fields.explanation, options.length);
        b.r_met = reward_meteor(*fields.explanation, gold.gold_explanation, options.meteor);
    }
    b.total = weighted_total(b, options.weights);
    return b;
}

double gold_free_score(std::string_view completion_text, const RewardOptions& options) {
    const ExtractedFields fields = extract_fields(completion_text);
    double r_len = 0.0;
    if (fields.explanation && !fields.explanation->empty()) r_len = reward_length(*fields.explanation, options.length);
    return options.weights.alpha_fmt * format_score(fields.report, options.graded_format) +
           options.weights.alpha_len * r_len;
}

}  // namespace memerl
