#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "memerl/corpus.hpp"
#include "memerl/label.hpp"
#include "memerl/metrics.hpp"

namespace memerl {

struct RewardWeights {
    double alpha_fmt = 0.5;
    double alpha_lbl = 0.4;
    double alpha_len = 0.05;
    double alpha_met = 0.05;
};

struct LengthRewardParams {
    double target_words = 100.0;
    double sigma = 20.0;
};

struct RewardBreakdown {
    double r_fmt = 0.0;
    double r_lbl = 0.0;
    double r_len = 0.0;
    double r_met = 0.0;
    double total = 0.0;
};

struct RewardOptions {
    RewardWeights weights;
    LengthRewardParams length;
    MeteorOptions meteor;
    /// Partial format credit: fraction of the five format checks that pass.
    bool graded_format = false;
};

void validate(const RewardWeights& weights);
void validate(const LengthRewardParams& params);

double reward_format(std::string_view text, bool graded = false);

/// 1 iff the prediction parsed and equals the gold label.
double reward_label(std::optional<Label> pred, Label gold);

/// exp(-(L - target)^2 / (2 sigma^2)), L = whitespace-separated word count of the explanation.
double reward_length(std::string_view explanation, const LengthRewardParams& params = {});
double reward_length_from_count(std::size_t words, const LengthRewardParams& params = {});

/// METEOR of the explanation against the gold rationale. Throws MissingReference on empty gold.
double reward_meteor(std::string_view explanation, std::string_view gold, const MeteorOptions& opts = {});

double weighted_total(const RewardBreakdown& b, const RewardWeights& w);

RewardBreakdown reward_total(std::string_view completion_text, const MemeRecord& gold, const RewardOptions& options = {});

/// Gold-free quality used to rank best-of-N candidates: alpha_fmt * R_fmt + alpha_len * R_len.
double gold_free_score(std::string_view completion_text, const RewardOptions& options = {});

}  // namespace memerl
