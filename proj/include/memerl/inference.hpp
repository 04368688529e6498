#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "memerl/corpus.hpp"
#include "memerl/metrics.hpp"
#include "memerl/policy.hpp"
#include "memerl/rewards.hpp"
#include "memerl/structured_io.hpp"

namespace memerl {

struct BestOfNSelection {
    std::optional<Label> label;  // majority over parseable labels; nullopt when none parsed
    std::size_t index = 0;       // chosen candidate (the first one when nothing parsed)
};

/// Majority vote over parseable labels (ties go to the label seen first), then the highest
/// gold-free score among candidates carrying that label (earliest on ties).
BestOfNSelection select_best_of_n(const std::vector<std::string>& candidates, const RewardOptions& options = {});

struct InferenceResult {
    /// The selected output, or the FormatReport of the first candidate when no label parsed.
    std::variant<StructuredOutput, FormatReport> output;
    std::vector<std::string> candidates;
    std::size_t selected = 0;
};

/// Samples n candidates and selects one. n = 1 is single-sample decoding with the same rng use.
InferenceResult infer_best_of_n(const ToyPolicy& policy, const PromptFeatures& prompt, std::size_t n,
                                const DecodeConfig& decode, std::mt19937_64& rng, const RewardOptions& options = {});
InferenceResult infer_best_of_n(const ToyPolicy& policy, std::string_view prompt, std::size_t n,
                                const DecodeConfig& decode, std::mt19937_64& rng, const RewardOptions& options = {});

/// Predicted label of an inference result, nullopt when unparseable.
std::optional<Label> predicted_label(const InferenceResult& result);

struct EvalOptions {
    std::size_t best_of = 1;
    DecodeConfig decode{};
    RewardOptions reward{};
    PromptContext prompt = default_prompt_context();
};

struct EvalPrediction {
    std::string id;
    Label gold = Label::NonHateful;
    std::optional<Label> pred;
    bool compliant = false;
    double meteor = 0.0;
    std::string output;
};

struct EvalReport {
    std::string split;
    std::size_t records = 0;
    std::size_t best_of = 1;
    ClassificationReport classification;
    double mean_meteor = 0.0;
    std::size_t parse_failures = 0;   // no parseable label
    std::size_t non_compliant = 0;    // any format check failed
    std::vector<EvalPrediction> predictions;
};

/// Decodes every record (record i uses rng stream derive_seed(decode.rng_seed, i)).
EvalReport evaluate(const ToyPolicy& policy, const std::vector<MemeRecord>& records, const EvalOptions& options);

std::string eval_report_to_json(const EvalReport& report);
inline constexpr std::string_view kEvalCsvHeader =
    "split,records,best_of,accuracy,weighted_f1,macro_f1,mean_meteor,parse_failures,non_compliant";
std::string eval_report_csv_row(const EvalReport& report);

}  // namespace memerl
