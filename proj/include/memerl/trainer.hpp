#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memerl/corpus.hpp"
#include "memerl/optimizer.hpp"
#include "memerl/policy.hpp"
#include "memerl/rewards.hpp"
#include "memerl/structured_io.hpp"
#include "memerl/telemetry.hpp"

namespace memerl {

// ===========================================================================
// Supervised warm-up

enum class SftVariant { ClsExp_NoCoT, ClsFGExp_NoCoT, ClsFGExp_CoTD };

std::string_view to_string(SftVariant v);
std::optional<SftVariant> parse_sft_variant(std::string_view text);
bool uses_fine_grained(SftVariant v);

struct SftConfig {
    std::size_t epochs = 3;
    std::size_t batch_size = 4;
    AdamWConfig optim{.learning_rate = 0.1};
    double warmup_ratio = 0.05;
    bool mask_think_tokens = true;
    SftVariant variant = SftVariant::ClsExp_NoCoT;
    std::uint64_t seed = 42;
};

struct SftTarget {
    std::vector<TokenId> tokens;
    std::vector<double> mask;  // 1 = position contributes to the loss
};

/// Target text for a record: think block (empty or distilled trace), label, explanation, with
/// fine-grained annotations appended to the explanation for the FG variants.
StructuredOutput sft_target_output(const MemeRecord& record, SftVariant variant);

/// Tokenized target ending in end-of-sequence. Empty think tags of the No-CoT variants are
/// masked out of the loss when `mask_think_tokens` is set. Throws MissingCotTrace for CoTD
/// records without a trace.
SftTarget build_sft_target(const MemeRecord& record, SftVariant variant, const Vocabulary& vocab,
                           bool mask_think_tokens = true);

/// Fixed completion prefix a policy decodes from after this kind of warm-up: the empty think
/// tags when they were masked out of training, nothing otherwise.
std::vector<TokenId> sft_assistant_prefix(SftVariant variant, bool mask_think_tokens, const Vocabulary& vocab);

struct SftExample {
    PromptFeatures prompt;
    SftTarget target;
};

std::vector<SftExample> make_sft_examples(const ToyPolicy& policy, const std::vector<MemeRecord>& records,
                                          SftVariant variant, bool mask_think_tokens, const PromptContext& ctx);

struct LossAndGrad {
    double loss = 0.0;
    ParamMatrix grad;
};

/// loss = mean over the batch of -sum_t mask_t * log pi(target_t | prompt, target_<t).
LossAndGrad sft_loss_and_grad(const ToyPolicy& policy, std::span<const SftExample> batch);
double sft_loss(const ToyPolicy& policy, std::span<const SftExample> batch);

struct SftEpochRecord {
    std::size_t epoch = 0;  // 0 = before training
    std::size_t steps = 0;  // optimizer steps so far
    double train_loss = 0.0;
    double dev_loss = 0.0;
};

struct SftResult {
    ToyPolicy policy;  // checkpoint with the lowest dev loss (the initial one included)
    std::size_t best_epoch = 0;
    std::vector<SftEpochRecord> telemetry;
};

SftResult run_sft(const ToyPolicy& initial, const std::vector<MemeRecord>& corpus, const SftConfig& config,
                  const PromptContext& ctx = default_prompt_context());

std::string sft_telemetry_to_csv(const std::vector<SftEpochRecord>& rows);

// ===========================================================================
// Group relative policy optimization

struct GrpoConfig {
    std::size_t group_size = 8;
    double kl_beta = 0.04;
    double clip_epsilon = 0.2;
    double advantage_epsilon = 1e-8;
    std::size_t inner_epochs = 1;
    std::size_t steps = 200;
    std::size_t batch_size = 2;  // prompts per step
    std::size_t eval_every = 20;
    bool truncated_ratios = false;
    DecodeConfig decode{};
    RewardOptions reward{};
    AdamWConfig optim{.learning_rate = 0.01};
    double warmup_ratio = 0.05;
    std::uint64_t seed = 42;
    // Listed with the training setup but without a mechanism in the critic-free objective.
    double value_loss_coef = 0.1;
    double gae_lambda = 0.95;
};

void validate(const GrpoConfig& config);

/// A_k = (R_k - mean) / (population std + eps). Throws GroupTooSmall for fewer than two rewards.
std::vector<double> compute_advantages(std::span<const double> rewards, double eps);

struct GroupBatch {
    std::size_t record_index = 0;
    PromptFeatures prompt;
    std::vector<Trajectory> trajectories;
    std::vector<std::string> texts;
    std::vector<RewardBreakdown> rewards;
    double baseline = 0.0;
    std::vector<double> advantages;
    std::vector<std::vector<double>> old_logprobs;  // per sampled token, under the ratio convention
};

/// Samples K completions from `old_policy` and scores them.
GroupBatch sample_group(const ToyPolicy& old_policy, const MemeRecord& record, const PromptFeatures& prompt,
                        const GrpoConfig& config, std::uint64_t stream_seed);

/// Recomputes rewards-independent pieces of a group (old log-probs) for the configured ratio mode.
void assign_old_logprobs(GroupBatch& group, const ToyPolicy& old_policy, const GrpoConfig& config);

struct GrpoObjective {
    double objective = 0.0;  // mean over groups and completions of sum_t [clipped surrogate - beta KL]
    double surrogate = 0.0;
    double kl = 0.0;         // mean per-completion KL sum
    double clip_frac = 0.0;
    std::size_t tokens = 0;
};

/// Evaluates the objective at the live policy. When `loss_grad` is non-null it receives the
/// gradient of the loss (= -objective).
GrpoObjective grpo_objective(const ToyPolicy& policy, const ToyPolicy& reference, std::span<const GroupBatch> groups,
                             const GrpoConfig& config, ParamMatrix* loss_grad);

struct GrpoStepResult {
    double loss = 0.0;
    ParamMatrix gradient;
    TelemetryRecord telemetry;
    std::vector<GroupBatch> groups;
};

/// Samples groups from `old_policy` for the given records and returns the loss gradient at `policy`.
GrpoStepResult grpo_step(const ToyPolicy& policy, const ToyPolicy& old_policy, const ToyPolicy& reference,
                         std::span<const MemeRecord* const> records, const GrpoConfig& config, std::size_t step,
                         const PromptContext& ctx = default_prompt_context());

/// Number of tokens strictly inside the think block of a full completion.
std::size_t think_length(const std::vector<TokenId>& tokens, const Vocabulary& vocab);

struct DevEval {
    std::size_t step = 0;
    double mean_reward = 0.0;
    double accuracy = 0.0;
};

/// Single-sample decoding of every record with per-record rng streams fixed by `seed`.
DevEval evaluate_dev_reward(const ToyPolicy& policy, const std::vector<MemeRecord>& records, const GrpoConfig& config,
                            const PromptContext& ctx = default_prompt_context());

/// Everything needed to continue a run exactly where it stopped.
struct GrpoState {
    std::size_t next_step = 0;
    ToyPolicy live;
    ToyPolicy best;
    double best_dev_reward = 0.0;
    std::size_t best_step = 0;
    Eigen::VectorXd adam_m;
    Eigen::VectorXd adam_v;
    std::size_t adam_t = 0;
    std::vector<TelemetryRecord> telemetry;
    std::vector<DevEval> dev_evals;
};

std::string grpo_state_to_json(const GrpoState& state);
GrpoState grpo_state_from_json(std::string_view json);

struct GrpoRunOptions {
    std::optional<GrpoState> resume;
    std::size_t stop_after_steps = 0;  // 0 = run to completion; otherwise stop early (simulated interruption)
    std::function<void(const GrpoState&)> on_state;  // called after each dev evaluation
    std::function<void(const TelemetryRecord&)> on_step;
};

struct GrpoResult {
    ToyPolicy policy;  // best dev-reward checkpoint
    ToyPolicy final_policy;
    std::size_t best_step = 0;
    std::vector<TelemetryRecord> telemetry;
    std::vector<DevEval> dev_evals;
    bool completed = true;
    GrpoState state;
};

/// The reference policy is the initial checkpoint.
GrpoResult run_grpo(const ToyPolicy& initial, const std::vector<MemeRecord>& corpus, const GrpoConfig& config,
                    const PromptContext& ctx = default_prompt_context(), const GrpoRunOptions& options = {});

}  // namespace memerl
