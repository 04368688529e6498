#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "memerl/softmax.hpp"
#include "memerl/vocabulary.hpp"

namespace memerl {

using ParamMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Indicator features of a decoding state:
///   [position bucket | previous token (1..window back, or BOS) | watch token present in prompt]
struct FeatureSpec {
    std::size_t position_buckets = 32;
    std::size_t window = 2;
    std::vector<std::string> watch_tokens;

    bool operator==(const FeatureSpec&) const = default;
};

/// Prompt-side part of the state, computed once per prompt.
struct PromptFeatures {
    std::vector<int> active_watch;  // indices into FeatureSpec::watch_tokens
};

struct DecodeConfig {
    double temperature = 1.0;
    double top_p = 0.85;
    std::size_t max_tokens = 128;
    std::uint64_t rng_seed = 42;
};

void validate(const DecodeConfig& config);

/// How per-token log-probabilities are evaluated for importance ratios.
struct RatioOptions {
    bool truncated = false;  // use the temperature-scaled nucleus distribution instead of the raw one
    double temperature = 1.0;
    double top_p = 1.0;
};

/// Sampled completion. `tokens` starts with the policy's assistant prefix, which is not sampled.
struct Trajectory {
    std::vector<TokenId> tokens;
    std::size_t prefix_len = 0;
    std::vector<double> logprobs;  // one per sampled token, under the untruncated distribution
    bool ended_with_eos = false;

    std::size_t sampled_len() const { return tokens.size() - prefix_len; }
};

/// Autoregressive softmax policy: next-token scores are the sum of the weight rows of the
/// active state features. Parameters start at zero (uniform policy).
class ToyPolicy {
public:
    ToyPolicy(Vocabulary vocab, FeatureSpec spec, std::vector<TokenId> assistant_prefix = {});

    const Vocabulary& vocab() const { return vocab_; }
    const FeatureSpec& spec() const { return spec_; }
    const std::vector<TokenId>& assistant_prefix() const { return prefix_; }
    void set_assistant_prefix(std::vector<TokenId> prefix) { prefix_ = std::move(prefix); }

    std::size_t num_features() const;
    std::size_t num_parameters() const { return static_cast<std::size_t>(weights_.size()); }

    ParamMatrix& weights() { return weights_; }
    const ParamMatrix& weights() const { return weights_; }

    /// Flat view of theta (row-major over feature x token).
    Eigen::Map<Eigen::VectorXd> parameters() { return {weights_.data(), weights_.size()}; }
    Eigen::Map<const Eigen::VectorXd> parameters() const { return {weights_.data(), weights_.size()}; }

    PromptFeatures encode_prompt(std::string_view prompt) const;

    /// Active feature rows for the state after `history` (tokens generated so far).
    void active_features(const PromptFeatures& prompt, std::span<const TokenId> history, std::vector<int>& out) const;

    Eigen::VectorXd scores(const PromptFeatures& prompt, std::span<const TokenId> history) const;
    Eigen::VectorXd next_distribution(const PromptFeatures& prompt, std::span<const TokenId> history) const;

    bool operator==(const ToyPolicy& other) const {
        return vocab_ == other.vocab_ && spec_ == other.spec_ && prefix_ == other.prefix_ && weights_ == other.weights_;
    }

private:
    Vocabulary vocab_;
    FeatureSpec spec_;
    std::vector<TokenId> prefix_;
    ParamMatrix weights_;
};

using FrozenPolicy = std::shared_ptr<const ToyPolicy>;

/// Immutable copy; later updates to the live policy do not affect it.
FrozenPolicy snapshot(const ToyPolicy& policy);

Eigen::VectorXd next_distribution(const ToyPolicy& policy, std::string_view prompt, const std::vector<TokenId>& prefix);

Trajectory sample(const ToyPolicy& policy, const PromptFeatures& prompt, const DecodeConfig& config,
                  std::mt19937_64& rng);

/// Log-probability of every token of `tokens` given its prefix. Throws UnknownToken on bad ids.
std::vector<double> logprobs(const ToyPolicy& policy, const PromptFeatures& prompt, std::span<const TokenId> tokens,
                             const RatioOptions& ratio = {});
std::vector<double> logprob(const ToyPolicy& policy, std::string_view prompt, const std::vector<TokenId>& tokens);

/// Adds d/dtheta of sum_t coeff[t] * log pi(tokens[t] | tokens[<t]) into `grad`.
/// Positions with coefficient 0 are skipped.
void accumulate_logprob_grad(const ToyPolicy& policy, const PromptFeatures& prompt, std::span<const TokenId> tokens,
                             std::span<const double> coeffs, ParamMatrix& grad, const RatioOptions& ratio = {});

/// Gradient of the sequence log-likelihood.
ParamMatrix grad_logprob(const ToyPolicy& policy, std::string_view prompt, const std::vector<TokenId>& tokens);

/// Sum over positions t in [from, tokens.size()) of KL(pi(.|h_t) || ref(.|h_t)); when `grad` is
/// non-null, adds coeff times its gradient with respect to the live policy.
double accumulate_kl(const ToyPolicy& policy, const ToyPolicy& reference, const PromptFeatures& prompt,
                     std::span<const TokenId> tokens, std::size_t from, double coeff, ParamMatrix* grad);

// Checkpoints: JSON with vocabulary, feature space, assistant prefix and theta.
std::string checkpoint_to_json(const ToyPolicy& policy);
ToyPolicy checkpoint_from_json(std::string_view json);
void save_checkpoint(const std::string& path, const ToyPolicy& policy);
ToyPolicy load_checkpoint(const std::string& path);

}  // namespace memerl
