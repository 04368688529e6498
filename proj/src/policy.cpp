#include "memerl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "memerl/errors.hpp"
#include "memerl/util.hpp"

namespace memerl {

void validate(const DecodeConfig& config) {
    if (!(config.temperature > 0)) throw InvalidConfig("decode.temperature must be positive");
    if (!(config.top_p > 0 && config.top_p <= 1)) throw InvalidConfig("decode.top_p must lie in (0, 1]");
    if (config.max_tokens == 0) throw InvalidConfig("decode.max_tokens must be positive");
}

ToyPolicy::ToyPolicy(Vocabulary vocab, FeatureSpec spec, std::vector<TokenId> assistant_prefix)
    : vocab_(std::move(vocab)), spec_(std::move(spec)), prefix_(std::move(assistant_prefix)) {
    if (spec_.position_buckets == 0) throw InvalidConfig("policy.position_buckets must be positive");
    for (TokenId t : prefix_)
        if (t < 0 || static_cast<std::size_t>(t) >= vocab_.size()) throw UnknownToken("assistant prefix token out of range");
    weights_ = ParamMatrix::Zero(static_cast<Eigen::Index>(num_features()), static_cast<Eigen::Index>(vocab_.size()));
}

std::size_t ToyPolicy::num_features() const {
    return spec_.position_buckets + spec_.window * (vocab_.size() + 1) + spec_.watch_tokens.size();
}

PromptFeatures ToyPolicy::encode_prompt(std::string_view prompt) const {
    PromptFeatures pf;
    const auto words = split_whitespace(prompt);
    for (std::size_t i = 0; i < spec_.watch_tokens.size(); ++i)
        if (std::find(words.begin(), words.end(), spec_.watch_tokens[i]) != words.end())
            pf.active_watch.push_back(static_cast<int>(i));
    return pf;
}

void ToyPolicy::active_features(const PromptFeatures& prompt, std::span<const TokenId> history,
                                std::vector<int>& out) const {
    out.clear();
    const std::size_t pos = history.size();
    out.push_back(static_cast<int>(std::min(pos, spec_.position_buckets - 1)));
    const std::size_t v1 = vocab_.size() + 1;
    for (std::size_t k = 1; k <= spec_.window; ++k) {
        const std::size_t slot = pos >= k ? static_cast<std::size_t>(history[pos - k]) : vocab_.size();
        out.push_back(static_cast<int>(spec_.position_buckets + (k - 1) * v1 + slot));
    }
    const std::size_t watch_base = spec_.position_buckets + spec_.window * v1;
    for (int w : prompt.active_watch) out.push_back(static_cast<int>(watch_base + static_cast<std::size_t>(w)));
}

Eigen::VectorXd ToyPolicy::scores(const PromptFeatures& prompt, std::span<const TokenId> history) const {
    thread_local std::vector<int> active;
    active_features(prompt, history, active);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vocab_.size()));
    for (int f : active) s += weights_.row(f).transpose();
    return s;
}

Eigen::VectorXd ToyPolicy::next_distribution(const PromptFeatures& prompt, std::span<const TokenId> history) const {
    return softmax(scores(prompt, history));
}

FrozenPolicy snapshot(const ToyPolicy& policy) { return std::make_shared<const ToyPolicy>(policy); }

Eigen::VectorXd next_distribution(const ToyPolicy& policy, std::string_view prompt, const std::vector<TokenId>& prefix) {
    return policy.next_distribution(policy.encode_prompt(prompt), prefix);
}

// ---------------------------------------------------------------------------

Trajectory sample(const ToyPolicy& policy, const PromptFeatures& prompt, const DecodeConfig& config,
                  std::mt19937_64& rng) {
    validate(config);
    Trajectory traj;
    traj.tokens = policy.assistant_prefix();
    traj.prefix_len = traj.tokens.size();
    const TokenId eos = policy.vocab().eos();

    while (traj.sampled_len() < config.max_tokens) {
        const Eigen::VectorXd s = policy.scores(prompt, traj.tokens);
        const Eigen::VectorXd logp = log_softmax(s);
        const Eigen::VectorXd scaled = softmax((s / config.temperature).eval());
        const std::vector<bool> keep = nucleus_mask(scaled, config.top_p);

        double mass = 0.0;
        for (Eigen::Index i = 0; i < scaled.size(); ++i)
            if (keep[static_cast<std::size_t>(i)]) mass += scaled(i);
        const double u = uniform01(rng) * mass;
        TokenId pick = -1;
        double acc = 0.0;
        for (Eigen::Index i = 0; i < scaled.size(); ++i) {
            if (!keep[static_cast<std::size_t>(i)]) continue;
            pick = static_cast<TokenId>(i);
            acc += scaled(i);
            if (u < acc) break;
        }
        traj.tokens.push_back(pick);
        traj.logprobs.push_back(logp(pick));
        if (pick == eos) {
            traj.ended_with_eos = true;
            break;
        }
    }
    return traj;
}

namespace {

void check_tokens(const ToyPolicy& policy, std::span<const TokenId> tokens) {
    const auto v = static_cast<TokenId>(policy.vocab().size());
    for (TokenId t : tokens)
        if (t < 0 || t >= v) throw UnknownToken(strprintf("token id %d outside vocabulary of size %d", t, v));
}

// Log-probability of `token` and, when `dscores` is non-null, d logp / d scores.
double token_logprob(const Eigen::VectorXd& s, TokenId token, const RatioOptions& ratio, Eigen::VectorXd* dscores) {
    if (!ratio.truncated) {
        const Eigen::VectorXd logp = log_softmax(s);
        if (dscores) {
            *dscores = -logp.array().exp().matrix();
            (*dscores)(token) += 1.0;
        }
        return logp(token);
    }
    const Eigen::VectorXd scaled = softmax((s / ratio.temperature).eval());
    const std::vector<bool> keep = nucleus_mask(scaled, ratio.top_p);
    if (!keep[static_cast<std::size_t>(token)]) {
        if (dscores) dscores->setZero(s.size());
        return -std::numeric_limits<double>::infinity();
    }
    double mass = 0.0;
    for (Eigen::Index i = 0; i < scaled.size(); ++i)
        if (keep[static_cast<std::size_t>(i)]) mass += scaled(i);
    if (dscores) {
        dscores->setZero(s.size());
        for (Eigen::Index i = 0; i < scaled.size(); ++i)
            if (keep[static_cast<std::size_t>(i)]) (*dscores)(i) = -scaled(i) / mass / ratio.temperature;
        (*dscores)(token) += 1.0 / ratio.temperature;
    }
    return std::log(scaled(token) / mass);
}

}  // namespace

std::vector<double> logprobs(const ToyPolicy& policy, const PromptFeatures& prompt, std::span<const TokenId> tokens,
                             const RatioOptions& ratio) {
    check_tokens(policy, tokens);
    std::vector<double> out(tokens.size());
    for (std::size_t t = 0; t < tokens.size(); ++t)
        out[t] = token_logprob(policy.scores(prompt, tokens.first(t)), tokens[t], ratio, nullptr);
    return out;
}

std::vector<double> logprob(const ToyPolicy& policy, std::string_view prompt, const std::vector<TokenId>& tokens) {
    return logprobs(policy, policy.encode_prompt(prompt), tokens);
}

void accumulate_logprob_grad(const ToyPolicy& policy, const PromptFeatures& prompt, std::span<const TokenId> tokens,
                             std::span<const double> coeffs, ParamMatrix& grad, const RatioOptions& ratio) {
    check_tokens(policy, tokens);
    if (coeffs.size() != tokens.size()) throw LengthMismatch("one coefficient per token required");
    std::vector<int> active;
    Eigen::VectorXd d;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (coeffs[t] == 0.0) continue;
        const auto history = tokens.first(t);
        token_logprob(policy.scores(prompt, history), tokens[t], ratio, &d);
        policy.active_features(prompt, history, active);
        for (int f : active) grad.row(f) += coeffs[t] * d.transpose();
    }
}

ParamMatrix grad_logprob(const ToyPolicy& policy, std::string_view prompt, const std::vector<TokenId>& tokens) {
    ParamMatrix grad = ParamMatrix::Zero(policy.weights().rows(), policy.weights().cols());
    const std::vector<double> ones(tokens.size(), 1.0);
    accumulate_logprob_grad(policy, policy.encode_prompt(prompt), tokens, ones, grad);
    return grad;
}

double accumulate_kl(const ToyPolicy& policy, const ToyPolicy& reference, const PromptFeatures& prompt,
                     std::span<const TokenId> tokens, std::size_t from, double coeff, ParamMatrix* grad) {
    if (!(policy.vocab() == reference.vocab()) || !(policy.spec() == reference.spec()))
        throw SupportMismatch("policy and reference disagree on vocabulary or features");
    check_tokens(policy, tokens);
    std::vector<int> active;
    double total = 0.0;
    for (std::size_t t = from; t < tokens.size(); ++t) {
        const auto history = tokens.first(t);
        const Eigen::VectorXd logp = log_softmax(policy.scores(prompt, history));
        const Eigen::VectorXd logq = log_softmax(reference.scores(prompt, history));
        const Eigen::VectorXd p = logp.array().exp().matrix();
        const double kl = (p.array() * (logp - logq).array()).sum();
        total += std::max(kl, 0.0);
        if (grad) {
            // d KL / d score_j = p_j (log p_j - log q_j - KL)
            const Eigen::VectorXd d = (p.array() * ((logp - logq).array() - kl)).matrix();
            policy.active_features(prompt, history, active);
            for (int f : active) grad->row(f) += coeff * d.transpose();
        }
    }
    return total;
}

// ---------------------------------------------------------------------------

std::string checkpoint_to_json(const ToyPolicy& policy) {
    nlohmann::ordered_json j;
    j["format"] = "memerl-policy";
    j["version"] = 1;
    j["vocabulary"] = policy.vocab().tokens();
    j["features"] = {{"position_buckets", policy.spec().position_buckets},
                     {"window", policy.spec().window},
                     {"watch_tokens", policy.spec().watch_tokens}};
    std::vector<std::string> prefix;
    for (TokenId t : policy.assistant_prefix()) prefix.push_back(policy.vocab().token(t));
    j["assistant_prefix"] = prefix;
    j["shape"] = {policy.weights().rows(), policy.weights().cols()};
    const auto theta = policy.parameters();
    j["theta"] = std::vector<double>(theta.data(), theta.data() + theta.size());
    return j.dump();
}

ToyPolicy checkpoint_from_json(std::string_view text) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("format") != "memerl-policy") throw CheckpointError("not a memerl policy checkpoint");
        if (j.at("version") != 1) throw CheckpointError("unsupported checkpoint version");
        auto words = j.at("vocabulary").get<std::vector<std::string>>();
        Vocabulary vocab(words);
        if (vocab.tokens() != words) throw CheckpointError("checkpoint vocabulary is not in canonical order");
        FeatureSpec spec;
        spec.position_buckets = j.at("features").at("position_buckets").get<std::size_t>();
        spec.window = j.at("features").at("window").get<std::size_t>();
        spec.watch_tokens = j.at("features").at("watch_tokens").get<std::vector<std::string>>();
        std::vector<TokenId> prefix;
        for (const auto& t : j.at("assistant_prefix").get<std::vector<std::string>>()) prefix.push_back(vocab.id(t));
        ToyPolicy policy(std::move(vocab), std::move(spec), std::move(prefix));
        const auto theta = j.at("theta").get<std::vector<double>>();
        if (theta.size() != policy.num_parameters()) throw CheckpointError("theta has the wrong size");
        policy.parameters() = Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
        return policy;
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const std::string& path, const ToyPolicy& policy) { write_file(path, checkpoint_to_json(policy)); }

ToyPolicy load_checkpoint(const std::string& path) {
    try {
        return checkpoint_from_json(read_file(path));
    } catch (const std::runtime_error& e) {
        if (dynamic_cast<const Error*>(&e)) throw;
        throw CheckpointError(e.what());
    }
}

}  // namespace memerl
