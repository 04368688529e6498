// Randomized checks shared by the unit tests and the acceptance runner.
#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "memerl/structured_io.hpp"
#include "memerl/trainer.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace checks {

using namespace memerl;

inline MemeRecord toy_record(Label label, std::string explanation, std::string text = "zorb a") {
    MemeRecord r;
    r.id = "t";
    r.ocr_text = std::move(text);
    r.label = label;
    r.gold_explanation = std::move(explanation);
    if (label == Label::Hateful) {
        r.protected_categories = {ProtectedCategory::Race};
        r.attack_types = {AttackType::Mocking};
    }
    return r;
}

inline Eigen::Map<Eigen::VectorXd> flat(ParamMatrix& m) { return {m.data(), m.size()}; }

inline ParamMatrix zeros_like(const ToyPolicy& p) { return ParamMatrix::Zero(p.weights().rows(), p.weights().cols()); }

// ---------------------------------------------------------------------------
// Gradient checks: each returns the relative error against central differences.

/// d/dtheta of sum_t c_t log pi(y_t | y_<t) for random tokens and coefficients.
inline double logprob_gradient_case(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto p = testing_support::random_policy(seed);
    const auto prompt = p.encode_prompt(seed % 2 ? "zorb" : "krell zorb");
    const auto tokens = testing_support::random_tokens(rng, p.vocab().size(), 1 + rng() % 10);
    std::vector<double> coeffs(tokens.size());
    for (auto& x : coeffs) x = uniform01(rng) * 2 - 1;
    ParamMatrix g = zeros_like(p);
    accumulate_logprob_grad(p, prompt, tokens, coeffs, g);
    const auto f = [&] {
        const auto lp = logprobs(p, prompt, tokens);
        double s = 0;
        for (std::size_t t = 0; t < lp.size(); ++t) s += coeffs[t] * lp[t];
        return s;
    };
    return oracle::relative_error(flat(g), oracle::finite_difference(f, p.parameters()));
}

/// Masked SFT loss over a small random batch; masking alternates with the seed.
inline double sft_gradient_case(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto p = testing_support::random_policy(seed);
    static const std::vector<std::string> expl = {"a", "a b", "b c d", "zorb krell a"};
    std::vector<MemeRecord> records;
    for (std::uint64_t i = 0; i < 1 + seed % 3; ++i)
        records.push_back(toy_record(rng() % 2 ? Label::Hateful : Label::NonHateful, expl[rng() % expl.size()],
                                     rng() % 2 ? "zorb" : "b"));
    const auto ex = make_sft_examples(p, records, SftVariant::ClsExp_NoCoT, seed % 3 != 0, default_prompt_context());
    auto lg = sft_loss_and_grad(p, ex);
    return oracle::relative_error(flat(lg.grad),
                                  oracle::finite_difference([&] { return sft_loss(p, ex); }, p.parameters()));
}

/// Frozen groups sampled from `old`; advantages are replaced by random values so positive and
/// negative branches of the surrogate both occur.
inline std::vector<GroupBatch> frozen_groups(const ToyPolicy& old, const GrpoConfig& cfg, std::mt19937_64& rng) {
    std::vector<GroupBatch> groups;
    const auto record = toy_record(Label::Hateful, "a b");
    for (int i = 0; i < 2; ++i) {
        auto g = sample_group(old, record, old.encode_prompt(i ? "zorb" : "krell"), cfg, rng());
        for (auto& a : g.advantages) a = uniform01(rng) * 4 - 2;
        groups.push_back(std::move(g));
    }
    return groups;
}

inline bool near_clip_boundary(const ToyPolicy& live, const std::vector<GroupBatch>& groups, double eps) {
    for (const auto& g : groups)
        for (std::size_t k = 0; k < g.trajectories.size(); ++k) {
            const auto& tr = g.trajectories[k];
            const auto lp = logprobs(live, g.prompt, tr.tokens);
            for (std::size_t t = tr.prefix_len; t < tr.tokens.size(); ++t) {
                const double r = std::exp(lp[t] - g.old_logprobs[k][t - tr.prefix_len]);
                if (std::abs(r - (1 + eps)) < 1e-3 || std::abs(r - (1 - eps)) < 1e-3) return true;
            }
        }
    return false;
}

inline GrpoConfig gradient_check_config() {
    GrpoConfig cfg;
    cfg.group_size = 4;
    cfg.decode.max_tokens = 8;
    return cfg;
}

/// Clipped surrogate minus beta KL on frozen samples, at a live policy perturbed away from the
/// sampler. nullopt when some ratio sits within 1e-3 of a clip edge, where the loss has a kink.
inline std::optional<double> grpo_gradient_case(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto cfg = gradient_check_config();
    const auto old = testing_support::random_policy(seed);
    const auto ref = testing_support::random_policy(seed ^ 0x9e3779b97f4a7c15ULL);
    auto live = old;
    std::normal_distribution<double> n(0.0, 0.15);
    for (Eigen::Index i = 0; i < live.parameters().size(); ++i) live.parameters()(i) += n(rng);
    const auto groups = frozen_groups(old, cfg, rng);
    if (near_clip_boundary(live, groups, cfg.clip_epsilon)) return std::nullopt;
    ParamMatrix grad = zeros_like(live);
    grpo_objective(live, ref, groups, cfg, &grad);
    const Eigen::VectorXd fd = oracle::finite_difference(
        [&] { return -grpo_objective(live, ref, groups, cfg, nullptr).objective; }, live.parameters());
    return oracle::relative_error(flat(grad), fd);
}

/// Largest absolute loss-gradient entry for a group pushed entirely into the clipped regime
/// (beta = 0): ratio e^0.5 with positive advantages, or e^-0.5 with negative ones.
struct ClipProbe {
    double clip_frac = 0.0;
    double max_abs_grad = 0.0;
    double flipped_max_abs_grad = 0.0;  // same states with the advantage signs flipped
};

inline ClipProbe clipped_regime_case(std::uint64_t seed) {
    GrpoConfig cfg = gradient_check_config();
    cfg.decode.max_tokens = 24;
    cfg.kl_beta = 0.0;
    const auto p = testing_support::random_policy(seed);
    auto g = sample_group(p, toy_record(Label::Hateful, "a"), p.encode_prompt("zorb"), cfg, seed + 7);
    const bool up = seed % 2 == 1;
    for (std::size_t k = 0; k < g.trajectories.size(); ++k) {
        g.advantages[k] = (up ? 1.0 : -1.0) * (1.0 + static_cast<double>(k));
        for (auto& lp : g.old_logprobs[k]) lp -= up ? 0.5 : -0.5;
    }
    std::vector<GroupBatch> groups = {g};
    ClipProbe out;
    ParamMatrix grad = zeros_like(p);
    out.clip_frac = grpo_objective(p, p, groups, cfg, &grad).clip_frac;
    out.max_abs_grad = grad.cwiseAbs().maxCoeff();
    for (auto& a : groups[0].advantages) a = -a;
    grad.setZero();
    grpo_objective(p, p, groups, cfg, &grad);
    out.flipped_max_abs_grad = grad.cwiseAbs().maxCoeff();
    return out;
}

// ---------------------------------------------------------------------------
// Structured output fixtures

inline std::string random_text(std::mt19937_64& rng, std::size_t min_words, std::size_t max_words) {
    static const std::vector<std::string> pool = {
        "the", "meme", "labels", "mocks", "a", "group;", "explains", "(why)", "it's", "label-free",
        "<thinking", "think>", "50%", "Éclair", "benign.", "attack", "no", "explanation-ish", "x:y", "\"quoted\""};
    const std::size_t n = min_words + rng() % (max_words - min_words + 1);
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += (rng() % 7 == 0) ? "\n" : " ";
        out += pool[rng() % pool.size()];
    }
    return out;
}

inline StructuredOutput random_output(std::mt19937_64& rng) {
    StructuredOutput out;
    out.think = random_text(rng, 0, 12);
    out.label = rng() % 2 ? Label::Hateful : Label::NonHateful;
    out.explanation = random_text(rng, 1, 30);
    return out;
}

struct FormatFixture {
    const char* name;
    const char* text;
    FormatReport expected;
};

inline FormatReport flags(bool think, bool nested, bool label, bool parseable, bool expl) {
    return {think, nested, label, parseable, expl, think && nested && label && parseable && expl};
}

/// Twelve malformed outputs with the flags each one must produce.
inline const std::vector<FormatFixture>& malformed_fixtures() {
    static const std::vector<FormatFixture> fixtures = {
        {"empty", "", flags(false, true, false, false, false)},
        {"no_think", "Label: hateful\nExplanation: mocks", flags(false, true, true, true, true)},
        {"think_not_first", "so <think></think>\nLabel: hateful\nExplanation: mocks", flags(false, true, true, true, true)},
        {"unterminated_think", "<think>abc\nLabel: hateful\nExplanation: mocks", flags(false, false, false, false, false)},
        {"two_think_blocks", "<think>a</think><think>b</think>\nLabel: hateful\nExplanation: mocks",
         flags(true, false, true, true, true)},
        {"close_before_open", "</think><think>\nLabel: hateful\nExplanation: mocks", flags(false, false, false, false, true)},
        {"missing_label", "<think></think>\nExplanation: mocks", flags(true, true, false, false, true)},
        {"unparseable_label", "<think></think>\nLabel: maybe\nExplanation: mocks", flags(true, true, true, false, true)},
        {"missing_explanation", "<think></think>\nLabel: hateful", flags(true, true, true, true, false)},
        {"empty_explanation", "<think></think>\nLabel: hateful\nExplanation:   ", flags(true, true, true, true, false)},
        {"delimiter_in_explanation", "<think></think>\nLabel: hateful\nExplanation: see label: hateful",
         flags(true, true, true, true, false)},
        {"explanation_before_label", "<think></think>\nExplanation: mocks\nLabel: hateful",
         flags(true, true, false, false, false)},
    };
    return fixtures;
}

}  // namespace checks
