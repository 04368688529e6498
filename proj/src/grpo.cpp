#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "memerl/errors.hpp"
#include "memerl/structured_io.hpp"
#include "memerl/trainer.hpp"
#include "memerl/util.hpp"

namespace memerl {

void validate(const GrpoConfig& c) {
    if (c.group_size < 2) throw GroupTooSmall("grpo.group_size must be at least 2");
    if (!(c.kl_beta >= 0)) throw InvalidConfig("grpo.kl_beta must be non-negative");
    if (!(c.clip_epsilon > 0 && c.clip_epsilon < 1)) throw InvalidConfig("grpo.clip_epsilon must lie in (0, 1)");
    if (!(c.advantage_epsilon > 0)) throw InvalidConfig("grpo.advantage_epsilon must be positive");
    if (c.inner_epochs == 0) throw InvalidConfig("grpo.inner_epochs must be positive");
    if (c.batch_size == 0) throw InvalidConfig("grpo.batch_size must be positive");
    if (c.eval_every == 0) throw InvalidConfig("grpo.eval_every must be positive");
    if (!(c.warmup_ratio >= 0 && c.warmup_ratio < 1)) throw InvalidConfig("grpo.warmup_ratio must lie in [0, 1)");
    validate(c.decode);
    validate(c.reward.weights);
    validate(c.reward.length);
    validate(c.optim);
}

std::vector<double> compute_advantages(std::span<const double> rewards, double eps) {
    if (rewards.size() < 2) throw GroupTooSmall("advantages need at least two completions per group");
    // a uniform group carries no signal; avoid rounding residue in the mean
    if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards.front(); }))
        return std::vector<double>(rewards.size(), 0.0);
    const double n = static_cast<double>(rewards.size());
    const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double sd = std::sqrt(var / n);
    std::vector<double> out;
    out.reserve(rewards.size());
    for (double r : rewards) out.push_back((r - mean) / (sd + eps));
    return out;
}

namespace {

RatioOptions ratio_options(const GrpoConfig& c) {
    RatioOptions r;
    r.truncated = c.truncated_ratios;
    r.temperature = c.decode.temperature;
    r.top_p = c.decode.top_p;
    return r;
}

}  // namespace

void assign_old_logprobs(GroupBatch& group, const ToyPolicy& old_policy, const GrpoConfig& config) {
    group.old_logprobs.clear();
    for (const auto& traj : group.trajectories) {
        if (!config.truncated_ratios) {
            group.old_logprobs.push_back(traj.logprobs);
            continue;
        }
        const auto lp = logprobs(old_policy, group.prompt, traj.tokens, ratio_options(config));
        group.old_logprobs.emplace_back(lp.begin() + static_cast<std::ptrdiff_t>(traj.prefix_len), lp.end());
    }
}

GroupBatch sample_group(const ToyPolicy& old_policy, const MemeRecord& record, const PromptFeatures& prompt,
                        const GrpoConfig& config, std::uint64_t stream_seed) {
    GroupBatch g;
    g.prompt = prompt;
    std::vector<double> totals;
    for (std::size_t k = 0; k < config.group_size; ++k) {
        std::mt19937_64 rng(derive_seed(stream_seed, k));
        g.trajectories.push_back(sample(old_policy, prompt, config.decode, rng));
        g.texts.push_back(old_policy.vocab().render(g.trajectories.back().tokens));
        g.rewards.push_back(reward_total(g.texts.back(), record, config.reward));
        totals.push_back(g.rewards.back().total);
    }
    g.baseline = std::accumulate(totals.begin(), totals.end(), 0.0) / static_cast<double>(totals.size());
    g.advantages = compute_advantages(totals, config.advantage_epsilon);
    assign_old_logprobs(g, old_policy, config);
    return g;
}

GrpoObjective grpo_objective(const ToyPolicy& policy, const ToyPolicy& reference, std::span<const GroupBatch> groups,
                             const GrpoConfig& config, ParamMatrix* loss_grad) {
    GrpoObjective out;
    std::size_t completions = 0;
    for (const auto& g : groups) completions += g.trajectories.size();
    if (completions == 0) return out;
    const double scale = 1.0 / static_cast<double>(completions);
    const RatioOptions ratio = ratio_options(config);
    const double lo = 1.0 - config.clip_epsilon, hi = 1.0 + config.clip_epsilon;

    std::size_t clipped = 0;
    std::vector<double> coeffs;
    for (const auto& g : groups) {
        for (std::size_t k = 0; k < g.trajectories.size(); ++k) {
            const auto& traj = g.trajectories[k];
            const double adv = g.advantages[k];
            const auto lp = logprobs(policy, g.prompt, traj.tokens, ratio);
            coeffs.assign(traj.tokens.size(), 0.0);
            double surr = 0.0;
            for (std::size_t t = traj.prefix_len; t < traj.tokens.size(); ++t) {
                const double r = std::exp(lp[t] - g.old_logprobs[k][t - traj.prefix_len]);
                const double unclipped = r * adv;
                const double clipped_term = std::clamp(r, lo, hi) * adv;
                surr += std::min(unclipped, clipped_term);
                const bool is_clipped = (adv > 0 && r > hi) || (adv < 0 && r < lo);
                if (is_clipped)
                    ++clipped;
                else
                    coeffs[t] = -scale * adv * r;
                ++out.tokens;
            }
            if (loss_grad) accumulate_logprob_grad(policy, g.prompt, traj.tokens, coeffs, *loss_grad, ratio);
            const double kl = accumulate_kl(policy, reference, g.prompt, traj.tokens, traj.prefix_len,
                                            scale * config.kl_beta, loss_grad);
            out.surrogate += scale * surr;
            out.kl += scale * kl;
        }
    }
    out.objective = out.surrogate - config.kl_beta * out.kl;
    out.clip_frac = out.tokens ? static_cast<double>(clipped) / static_cast<double>(out.tokens) : 0.0;
    return out;
}

std::size_t think_length(const std::vector<TokenId>& tokens, const Vocabulary& vocab) {
    auto it = std::find(tokens.begin(), tokens.end(), vocab.think_open());
    if (it == tokens.end()) return 0;
    std::size_t n = 0;
    for (++it; it != tokens.end(); ++it) {
        if (*it == vocab.think_close() || *it == vocab.eos()) break;
        ++n;
    }
    return n;
}

GrpoStepResult grpo_step(const ToyPolicy& policy, const ToyPolicy& old_policy, const ToyPolicy& reference,
                         std::span<const MemeRecord* const> records, const GrpoConfig& config, std::size_t step,
                         const PromptContext& ctx) {
    GrpoStepResult res;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const PromptFeatures pf = old_policy.encode_prompt(build_prompt(*records[i], ctx));
        res.groups.push_back(sample_group(old_policy, *records[i], pf, config, derive_seed(config.seed, step, i)));
        res.groups.back().record_index = i;
    }
    res.gradient = ParamMatrix::Zero(policy.weights().rows(), policy.weights().cols());
    const GrpoObjective obj = grpo_objective(policy, reference, res.groups, config, &res.gradient);
    res.loss = -obj.objective;

    auto& tel = res.telemetry;
    tel.step = step;
    std::size_t n = 0;
    for (const auto& g : res.groups) {
        for (std::size_t k = 0; k < g.trajectories.size(); ++k) {
            const auto& traj = g.trajectories[k];
            tel.mean_reward += g.rewards[k].total;
            tel.mean_len += static_cast<double>(traj.sampled_len() - (traj.ended_with_eos ? 1 : 0));
            tel.mean_think_len += static_cast<double>(think_length(traj.tokens, policy.vocab()));
            ++n;
        }
    }
    if (n > 0) {
        tel.mean_reward /= static_cast<double>(n);
        tel.mean_len /= static_cast<double>(n);
        tel.mean_think_len /= static_cast<double>(n);
    }
    tel.loss = res.loss;
    tel.kl = obj.kl;
    tel.clip_frac = obj.clip_frac;
    return res;
}

DevEval evaluate_dev_reward(const ToyPolicy& policy, const std::vector<MemeRecord>& records, const GrpoConfig& config,
                            const PromptContext& ctx) {
    DevEval ev;
    if (records.empty()) return ev;
    for (std::size_t i = 0; i < records.size(); ++i) {
        std::mt19937_64 rng(derive_seed(config.seed, 0xde5, i));
        const auto traj = sample(policy, policy.encode_prompt(build_prompt(records[i], ctx)), config.decode, rng);
        const std::string text = policy.vocab().render(traj.tokens);
        ev.mean_reward += reward_total(text, records[i], config.reward).total;
        const auto fields = extract_fields(text);
        if (fields.label && *fields.label == records[i].label) ev.accuracy += 1.0;
    }
    ev.mean_reward /= static_cast<double>(records.size());
    ev.accuracy /= static_cast<double>(records.size());
    return ev;
}

// ---------------------------------------------------------------------------
// Resumable state

namespace {

using nlohmann::json;

json vec_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from_json(const json& j) {
    const auto xs = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

}  // namespace

std::string grpo_state_to_json(const GrpoState& s) {
    nlohmann::ordered_json j;
    j["format"] = "memerl-grpo-state";
    j["next_step"] = s.next_step;
    j["best_dev_reward"] = s.best_dev_reward;
    j["best_step"] = s.best_step;
    j["adam_t"] = s.adam_t;
    j["adam_m"] = vec_to_json(s.adam_m);
    j["adam_v"] = vec_to_json(s.adam_v);
    auto& tel = j["telemetry"] = json::array();
    for (const auto& r : s.telemetry)
        tel.push_back({r.step, r.mean_reward, r.mean_len, r.mean_think_len, r.loss, r.kl, r.clip_frac});
    auto& dev = j["dev_evals"] = json::array();
    for (const auto& d : s.dev_evals) dev.push_back({d.step, d.mean_reward, d.accuracy});
    j["live"] = json::parse(checkpoint_to_json(s.live));
    j["best"] = json::parse(checkpoint_to_json(s.best));
    return j.dump();
}

GrpoState grpo_state_from_json(std::string_view text) {
    try {
        const auto j = json::parse(text);
        if (j.at("format") != "memerl-grpo-state") throw CheckpointError("not a training state file");
        GrpoState s{0, checkpoint_from_json(j.at("live").dump()), checkpoint_from_json(j.at("best").dump()), 0.0, 0, {}, {}, 0, {}, {}};
        s.next_step = j.at("next_step").get<std::size_t>();
        s.best_dev_reward = j.at("best_dev_reward").get<double>();
        s.best_step = j.at("best_step").get<std::size_t>();
        s.adam_t = j.at("adam_t").get<std::size_t>();
        s.adam_m = vec_from_json(j.at("adam_m"));
        s.adam_v = vec_from_json(j.at("adam_v"));
        for (const auto& r : j.at("telemetry")) {
            TelemetryRecord t;
            t.step = r.at(0).get<std::size_t>();
            t.mean_reward = r.at(1).get<double>();
            t.mean_len = r.at(2).get<double>();
            t.mean_think_len = r.at(3).get<double>();
            t.loss = r.at(4).get<double>();
            t.kl = r.at(5).get<double>();
            t.clip_frac = r.at(6).get<double>();
            s.telemetry.push_back(t);
        }
        for (const auto& d : j.at("dev_evals"))
            s.dev_evals.push_back({d.at(0).get<std::size_t>(), d.at(1).get<double>(), d.at(2).get<double>()});
        const auto n = static_cast<Eigen::Index>(s.live.num_parameters());
        if (s.adam_m.size() != n || s.adam_v.size() != n) throw CheckpointError("optimizer state has the wrong size");
        return s;
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("malformed training state: ") + e.what());
    }
}

// ---------------------------------------------------------------------------

namespace {

// Prompt order: every pass over the training split uses a fresh seeded permutation.
class PromptSchedule {
public:
    PromptSchedule(std::size_t n, std::uint64_t seed) : n_(n), seed_(seed) {}

    std::size_t at(std::size_t position) {
        const std::size_t pass = position / n_;
        if (pass != pass_ || perm_.empty()) {
            pass_ = pass;
            perm_.resize(n_);
            std::iota(perm_.begin(), perm_.end(), 0);
            std::mt19937_64 rng(derive_seed(seed_, 0x0de, pass));
            for (std::size_t i = n_; i > 1; --i)
                std::swap(perm_[i - 1], perm_[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i))]);
        }
        return perm_[position % n_];
    }

private:
    std::size_t n_;
    std::uint64_t seed_;
    std::size_t pass_ = 0;
    std::vector<std::size_t> perm_;
};

}  // namespace

GrpoResult run_grpo(const ToyPolicy& initial, const std::vector<MemeRecord>& corpus, const GrpoConfig& config,
                    const PromptContext& ctx, const GrpoRunOptions& options) {
    validate(config);
    const auto train = filter_split(corpus, Split::Train);
    const auto dev = filter_split(corpus, Split::Dev);
    if (train.empty()) throw EmptySplit("no training records");
    if (dev.empty()) throw EmptySplit("no dev records");

    const ToyPolicy& reference = initial;
    GrpoState state{0, initial, initial, 0.0, 0, {}, {}, 0, {}, {}};
    if (options.resume) {
        state = *options.resume;
        if (!(state.live.vocab() == initial.vocab()) || !(state.live.spec() == initial.spec()))
            throw CheckpointError("resume state does not match the initial policy");
    } else {
        const DevEval ev = evaluate_dev_reward(initial, dev, config, ctx);
        state.best_dev_reward = ev.mean_reward;
        state.dev_evals.push_back(ev);
        const auto n = static_cast<Eigen::Index>(initial.num_parameters());
        state.adam_m = Eigen::VectorXd::Zero(n);
        state.adam_v = Eigen::VectorXd::Zero(n);
    }

    AdamW optim(state.live.num_parameters(), config.optim);
    optim.restore(state.adam_m, state.adam_v, state.adam_t);
    PromptSchedule schedule(train.size(), config.seed);
    bool completed = true;
    std::size_t done = 0;
    std::vector<const MemeRecord*> batch;

    for (std::size_t step = state.next_step; step < config.steps; ++step) {
        if (options.stop_after_steps > 0 && done >= options.stop_after_steps) {
            completed = false;
            break;
        }
        batch.clear();
        for (std::size_t i = 0; i < config.batch_size; ++i)
            batch.push_back(&train[schedule.at(step * config.batch_size + i)]);

        const ToyPolicy old = state.live;
        auto res = grpo_step(state.live, old, reference, batch, config, step, ctx);
        const double lr_scale = cosine_schedule(step, config.steps, config.warmup_ratio);
        for (std::size_t e = 0; e < config.inner_epochs; ++e) {
            if (e > 0) {
                res.gradient.setZero();
                grpo_objective(state.live, reference, res.groups, config, &res.gradient);
            }
            Eigen::Map<Eigen::VectorXd> g(res.gradient.data(), res.gradient.size());
            optim.step(state.live.parameters(), g, lr_scale);
        }

        state.telemetry.push_back(res.telemetry);
        state.next_step = step + 1;
        state.adam_m = optim.first_moment();
        state.adam_v = optim.second_moment();
        state.adam_t = optim.steps_taken();
        ++done;
        if (options.on_step) options.on_step(res.telemetry);

        if (state.next_step % config.eval_every == 0 || state.next_step == config.steps) {
            DevEval ev = evaluate_dev_reward(state.live, dev, config, ctx);
            ev.step = state.next_step;
            state.dev_evals.push_back(ev);
            if (ev.mean_reward > state.best_dev_reward) {
                state.best_dev_reward = ev.mean_reward;
                state.best = state.live;
                state.best_step = state.next_step;
            }
            if (options.on_state) options.on_state(state);
        }
    }

    return GrpoResult{state.best,      state.live, state.best_step, state.telemetry,
                      state.dev_evals, completed,  std::move(state)};
}

}  // namespace memerl
