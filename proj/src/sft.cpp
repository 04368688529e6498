#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "memerl/errors.hpp"
#include "memerl/trainer.hpp"
#include "memerl/util.hpp"

namespace memerl {

std::string_view to_string(SftVariant v) {
    switch (v) {
        case SftVariant::ClsExp_NoCoT: return "cls_exp_nocot";
        case SftVariant::ClsFGExp_NoCoT: return "cls_fg_exp_nocot";
        case SftVariant::ClsFGExp_CoTD: return "cls_fg_exp_cotd";
    }
    return "?";
}

std::optional<SftVariant> parse_sft_variant(std::string_view text) {
    const std::string t = to_lower(trim(text));
    for (auto v : {SftVariant::ClsExp_NoCoT, SftVariant::ClsFGExp_NoCoT, SftVariant::ClsFGExp_CoTD})
        if (t == to_string(v)) return v;
    return std::nullopt;
}

bool uses_fine_grained(SftVariant v) { return v != SftVariant::ClsExp_NoCoT; }

namespace {

bool uses_cot(SftVariant v) { return v == SftVariant::ClsFGExp_CoTD; }

std::string fine_grained_suffix(const MemeRecord& r) {
    if (r.label != Label::Hateful) return {};
    std::string out = "category";
    for (auto c : r.protected_categories) (out += ' ') += to_string(c);
    out += " attack";
    for (auto a : r.attack_types) (out += ' ') += to_string(a);
    return out;
}

}  // namespace

StructuredOutput sft_target_output(const MemeRecord& record, SftVariant variant) {
    StructuredOutput out;
    out.label = record.label;
    out.explanation = std::string(trim(record.gold_explanation));
    if (uses_fine_grained(variant)) {
        const std::string suffix = fine_grained_suffix(record);
        if (!suffix.empty()) out.explanation += " " + suffix;
    }
    if (uses_cot(variant)) {
        if (!record.cot_trace || trim(*record.cot_trace).empty())
            throw MissingCotTrace("record '" + record.id + "' has no reasoning trace");
        out.think = std::string(trim(*record.cot_trace));
    }
    return out;
}

SftTarget build_sft_target(const MemeRecord& record, SftVariant variant, const Vocabulary& vocab,
                           bool mask_think_tokens) {
    SftTarget target;
    target.tokens = vocab.tokenize(serialize(sft_target_output(record, variant)));
    target.tokens.push_back(vocab.eos());
    target.mask.assign(target.tokens.size(), 1.0);
    if (mask_think_tokens && !uses_cot(variant)) {
        // canonical output starts with the empty pair <think></think>
        target.mask[0] = 0.0;
        target.mask[1] = 0.0;
    }
    return target;
}

std::vector<TokenId> sft_assistant_prefix(SftVariant variant, bool mask_think_tokens, const Vocabulary& vocab) {
    if (mask_think_tokens && !uses_cot(variant)) return {vocab.think_open(), vocab.think_close()};
    return {};
}

std::vector<SftExample> make_sft_examples(const ToyPolicy& policy, const std::vector<MemeRecord>& records,
                                          SftVariant variant, bool mask_think_tokens, const PromptContext& ctx) {
    std::vector<SftExample> out;
    out.reserve(records.size());
    for (const auto& r : records)
        out.push_back({policy.encode_prompt(build_prompt(r, ctx)),
                       build_sft_target(r, variant, policy.vocab(), mask_think_tokens)});
    return out;
}

LossAndGrad sft_loss_and_grad(const ToyPolicy& policy, std::span<const SftExample> batch) {
    LossAndGrad out;
    out.grad = ParamMatrix::Zero(policy.weights().rows(), policy.weights().cols());
    if (batch.empty()) return out;
    const double scale = 1.0 / static_cast<double>(batch.size());
    std::vector<double> coeffs;
    for (const auto& ex : batch) {
        const auto lp = logprobs(policy, ex.prompt, ex.target.tokens);
        coeffs.resize(lp.size());
        for (std::size_t t = 0; t < lp.size(); ++t) {
            out.loss -= scale * ex.target.mask[t] * lp[t];
            coeffs[t] = -scale * ex.target.mask[t];
        }
        accumulate_logprob_grad(policy, ex.prompt, ex.target.tokens, coeffs, out.grad);
    }
    return out;
}

double sft_loss(const ToyPolicy& policy, std::span<const SftExample> batch) {
    if (batch.empty()) return 0.0;
    double loss = 0.0;
    for (const auto& ex : batch) {
        const auto lp = logprobs(policy, ex.prompt, ex.target.tokens);
        for (std::size_t t = 0; t < lp.size(); ++t) loss -= ex.target.mask[t] * lp[t];
    }
    return loss / static_cast<double>(batch.size());
}

SftResult run_sft(const ToyPolicy& initial, const std::vector<MemeRecord>& corpus, const SftConfig& config,
                  const PromptContext& ctx) {
    validate(config.optim);
    if (config.batch_size == 0) throw InvalidConfig("sft.batch_size must be positive");
    const auto train = filter_split(corpus, Split::Train);
    const auto dev = filter_split(corpus, Split::Dev);
    if (train.empty()) throw EmptySplit("no training records");
    if (dev.empty()) throw EmptySplit("no dev records");

    SftResult result{initial, 0, {}};
    if (config.epochs == 0) return result;

    ToyPolicy live = initial;
    live.set_assistant_prefix(sft_assistant_prefix(config.variant, config.mask_think_tokens, live.vocab()));
    const auto train_ex = make_sft_examples(live, train, config.variant, config.mask_think_tokens, ctx);
    const auto dev_ex = make_sft_examples(live, dev, config.variant, config.mask_think_tokens, ctx);

    double best_dev = sft_loss(live, dev_ex);
    result.policy = live;
    result.telemetry.push_back({0, 0, sft_loss(live, train_ex), best_dev});

    const std::size_t per_epoch = (train_ex.size() + config.batch_size - 1) / config.batch_size;
    const std::size_t total = per_epoch * config.epochs;
    AdamW optim(live.num_parameters(), config.optim);
    std::vector<std::size_t> order(train_ex.size());
    std::vector<SftExample> batch;
    std::size_t step = 0;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 rng(derive_seed(config.seed, 0x5f7, epoch));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i))]);

        double train_loss = 0.0;
        for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
            batch.clear();
            for (std::size_t i = b; i < std::min(order.size(), b + config.batch_size); ++i)
                batch.push_back(train_ex[order[i]]);
            auto lg = sft_loss_and_grad(live, batch);
            train_loss += lg.loss * static_cast<double>(batch.size());
            Eigen::Map<Eigen::VectorXd> g(lg.grad.data(), lg.grad.size());
            optim.step(live.parameters(), g, cosine_schedule(step, total, config.warmup_ratio));
            ++step;
        }
        const double dev_loss = sft_loss(live, dev_ex);
        result.telemetry.push_back({epoch, step, train_loss / static_cast<double>(train_ex.size()), dev_loss});
        if (dev_loss < best_dev) {
            best_dev = dev_loss;
            result.policy = live;
            result.best_epoch = epoch;
        }
    }
    return result;
}

std::string sft_telemetry_to_csv(const std::vector<SftEpochRecord>& rows) {
    std::string out = "epoch,steps,train_loss,dev_loss\n";
    for (const auto& r : rows)
        out += strprintf("%zu,%zu,", r.epoch, r.steps) + format_double(r.train_loss) + "," +
               format_double(r.dev_loss) + "\n";
    return out;
}

}  // namespace memerl
