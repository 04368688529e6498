#include "memerl/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <functional>

#include <json.hpp>

#include "memerl/errors.hpp"
#include "memerl/util.hpp"

#ifndef MEMERL_VERSION
#define MEMERL_VERSION "0.1.0+unknown"
#endif

namespace memerl {

using nlohmann::json;

void RunConfig::apply_seed() {
    synth.seed = seed;
    sft.seed = seed;
    grpo.seed = seed;
    grpo.decode.rng_seed = seed;
}

FeatureSpec RunConfig::feature_spec() const {
    FeatureSpec spec = policy;
    if (spec.watch_tokens.empty()) spec.watch_tokens = synth.trigger_tokens;
    return spec;
}

PromptContext RunConfig::prompt_context() const {
    PromptContext ctx = default_prompt_context(uses_fine_grained(sft.variant));
    ctx.template_id = prompt_template;
    if (!guidelines_file.empty()) ctx.guidelines = read_file(guidelines_file);
    return ctx;
}

std::string_view to_string(ConfigType t) {
    switch (t) {
        case ConfigType::Integer: return "integer";
        case ConfigType::Number: return "number";
        case ConfigType::Boolean: return "boolean";
        case ConfigType::String: return "string";
        case ConfigType::StringList: return "string_list";
    }
    return "?";
}

namespace {

struct Entry {
    ConfigKey meta;
    std::function<void(RunConfig&, const json&)> set;
    std::function<json(const RunConfig&)> get;
};

template <class T>
constexpr ConfigType type_of() {
    if constexpr (std::is_same_v<T, bool>) return ConfigType::Boolean;
    else if constexpr (std::is_integral_v<T>) return ConfigType::Integer;
    else if constexpr (std::is_floating_point_v<T>) return ConfigType::Number;
    else if constexpr (std::is_same_v<T, std::string>) return ConfigType::String;
    else return ConfigType::StringList;
}

// `field` maps a config to the member it controls.
template <class Field>
Entry entry(std::string key, std::string description, Field field) {
    using T = std::remove_reference_t<decltype(field(std::declval<RunConfig&>()))>;
    Entry e;
    e.meta = {key, type_of<T>(), std::move(description)};
    e.set = [key, field](RunConfig& c, const json& v) {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw InvalidConfig(key + " must be a boolean");
            field(c) = v.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
                throw InvalidConfig(key + " must be a non-negative integer");
            field(c) = v.get<T>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw InvalidConfig(key + " must be a number");
            field(c) = v.get<double>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw InvalidConfig(key + " must be a string");
            field(c) = v.get<std::string>();
        } else {
            if (!v.is_array()) throw InvalidConfig(key + " must be a list of strings");
            std::vector<std::string> xs;
            for (const auto& x : v) {
                if (!x.is_string()) throw InvalidConfig(key + " must be a list of strings");
                xs.push_back(x.get<std::string>());
            }
            field(c) = std::move(xs);
        }
    };
    e.get = [field](const RunConfig& c) { return json(field(const_cast<RunConfig&>(c))); };
    return e;
}

Entry millis_entry(std::string key, std::string description,
                   std::function<std::chrono::milliseconds&(RunConfig&)> field) {
    Entry e;
    e.meta = {key, ConfigType::Integer, std::move(description)};
    e.set = [key, field](RunConfig& c, const json& v) {
        if (!v.is_number_unsigned()) throw InvalidConfig(key + " must be a non-negative integer");
        field(c) = std::chrono::milliseconds(v.get<long long>());
    };
    e.get = [field](const RunConfig& c) { return json(field(const_cast<RunConfig&>(c)).count()); };
    return e;
}

Entry variant_entry() {
    Entry e;
    e.meta = {"sft.variant", ConfigType::String, "supervision variant: cls_exp_nocot | cls_fg_exp_nocot | cls_fg_exp_cotd"};
    e.set = [](RunConfig& c, const json& v) {
        const auto parsed = v.is_string() ? parse_sft_variant(v.get<std::string>()) : std::nullopt;
        if (!parsed) throw InvalidConfig("sft.variant must be one of cls_exp_nocot, cls_fg_exp_nocot, cls_fg_exp_cotd");
        c.sft.variant = *parsed;
    };
    e.get = [](const RunConfig& c) { return json(std::string(to_string(c.sft.variant))); };
    return e;
}

#define FIELD(expr) [](RunConfig& c) -> auto& { return expr; }

const std::vector<Entry>& entries() {
    static const std::vector<Entry> table = {
        entry("seed", "global seed for every random stream", FIELD(c.seed)),
        entry("synth.vocab_size", "synthetic vocabulary size including structural tokens", FIELD(c.synth.vocab_size)),
        entry("synth.n_train", "synthetic training records", FIELD(c.synth.n_train)),
        entry("synth.n_dev", "synthetic dev records", FIELD(c.synth.n_dev)),
        entry("synth.n_test", "synthetic test records", FIELD(c.synth.n_test)),
        entry("synth.trigger_tokens", "words that make a synthetic meme hateful", FIELD(c.synth.trigger_tokens)),
        entry("synth.hateful_ratio", "share of hateful records per split", FIELD(c.synth.hateful_ratio)),
        entry("prompt.template", "prompt template version", FIELD(c.prompt_template)),
        entry("prompt.guidelines_file", "guidelines text file; empty uses the bundled v1 text", FIELD(c.guidelines_file)),
        entry("policy.position_buckets", "position features of the toy policy", FIELD(c.policy.position_buckets)),
        entry("policy.window", "previous-token window of the toy policy", FIELD(c.policy.window)),
        entry("policy.watch_tokens", "prompt words exposed as features; empty uses synth.trigger_tokens",
              FIELD(c.policy.watch_tokens)),
        entry("sft.epochs", "supervised epochs", FIELD(c.sft.epochs)),
        entry("sft.batch_size", "records per supervised step", FIELD(c.sft.batch_size)),
        entry("sft.learning_rate", "peak supervised learning rate", FIELD(c.sft.optim.learning_rate)),
        entry("sft.warmup_ratio", "warm-up share of the cosine schedule", FIELD(c.sft.warmup_ratio)),
        entry("sft.grad_clip", "max gradient norm", FIELD(c.sft.optim.grad_clip)),
        entry("sft.weight_decay", "decoupled weight decay", FIELD(c.sft.optim.weight_decay)),
        entry("sft.adam_beta1", "first-moment decay", FIELD(c.sft.optim.beta1)),
        entry("sft.adam_beta2", "second-moment decay", FIELD(c.sft.optim.beta2)),
        entry("sft.adam_eps", "optimizer epsilon", FIELD(c.sft.optim.eps)),
        entry("sft.mask_think_tokens", "exclude empty think tags from the supervised loss", FIELD(c.sft.mask_think_tokens)),
        variant_entry(),
        entry("grpo.group_size", "completions sampled per prompt (K)", FIELD(c.grpo.group_size)),
        entry("grpo.kl_beta", "KL penalty coefficient", FIELD(c.grpo.kl_beta)),
        entry("grpo.clip_epsilon", "ratio clipping range", FIELD(c.grpo.clip_epsilon)),
        entry("grpo.advantage_epsilon", "stabilizer in the advantage denominator", FIELD(c.grpo.advantage_epsilon)),
        entry("grpo.inner_epochs", "gradient passes per sampled batch", FIELD(c.grpo.inner_epochs)),
        entry("grpo.steps", "optimization steps", FIELD(c.grpo.steps)),
        entry("grpo.batch_size", "prompts per step", FIELD(c.grpo.batch_size)),
        entry("grpo.eval_every", "steps between dev evaluations", FIELD(c.grpo.eval_every)),
        entry("grpo.truncated_ratios", "evaluate ratios under the truncated sampling distribution",
              FIELD(c.grpo.truncated_ratios)),
        entry("grpo.learning_rate", "peak learning rate", FIELD(c.grpo.optim.learning_rate)),
        entry("grpo.warmup_ratio", "warm-up share of the cosine schedule", FIELD(c.grpo.warmup_ratio)),
        entry("grpo.grad_clip", "max gradient norm", FIELD(c.grpo.optim.grad_clip)),
        entry("grpo.weight_decay", "decoupled weight decay", FIELD(c.grpo.optim.weight_decay)),
        entry("grpo.adam_beta1", "first-moment decay", FIELD(c.grpo.optim.beta1)),
        entry("grpo.adam_beta2", "second-moment decay", FIELD(c.grpo.optim.beta2)),
        entry("grpo.adam_eps", "optimizer epsilon", FIELD(c.grpo.optim.eps)),
        entry("grpo.value_loss_coef", "recorded only; the objective has no value function", FIELD(c.grpo.value_loss_coef)),
        entry("grpo.gae_lambda", "recorded only; the objective has no value function", FIELD(c.grpo.gae_lambda)),
        entry("decode.temperature", "sampling temperature", FIELD(c.grpo.decode.temperature)),
        entry("decode.top_p", "nucleus mass", FIELD(c.grpo.decode.top_p)),
        entry("decode.max_tokens", "max sampled tokens per completion", FIELD(c.grpo.decode.max_tokens)),
        entry("reward.alpha_fmt", "format reward weight", FIELD(c.grpo.reward.weights.alpha_fmt)),
        entry("reward.alpha_lbl", "label reward weight", FIELD(c.grpo.reward.weights.alpha_lbl)),
        entry("reward.alpha_len", "length reward weight", FIELD(c.grpo.reward.weights.alpha_len)),
        entry("reward.alpha_met", "METEOR reward weight", FIELD(c.grpo.reward.weights.alpha_met)),
        entry("reward.length_target", "explanation length with full length reward (words)",
              FIELD(c.grpo.reward.length.target_words)),
        entry("reward.length_sigma", "width of the length reward (words)", FIELD(c.grpo.reward.length.sigma)),
        entry("reward.graded_format", "partial format credit per passing check", FIELD(c.grpo.reward.graded_format)),
        entry("meteor.stemming", "match stems as well as surface forms", FIELD(c.grpo.reward.meteor.use_stemming)),
        entry("meteor.alpha", "recall weight in the harmonic mean", FIELD(c.grpo.reward.meteor.fmean_recall_weight)),
        entry("meteor.gamma", "fragmentation penalty scale", FIELD(c.grpo.reward.meteor.penalty_gamma)),
        entry("meteor.beta", "fragmentation penalty exponent", FIELD(c.grpo.reward.meteor.penalty_beta)),
        entry("monitor.collapse_fraction", "think-length share that raises the collapse flag", FIELD(c.collapse_fraction)),
        entry("monitor.collapse_window", "steps in the think-length moving average", FIELD(c.collapse_window)),
        entry("modelsvc.endpoint", "chat-completion service base address", FIELD(c.modelsvc.endpoint)),
        entry("modelsvc.model", "model name sent with each request", FIELD(c.modelsvc.model)),
        entry("modelsvc.api_key_env", "environment variable holding the bearer token", FIELD(c.modelsvc.api_key_env)),
        millis_entry("modelsvc.timeout_ms", "per-request timeout", [](RunConfig& c) -> auto& { return c.modelsvc.timeout; }),
        entry("modelsvc.max_retries", "retries after a failed attempt", FIELD(c.modelsvc.retry.max_retries)),
        millis_entry("modelsvc.backoff_ms", "delay before the first retry",
                     [](RunConfig& c) -> auto& { return c.modelsvc.retry.initial_backoff; }),
        entry("modelsvc.backoff_multiplier", "growth of the retry delay", FIELD(c.modelsvc.retry.backoff_multiplier)),
        millis_entry("modelsvc.max_backoff_ms", "cap on the retry delay",
                     [](RunConfig& c) -> auto& { return c.modelsvc.retry.max_backoff; }),
        entry("modelsvc.max_concurrency", "max requests in flight", FIELD(c.modelsvc.max_concurrency)),
        entry("modelsvc.rubric_version", "judge rubric version", FIELD(c.rubric_version)),
        entry("plot.window", "smoothing window; 0 scales it to the run length", FIELD(c.plot_window)),
        entry("eval.best_of", "candidates per record at evaluation", FIELD(c.eval_best_of)),
    };
    return table;
}

#undef FIELD

const Entry& find_entry(std::string_view key) {
    for (const auto& e : entries())
        if (e.meta.key == key) return e;
    throw InvalidConfig("unknown config key '" + std::string(key) + "'");
}

json parse_scalar(const Entry& e, std::string_view raw) {
    const std::string text(trim(raw));
    switch (e.meta.type) {
        case ConfigType::Boolean: {
            const std::string t = to_lower(text);
            if (t == "true" || t == "1" || t == "yes") return true;
            if (t == "false" || t == "0" || t == "no") return false;
            throw InvalidConfig(e.meta.key + " must be true or false");
        }
        case ConfigType::Integer: {
            char* end = nullptr;
            errno = 0;
            const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
            if (text.empty() || text[0] == '-' || *end != '\0' || errno == ERANGE)
                throw InvalidConfig(e.meta.key + " must be a non-negative integer, got '" + text + "'");
            return v;
        }
        case ConfigType::Number: {
            char* end = nullptr;
            const double v = std::strtod(text.c_str(), &end);
            if (text.empty() || *end != '\0' || !std::isfinite(v))
                throw InvalidConfig(e.meta.key + " must be a number, got '" + text + "'");
            return v;
        }
        case ConfigType::String: return text;
        case ConfigType::StringList: {
            json arr = json::array();
            std::size_t pos = 0;
            while (!text.empty() && pos <= text.size()) {
                std::size_t comma = text.find(',', pos);
                if (comma == std::string::npos) comma = text.size();
                const auto item = trim(std::string_view(text).substr(pos, comma - pos));
                if (!item.empty()) arr.push_back(std::string(item));
                pos = comma + 1;
            }
            return arr;
        }
    }
    return nullptr;
}

void apply_json(RunConfig& c, const json& j, const std::string& prefix) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (it->is_object()) {
            apply_json(c, *it, key);
            continue;
        }
        const Entry& e = find_entry(key);
        e.set(c, *it);
        if (e.meta.key == "seed") c.apply_seed();
    }
}

}  // namespace

const std::vector<ConfigKey>& config_schema() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> out;
        for (const auto& e : entries()) out.push_back(e.meta);
        return out;
    }();
    return keys;
}

std::string config_schema_json() {
    const RunConfig defaults;
    nlohmann::ordered_json j;
    j["title"] = "memerl run configuration";
    j["description"] =
        "Keys accepted in config files (JSON or key = value lines) and --set overrides. Unknown keys are rejected.";
    auto& keys = j["keys"] = nlohmann::ordered_json::array();
    for (const auto& e : entries())
        keys.push_back({{"key", e.meta.key},
                        {"type", std::string(to_string(e.meta.type))},
                        {"default", e.get(defaults)},
                        {"description", e.meta.description}});
    return j.dump(2) + "\n";
}

void set_config_value(RunConfig& config, std::string_view key, std::string_view value) {
    const Entry& e = find_entry(key);
    e.set(config, parse_scalar(e, value));
    if (e.meta.key == "seed") config.apply_seed();
}

void apply_config_text(RunConfig& config, std::string_view text) {
    const auto body = trim(text);
    if (!body.empty() && body.front() == '{') {
        const auto j = json::parse(body, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw InvalidConfig("config file is not a valid JSON object");
        apply_json(config, j, "");
        return;
    }
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw InvalidConfig(strprintf("config line %zu is not 'key = value'", line_no));
        set_config_value(config, trim(line.substr(0, eq)), line.substr(eq + 1));
    }
}

void apply_config_file(RunConfig& config, const std::string& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const Error& e) {
        throw InvalidConfig(std::string("cannot read config file: ") + e.what());
    }
    apply_config_text(config, text);
}

std::string config_to_json(const RunConfig& config) {
    nlohmann::ordered_json j;
    for (const auto& e : entries()) j[e.meta.key] = e.get(config);
    return j.dump();
}

std::string config_hash(const RunConfig& config) {
    return strprintf("%016llx", static_cast<unsigned long long>(fnv1a64(config_to_json(config))));
}

void validate(const RunConfig& c) {
    validate(c.synth);
    validate(c.sft.optim);
    if (c.sft.batch_size == 0) throw InvalidConfig("sft.batch_size must be positive");
    if (!(c.sft.warmup_ratio >= 0 && c.sft.warmup_ratio < 1)) throw InvalidConfig("sft.warmup_ratio must lie in [0, 1)");
    validate(c.grpo);
    if (c.prompt_template != "v1") throw UnknownTemplate("unknown prompt template '" + c.prompt_template + "'");
    if (c.policy.position_buckets == 0) throw InvalidConfig("policy.position_buckets must be positive");
    if (!(c.collapse_fraction > 0 && c.collapse_fraction < 1))
        throw InvalidConfig("monitor.collapse_fraction must lie in (0, 1)");
    if (c.collapse_window == 0) throw InvalidConfig("monitor.collapse_window must be positive");
    validate(c.modelsvc);
    judge_rubric(c.rubric_version);
    if (c.eval_best_of == 0) throw InvalidConfig("eval.best_of must be at least 1");
}

std::string_view version_string() { return MEMERL_VERSION; }

}  // namespace memerl
