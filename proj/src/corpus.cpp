#include "memerl/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "memerl/errors.hpp"
#include "memerl/resources.hpp"
#include "memerl/util.hpp"

namespace memerl {

using ordered_json = nlohmann::ordered_json;

std::optional<Label> parse_label_name(std::string_view text) {
    const std::string lower = to_lower(trim(text));
    if (lower == "hateful") return Label::Hateful;
    if (lower == "not_hateful") return Label::NonHateful;
    return std::nullopt;
}

std::string_view to_string(ProtectedCategory c) {
    switch (c) {
        case ProtectedCategory::Religion: return "religion";
        case ProtectedCategory::Race: return "race";
        case ProtectedCategory::Sex: return "sex";
        case ProtectedCategory::Disability: return "disability";
        case ProtectedCategory::Nationality: return "nationality";
    }
    return "";
}

std::string_view to_string(AttackType a) {
    switch (a) {
        case AttackType::Dehumanizing: return "dehumanizing";
        case AttackType::Inferiority: return "inferiority";
        case AttackType::IncitingViolence: return "inciting_violence";
        case AttackType::Mocking: return "mocking";
        case AttackType::Contempt: return "contempt";
        case AttackType::Slurs: return "slurs";
        case AttackType::Exclusion: return "exclusion";
    }
    return "";
}

std::string_view to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Dev: return "dev";
        case Split::Test: return "test";
    }
    return "";
}

std::optional<ProtectedCategory> parse_category(std::string_view text) {
    for (auto c : kAllCategories)
        if (to_string(c) == text) return c;
    return std::nullopt;
}

std::optional<AttackType> parse_attack_type(std::string_view text) {
    for (auto a : kAllAttackTypes)
        if (to_string(a) == text) return a;
    return std::nullopt;
}

std::optional<Split> parse_split(std::string_view text) {
    for (auto s : kAllSplits)
        if (to_string(s) == text) return s;
    return std::nullopt;
}

std::string_view to_string(DiagnosticKind kind) {
    switch (kind) {
        case DiagnosticKind::MissingField: return "MissingField";
        case DiagnosticKind::UnknownEnumValue: return "UnknownEnumValue";
        case DiagnosticKind::DuplicateId: return "DuplicateId";
        case DiagnosticKind::InvalidRecord: return "InvalidRecord";
        case DiagnosticKind::MalformedJson: return "MalformedJson";
    }
    return "";
}

// ---------------------------------------------------------------------------

namespace {

struct LineError {
    Diagnostic diag;
};

[[noreturn]] void fail(DiagnosticKind kind, std::size_t line, std::string field, std::string message) {
    throw LineError{Diagnostic{kind, line, std::move(field), std::move(message)}};
}

const ordered_json& require(const ordered_json& obj, const char* name, std::size_t line) {
    auto it = obj.find(name);
    if (it == obj.end() || it->is_null()) fail(DiagnosticKind::MissingField, line, name, "missing field");
    return *it;
}

std::string require_string(const ordered_json& obj, const char* name, std::size_t line) {
    const auto& v = require(obj, name, line);
    if (!v.is_string()) fail(DiagnosticKind::InvalidRecord, line, name, "expected a string");
    return v.get<std::string>();
}

Label parse_label_field(const ordered_json& v, std::size_t line) {
    if (v.is_number_integer()) {
        const auto n = v.get<long long>();
        if (n == 1) return Label::Hateful;
        if (n == 0) return Label::NonHateful;
    } else if (v.is_string()) {
        if (auto l = parse_label_name(v.get<std::string>())) return *l;
    }
    fail(DiagnosticKind::UnknownEnumValue, line, "label", "unknown label value " + v.dump());
}

template <typename Enum, typename ParseFn>
std::set<Enum> parse_enum_list(const ordered_json& v, const char* name, std::size_t line, ParseFn parse) {
    if (!v.is_array()) fail(DiagnosticKind::InvalidRecord, line, name, "expected an array of strings");
    std::set<Enum> out;
    for (const auto& item : v) {
        if (!item.is_string()) fail(DiagnosticKind::InvalidRecord, line, name, "expected an array of strings");
        auto parsed = parse(item.get<std::string>());
        if (!parsed) fail(DiagnosticKind::UnknownEnumValue, line, name, "unknown value \"" + item.get<std::string>() + "\"");
        out.insert(*parsed);
    }
    return out;
}

MemeRecord parse_record(const ordered_json& obj, std::size_t line, const LoadOptions& options) {
    if (!obj.is_object()) fail(DiagnosticKind::MalformedJson, line, "", "line is not a JSON object");
    MemeRecord r;
    r.id = require(obj, "id", line).is_string() ? obj["id"].get<std::string>() : obj["id"].dump();
    r.image_ref = require_string(obj, "img", line);
    r.ocr_text = require_string(obj, "text", line);
    r.label = parse_label_field(require(obj, "label", line), line);

    // Fine-grained fields are mandatory for hateful records; absent means empty otherwise.
    auto fine = [&](const char* name) -> const ordered_json* {
        auto it = obj.find(name);
        if (it == obj.end() || it->is_null()) {
            if (r.label == Label::Hateful) fail(DiagnosticKind::MissingField, line, name, "missing field");
            return nullptr;
        }
        return &*it;
    };
    if (const auto* pc = fine("protected_category"))
        r.protected_categories = parse_enum_list<ProtectedCategory>(*pc, "protected_category", line, parse_category);
    if (const auto* at = fine("attack_type"))
        r.attack_types = parse_enum_list<AttackType>(*at, "attack_type", line, parse_attack_type);

    r.gold_explanation = require_string(obj, "explanation", line);
    if (trim(r.gold_explanation).empty()) fail(DiagnosticKind::MissingField, line, "explanation", "empty explanation");

    if (auto it = obj.find("cot"); it != obj.end() && !it->is_null()) {
        if (!it->is_string()) fail(DiagnosticKind::InvalidRecord, line, "cot", "expected a string");
        r.cot_trace = it->get<std::string>();
    }

    auto split_it = obj.find("split");
    if (split_it == obj.end() || split_it->is_null()) {
        if (!options.default_split) fail(DiagnosticKind::MissingField, line, "split", "missing field");
        r.split = *options.default_split;
    } else {
        if (!split_it->is_string()) fail(DiagnosticKind::InvalidRecord, line, "split", "expected a string");
        auto s = parse_split(split_it->get<std::string>());
        if (!s) fail(DiagnosticKind::UnknownEnumValue, line, "split", "unknown split " + split_it->dump());
        r.split = *s;
    }

    if (r.label == Label::NonHateful && (!r.protected_categories.empty() || !r.attack_types.empty()))
        fail(DiagnosticKind::InvalidRecord, line, "label", "non-hateful record carries fine-grained labels");
    return r;
}

}  // namespace

LoadResult parse_jsonl(std::string_view contents, const LoadOptions& options) {
    LoadResult result;
    std::unordered_set<std::string> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < contents.size()) {
        std::size_t end = contents.find('\n', pos);
        if (end == std::string_view::npos) end = contents.size();
        const std::string_view line = contents.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            ordered_json obj;
            try {
                obj = ordered_json::parse(line);
            } catch (const nlohmann::json::parse_error& e) {
                fail(DiagnosticKind::MalformedJson, line_no, "", e.what());
            }
            MemeRecord record = parse_record(obj, line_no, options);
            if (!seen.insert(record.id).second)
                fail(DiagnosticKind::DuplicateId, line_no, record.id, "duplicate id " + record.id);
            result.records.push_back(std::move(record));
        } catch (const LineError& e) {
            result.diagnostics.push_back(e.diag);
        }
    }
    return result;
}

LoadResult load_jsonl(const std::string& path, const LoadOptions& options) {
    return parse_jsonl(read_file(path), options);
}

std::string to_json_line(const MemeRecord& r) {
    ordered_json obj;
    obj["id"] = r.id;
    obj["img"] = r.image_ref;
    obj["text"] = r.ocr_text;
    obj["label"] = r.label == Label::Hateful ? 1 : 0;
    auto cats = ordered_json::array();
    for (auto c : r.protected_categories) cats.push_back(std::string(to_string(c)));
    obj["protected_category"] = cats;
    auto attacks = ordered_json::array();
    for (auto a : r.attack_types) attacks.push_back(std::string(to_string(a)));
    obj["attack_type"] = attacks;
    obj["explanation"] = r.gold_explanation;
    obj["cot"] = r.cot_trace ? ordered_json(*r.cot_trace) : ordered_json(nullptr);
    obj["split"] = std::string(to_string(r.split));
    return obj.dump();
}

std::string serialize_jsonl(const std::vector<MemeRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += to_json_line(r);
        out += '\n';
    }
    return out;
}

void save_jsonl(const std::string& path, const std::vector<MemeRecord>& records) {
    write_file(path, serialize_jsonl(records));
}

// ---------------------------------------------------------------------------

CorpusStats corpus_stats(const std::vector<MemeRecord>& records) {
    CorpusStats stats;
    for (auto s : kAllSplits) stats.per_split[s] = {};
    for (const auto& r : records) {
        auto& c = stats.per_split[r.split];
        auto& o = stats.overall;
        if (r.label == Label::Hateful) {
            ++c.hateful;
            ++o.hateful;
        } else {
            ++c.non_hateful;
            ++o.non_hateful;
        }
    }
    return stats;
}

std::string CorpusStats::to_table() const {
    std::string out = strprintf("%-12s %8s %8s %8s %8s\n", "label", "train", "dev", "test", "total");
    auto row = [&](const char* name, auto pick) {
        out += strprintf("%-12s %8zu %8zu %8zu %8zu\n", name, pick(per_split.at(Split::Train)),
                         pick(per_split.at(Split::Dev)), pick(per_split.at(Split::Test)), pick(overall));
    };
    row("not_hateful", [](const LabelCounts& c) { return c.non_hateful; });
    row("hateful", [](const LabelCounts& c) { return c.hateful; });
    row("total", [](const LabelCounts& c) { return c.total(); });
    return out;
}

std::vector<MemeRecord> filter_split(const std::vector<MemeRecord>& records, Split split) {
    std::vector<MemeRecord> out;
    std::copy_if(records.begin(), records.end(), std::back_inserter(out),
                 [split](const MemeRecord& r) { return r.split == split; });
    return out;
}

// ---------------------------------------------------------------------------

PromptContext default_prompt_context(bool include_fine_grained) {
    return PromptContext{std::string(resources::kGuidelinesV1), include_fine_grained, "v1"};
}

std::string build_prompt(const MemeRecord& record, const PromptContext& ctx) {
    if (ctx.template_id != "v1") throw UnknownTemplate("unknown prompt template: " + ctx.template_id);
    if (trim(ctx.guidelines).empty()) throw InvalidConfig("prompt guidelines are empty");

    std::string out;
    out += "Classify the meme below as hateful or not_hateful and justify the decision.\n\n";
    out += "Guidelines:\n";
    out += trim(ctx.guidelines);
    out += "\n\n";
    if (ctx.include_fine_grained) {
        std::vector<std::string> cats, attacks;
        for (auto c : kAllCategories) cats.emplace_back(to_string(c));
        for (auto a : kAllAttackTypes) attacks.emplace_back(to_string(a));
        out += "Protected categories: " + join(cats, ", ") + "\n";
        out += "Attack types: " + join(attacks, ", ") + "\n\n";
    }
    out += "Image: <image>\n";
    out += "Meme text: " + record.ocr_text + "\n\n";
    out += "Answer with private reasoning in <think></think>, then a line \"Label: hateful\" or "
           "\"Label: not_hateful\", then a line \"Explanation:\" followed by the rationale.";
    return out;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& synthetic_template_words() {
    static const std::vector<std::string> words = [] {
        std::vector<std::string> w = {"the", "text", "uses", "as",  "a",   "attack",    "on",
                                      "has", "no",   "any",  "protected", "group", "category"};
        for (auto c : kAllCategories) w.emplace_back(to_string(c));
        for (auto a : kAllAttackTypes) w.emplace_back(to_string(a));
        return w;
    }();
    return words;
}

namespace {

constexpr std::size_t kStructuralTokenCount = 7;
constexpr std::size_t kMinFillerWords = 8;

std::size_t filler_count(const SynthConfig& config) {
    const std::size_t reserved =
        kStructuralTokenCount + synthetic_template_words().size() + config.trigger_tokens.size();
    return config.vocab_size > reserved ? config.vocab_size - reserved : 0;
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
}

}  // namespace

void validate(const SynthConfig& config) {
    if (config.vocab_size == 0 || config.vocab_size > 256) throw InvalidConfig("synth.vocab_size must be in [1, 256]");
    if (config.n_train == 0 || config.n_dev == 0 || config.n_test == 0)
        throw InvalidConfig("synth split sizes must be positive");
    if (!(config.hateful_ratio > 0.0 && config.hateful_ratio < 1.0))
        throw InvalidConfig("synth.hateful_ratio must lie in (0, 1)");
    if (config.trigger_tokens.empty()) throw InvalidConfig("synth.trigger_tokens must not be empty");
    std::set<std::string> seen;
    const auto& tmpl = synthetic_template_words();
    for (const auto& t : config.trigger_tokens) {
        if (t.empty() || split_whitespace(t).size() != 1) throw InvalidConfig("trigger token must be one word: '" + t + "'");
        if (!seen.insert(t).second) throw InvalidConfig("duplicate trigger token: " + t);
        if (std::find(tmpl.begin(), tmpl.end(), t) != tmpl.end())
            throw InvalidConfig("trigger token collides with a template word: " + t);
        if (t.size() == 3 && t[0] == 'w' && std::isdigit(static_cast<unsigned char>(t[1])))
            throw InvalidConfig("trigger token collides with filler naming: " + t);
    }
    if (filler_count(config) < kMinFillerWords)
        throw InvalidConfig(strprintf("synth.vocab_size %zu too small: need at least %zu", config.vocab_size,
                                      config.vocab_size + kMinFillerWords - filler_count(config)));
}

std::vector<std::string> synthetic_words(const SynthConfig& config) {
    validate(config);
    std::vector<std::string> words = synthetic_template_words();
    words.insert(words.end(), config.trigger_tokens.begin(), config.trigger_tokens.end());
    const std::size_t n_fill = filler_count(config);
    for (std::size_t i = 0; i < n_fill; ++i) words.push_back(strprintf("w%02zu", i));
    return words;
}

std::vector<MemeRecord> generate_synthetic(const SynthConfig& config) {
    validate(config);
    const std::size_t n_fill = filler_count(config);
    std::vector<std::string> fillers;
    for (std::size_t i = 0; i < n_fill; ++i) fillers.push_back(strprintf("w%02zu", i));
    const auto& triggers = config.trigger_tokens;

    std::vector<MemeRecord> out;
    for (auto split : kAllSplits) {
        const std::size_t n = split == Split::Train ? config.n_train : split == Split::Dev ? config.n_dev : config.n_test;
        std::mt19937_64 rng(derive_seed(config.seed, static_cast<std::uint64_t>(split) + 1));

        const auto n_hateful = static_cast<std::size_t>(std::llround(config.hateful_ratio * static_cast<double>(n)));
        std::vector<bool> hateful(n, false);
        std::fill(hateful.begin(), hateful.begin() + static_cast<std::ptrdiff_t>(std::min(n_hateful, n)), true);
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = uniform_index(rng, i);
            const bool tmp = hateful[i - 1];
            hateful[i - 1] = hateful[j];
            hateful[j] = tmp;
        }

        for (std::size_t i = 0; i < n; ++i) {
            MemeRecord r;
            r.id = strprintf("syn-%s-%05zu", std::string(to_string(split)).c_str(), i);
            r.image_ref = "img/" + r.id + ".png";
            r.split = split;

            const std::size_t len = 5 + uniform_index(rng, 5);
            std::vector<std::string> words(len);
            for (auto& w : words) w = fillers[uniform_index(rng, fillers.size())];

            if (hateful[i]) {
                r.label = Label::Hateful;
                const std::size_t n_triggers = uniform01(rng) < 0.25 ? 2 : 1;
                std::vector<std::size_t> positions;
                while (positions.size() < n_triggers) {
                    const std::size_t p = uniform_index(rng, len);
                    if (std::find(positions.begin(), positions.end(), p) == positions.end()) positions.push_back(p);
                }
                for (auto p : positions) words[p] = triggers[uniform_index(rng, triggers.size())];

                std::optional<std::size_t> decisive;
                for (const auto& w : words) {
                    auto it = std::find(triggers.begin(), triggers.end(), w);
                    if (it == triggers.end()) continue;
                    const auto t = static_cast<std::size_t>(it - triggers.begin());
                    if (!decisive) decisive = t;
                    r.protected_categories.insert(kAllCategories[t % kAllCategories.size()]);
                    r.attack_types.insert(kAllAttackTypes[t % kAllAttackTypes.size()]);
                }
                const std::size_t t = *decisive;
                r.gold_explanation = strprintf("the text uses %s as a %s attack on %s", triggers[t].c_str(),
                                               std::string(to_string(kAllAttackTypes[t % kAllAttackTypes.size()])).c_str(),
                                               std::string(to_string(kAllCategories[t % kAllCategories.size()])).c_str());
            } else {
                r.label = Label::NonHateful;
                r.gold_explanation = "the text has no attack on any protected group";
            }
            r.ocr_text = join(words, " ");
            out.push_back(std::move(r));
        }
    }
    return out;
}

}  // namespace memerl
