#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "memerl/label.hpp"

namespace memerl {

enum class ProtectedCategory { Religion, Race, Sex, Disability, Nationality };
enum class AttackType { Dehumanizing, Inferiority, IncitingViolence, Mocking, Contempt, Slurs, Exclusion };
enum class Split { Train, Dev, Test };

inline constexpr std::array<ProtectedCategory, 5> kAllCategories = {
    ProtectedCategory::Religion, ProtectedCategory::Race, ProtectedCategory::Sex,
    ProtectedCategory::Disability, ProtectedCategory::Nationality};
inline constexpr std::array<AttackType, 7> kAllAttackTypes = {
    AttackType::Dehumanizing, AttackType::Inferiority, AttackType::IncitingViolence, AttackType::Mocking,
    AttackType::Contempt, AttackType::Slurs, AttackType::Exclusion};
inline constexpr std::array<Split, 3> kAllSplits = {Split::Train, Split::Dev, Split::Test};

std::string_view to_string(ProtectedCategory c);
std::string_view to_string(AttackType a);
std::string_view to_string(Split s);
std::optional<ProtectedCategory> parse_category(std::string_view text);
std::optional<AttackType> parse_attack_type(std::string_view text);
std::optional<Split> parse_split(std::string_view text);

struct MemeRecord {
    std::string id;
    std::string image_ref;  // carried through, never opened
    std::string ocr_text;
    Label label = Label::NonHateful;
    std::set<ProtectedCategory> protected_categories;
    std::set<AttackType> attack_types;
    std::string gold_explanation;
    std::optional<std::string> cot_trace;
    Split split = Split::Train;

    bool operator==(const MemeRecord&) const = default;
};

// ---------------------------------------------------------------------------
// JSONL ingestion

enum class DiagnosticKind { MissingField, UnknownEnumValue, DuplicateId, InvalidRecord, MalformedJson };

std::string_view to_string(DiagnosticKind kind);

struct Diagnostic {
    DiagnosticKind kind;
    std::size_t line = 0;  // 1-based
    std::string field;     // field name, or the offending id for DuplicateId
    std::string message;
};

struct LoadResult {
    std::vector<MemeRecord> records;
    std::vector<Diagnostic> diagnostics;
};

struct LoadOptions {
    /// Used when a line has no "split" field (the public dataset ships one file per split).
    std::optional<Split> default_split;
};

/// Parses one object per line. Invalid lines become diagnostics; valid ones keep file order.
LoadResult parse_jsonl(std::string_view contents, const LoadOptions& options = {});
LoadResult load_jsonl(const std::string& path, const LoadOptions& options = {});

std::string to_json_line(const MemeRecord& record);
std::string serialize_jsonl(const std::vector<MemeRecord>& records);
void save_jsonl(const std::string& path, const std::vector<MemeRecord>& records);

// ---------------------------------------------------------------------------
// Statistics

struct LabelCounts {
    std::size_t hateful = 0;
    std::size_t non_hateful = 0;
    std::size_t total() const { return hateful + non_hateful; }
    bool operator==(const LabelCounts&) const = default;
};

struct CorpusStats {
    std::map<Split, LabelCounts> per_split;  // every split present, possibly zero
    LabelCounts overall;
    std::string to_table() const;
};

CorpusStats corpus_stats(const std::vector<MemeRecord>& records);

std::vector<MemeRecord> filter_split(const std::vector<MemeRecord>& records, Split split);

// ---------------------------------------------------------------------------
// Prompt construction

struct PromptContext {
    std::string guidelines;
    bool include_fine_grained = false;
    std::string template_id = "v1";
};

/// Context with the bundled v1 guideline text.
PromptContext default_prompt_context(bool include_fine_grained = false);

/// Instruction prompt for one record. Never includes the label, explanation or reasoning trace.
std::string build_prompt(const MemeRecord& record, const PromptContext& ctx);

// ---------------------------------------------------------------------------
// Synthetic corpora

struct SynthConfig {
    std::size_t vocab_size = 64;
    std::size_t n_train = 200;
    std::size_t n_dev = 50;
    std::size_t n_test = 50;
    std::vector<std::string> trigger_tokens = {"zorb", "krell", "vosk", "thrax"};
    double hateful_ratio = 0.4;
    std::uint64_t seed = 42;
};

/// Output-side words of the synthetic task other than triggers and structural tokens.
const std::vector<std::string>& synthetic_template_words();

/// Full token inventory of a synthetic corpus: template words, triggers, filler words.
/// Structural tokens are not included (they belong to the policy vocabulary).
std::vector<std::string> synthetic_words(const SynthConfig& config);

void validate(const SynthConfig& config);

/// Hateful iff the text contains a trigger token. Class balance per split is exact:
/// round(hateful_ratio * n) hateful records in each split.
std::vector<MemeRecord> generate_synthetic(const SynthConfig& config);

}  // namespace memerl
