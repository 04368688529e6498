#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "memerl/label.hpp"

namespace memerl {

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kLabelMarker = "Label:";
inline constexpr std::string_view kExplanationMarker = "Explanation:";

/// A parsed model output: `<think>t</think> Label: l Explanation: e`.
struct StructuredOutput {
    std::string think;
    Label label = Label::NonHateful;
    std::string explanation;
    std::string raw;  // text the output was parsed from; empty when built by hand

    /// Equality over the semantic fields; `raw` is ignored.
    bool operator==(const StructuredOutput& other) const {
        return think == other.think && label == other.label && explanation == other.explanation;
    }
};

struct FormatReport {
    bool has_think_block = false;
    bool think_well_nested = false;
    bool has_label_field = false;
    bool label_parseable = false;
    bool has_explanation = false;
    bool compliant = false;

    bool operator==(const FormatReport&) const = default;
};

/// Best-effort field extraction, also for non-compliant text. Rewards use this to give
/// length/METEOR credit when an explanation can still be isolated.
struct ExtractedFields {
    FormatReport report;
    std::string think;                       // empty unless a think block was found
    std::optional<Label> label;              // set iff the Label field parsed
    std::optional<std::string> explanation;  // set iff an Explanation marker was found
};

ExtractedFields extract_fields(std::string_view text);

/// Succeeds exactly when the text is format-compliant.
std::variant<StructuredOutput, FormatReport> parse(std::string_view text);

/// Canonical rendering: "<think>{t}</think>\nLabel: {l}\nExplanation: {e}".
std::string serialize(const StructuredOutput& output);

FormatReport check_format(std::string_view text);

/// True when `text` contains one of the four delimiter strings (case-insensitive).
bool contains_delimiter(std::string_view text);

}  // namespace memerl
