#include "memerl/structured_io.hpp"

#include <cctype>
#include <vector>

#include "memerl/util.hpp"

namespace memerl {

namespace {

struct MarkerHit {
    std::size_t begin;  // start of the keyword
    std::size_t end;    // one past the colon
};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::vector<std::size_t> find_all(std::string_view haystack, std::string_view needle) {
    std::vector<std::size_t> out;
    for (std::size_t pos = haystack.find(needle); pos != std::string_view::npos; pos = haystack.find(needle, pos + 1))
        out.push_back(pos);
    return out;
}

// `keyword` is lowercase and excludes the colon; whitespace between keyword and colon is allowed.
std::optional<MarkerHit> find_marker(std::string_view lower, std::string_view keyword, std::size_t from,
                                     std::size_t to) {
    for (std::size_t pos = lower.find(keyword, from); pos != std::string_view::npos && pos < to;
         pos = lower.find(keyword, pos + 1)) {
        if (pos > from && !is_space(lower[pos - 1]) && lower[pos - 1] != '>') continue;
        std::size_t k = pos + keyword.size();
        while (k < to && (lower[k] == ' ' || lower[k] == '\t')) ++k;
        if (k < to && lower[k] == ':') return MarkerHit{pos, k + 1};
    }
    return std::nullopt;
}

std::size_t skip_space(std::string_view text, std::size_t pos, std::size_t to) {
    while (pos < to && is_space(text[pos])) ++pos;
    return pos;
}

}  // namespace

bool contains_delimiter(std::string_view text) {
    const std::string lower = to_lower(text);
    if (lower.find("<think>") != std::string::npos || lower.find("</think>") != std::string::npos) return true;
    const std::string_view lv = lower;
    return find_marker(lv, "label", 0, lv.size()).has_value() ||
           find_marker(lv, "explanation", 0, lv.size()).has_value();
}

ExtractedFields extract_fields(std::string_view text) {
    ExtractedFields out;
    FormatReport& rep = out.report;
    const std::string lower_s = to_lower(text);
    const std::string_view lower = lower_s;

    // Think block: must open the output; exactly one open and one close tag, in order.
    const auto opens = find_all(lower, "<think>");
    const auto closes = find_all(lower, "</think>");
    rep.think_well_nested = opens.size() == closes.size() && opens.size() <= 1 &&
                            (opens.empty() || opens.front() < closes.front());
    const std::size_t start = skip_space(text, 0, text.size());
    if (!opens.empty() && opens.front() == start) {
        const std::size_t content_begin = start + kThinkOpen.size();
        for (auto c : closes) {
            if (c >= content_begin) {
                rep.has_think_block = true;
                out.think = std::string(trim(text.substr(content_begin, c - content_begin)));
                break;
            }
        }
    }

    // Fields live after the last closing tag. An unterminated think block swallows the rest.
    std::size_t region_begin = 0;
    if (!closes.empty()) {
        region_begin = closes.back() + kThinkClose.size();
    } else if (!opens.empty()) {
        region_begin = text.size();
    }
    const std::size_t region_end = text.size();

    const std::size_t first = skip_space(text, region_begin, region_end);
    std::optional<MarkerHit> label_hit;
    if (auto hit = find_marker(lower, "label", first, region_end); hit && hit->begin == first) label_hit = hit;
    rep.has_label_field = label_hit.has_value();

    const std::size_t expl_from = label_hit ? label_hit->end : region_begin;
    const auto expl_hit = find_marker(lower, "explanation", expl_from, region_end);

    if (label_hit) {
        std::size_t value_end = expl_hit ? expl_hit->begin : text.find('\n', label_hit->end);
        if (value_end == std::string_view::npos) value_end = region_end;
        out.label = parse_label_name(text.substr(label_hit->end, value_end - label_hit->end));
        rep.label_parseable = out.label.has_value();
    }

    if (expl_hit) {
        std::string expl(trim(text.substr(expl_hit->end, region_end - expl_hit->end)));
        rep.has_explanation = !expl.empty() && !contains_delimiter(expl);
        out.explanation = std::move(expl);
    }

    rep.compliant = rep.has_think_block && rep.think_well_nested && rep.has_label_field && rep.label_parseable &&
                    rep.has_explanation;
    return out;
}

std::variant<StructuredOutput, FormatReport> parse(std::string_view text) {
    ExtractedFields f = extract_fields(text);
    if (!f.report.compliant) return f.report;
    return StructuredOutput{std::move(f.think), *f.label, std::move(*f.explanation), std::string(text)};
}

std::string serialize(const StructuredOutput& output) {
    std::string out;
    out.reserve(output.think.size() + output.explanation.size() + 48);
    out += kThinkOpen;
    out += output.think;
    out += kThinkClose;
    out += "\nLabel: ";
    out += label_name(output.label);
    out += "\nExplanation: ";
    out += output.explanation;
    return out;
}

FormatReport check_format(std::string_view text) { return extract_fields(text).report; }

}  // namespace memerl
