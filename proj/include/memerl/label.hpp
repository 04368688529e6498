#pragma once

#include <optional>
#include <string_view>

namespace memerl {

enum class Label { Hateful, NonHateful };

/// Canonical lowercase spelling used in structured outputs: "hateful" / "not_hateful".
constexpr std::string_view label_name(Label label) {
    return label == Label::Hateful ? "hateful" : "not_hateful";
}

/// Case-insensitive inverse of label_name. Anything else is unparseable.
std::optional<Label> parse_label_name(std::string_view text);

}  // namespace memerl
