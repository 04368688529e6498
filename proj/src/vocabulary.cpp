#include "memerl/vocabulary.hpp"

#include <set>

#include "memerl/errors.hpp"
#include "memerl/structured_io.hpp"
#include "memerl/util.hpp"

namespace memerl {

const std::vector<std::string>& structural_tokens() {
    static const std::vector<std::string> tokens = {
        std::string(kThinkOpen),  std::string(kThinkClose), std::string(kLabelMarker), std::string(kExplanationMarker),
        std::string(label_name(Label::Hateful)), std::string(label_name(Label::NonHateful)), std::string(Vocabulary::kEos)};
    return tokens;
}

Vocabulary::Vocabulary(const std::vector<std::string>& words) {
    auto add = [this](const std::string& t) {
        if (index_.count(t)) return;
        index_.emplace(t, static_cast<TokenId>(tokens_.size()));
        tokens_.push_back(t);
    };
    for (const auto& t : structural_tokens()) add(t);
    for (const auto& w : words) {
        if (w.empty() || split_whitespace(w).size() != 1) throw InvalidConfig("vocabulary entry must be one word: '" + w + "'");
        add(w);
    }
    if (tokens_.size() > kMaxSize)
        throw InvalidConfig(strprintf("vocabulary has %zu tokens; the limit is %zu", tokens_.size(), kMaxSize));
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

TokenId Vocabulary::id(std::string_view token) const {
    if (auto id = find(token)) return *id;
    throw UnknownToken("token not in vocabulary: '" + std::string(token) + "'");
}

std::vector<TokenId> Vocabulary::tokenize(std::string_view text) const {
    std::string spaced;
    spaced.reserve(text.size() + 16);
    for (std::size_t i = 0; i < text.size();) {
        bool tag = false;
        for (std::string_view t : {kThinkOpen, kThinkClose}) {
            if (text.substr(i, t.size()) == t) {
                spaced += ' ';
                spaced += t;
                spaced += ' ';
                i += t.size();
                tag = true;
                break;
            }
        }
        if (!tag) spaced += text[i++];
    }
    std::vector<TokenId> ids;
    for (const auto& w : split_whitespace(spaced)) ids.push_back(id(w));
    return ids;
}

std::string Vocabulary::render(const std::vector<TokenId>& ids) const {
    std::string out;
    TokenId prev = -1;
    for (TokenId id : ids) {
        if (id == eos()) break;
        const std::string& t = token(id);
        if (!out.empty()) {
            if (id == label_marker() || id == explanation_marker()) {
                out += '\n';
            } else if (prev != think_open() && id != think_close()) {
                out += ' ';
            }
        }
        out += t;
        prev = id;
    }
    return out;
}

Vocabulary vocabulary_from_corpus(const std::vector<MemeRecord>& records) {
    std::set<std::string> words;
    auto add_text = [&](std::string_view text) {
        for (auto& w : split_whitespace(text)) words.insert(w);
    };
    for (const auto& r : records) {
        add_text(r.ocr_text);
        add_text(r.gold_explanation);
        if (r.cot_trace) add_text(*r.cot_trace);
    }
    // Fine-grained suffix vocabulary.
    words.insert("category");
    words.insert("attack");
    for (auto c : kAllCategories) words.insert(std::string(to_string(c)));
    for (auto a : kAllAttackTypes) words.insert(std::string(to_string(a)));
    return Vocabulary(std::vector<std::string>(words.begin(), words.end()));
}

Vocabulary synthetic_vocabulary(const SynthConfig& config) { return Vocabulary(synthetic_words(config)); }

}  // namespace memerl
