#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "memerl/corpus.hpp"

namespace memerl {

using TokenId = int;

/// Ordered token inventory of the toy policy. The first seven ids are the structural tokens.
class Vocabulary {
public:
    static constexpr std::size_t kMaxSize = 256;
    static constexpr std::string_view kEos = "<eos>";

    /// Structural tokens followed by `words` (duplicates and structural spellings dropped).
    explicit Vocabulary(const std::vector<std::string>& words = {});

    std::size_t size() const { return tokens_.size(); }
    const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    std::optional<TokenId> find(std::string_view token) const;
    /// Throws UnknownToken.
    TokenId id(std::string_view token) const;

    TokenId think_open() const { return 0; }
    TokenId think_close() const { return 1; }
    TokenId label_marker() const { return 2; }
    TokenId explanation_marker() const { return 3; }
    TokenId hateful() const { return 4; }
    TokenId not_hateful() const { return 5; }
    TokenId eos() const { return 6; }

    /// Splits think tags off adjacent text, then on whitespace. Throws UnknownToken.
    std::vector<TokenId> tokenize(std::string_view text) const;

    /// Inverse of tokenize for canonical outputs; stops at end-of-sequence.
    std::string render(const std::vector<TokenId>& ids) const;

    bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
};

const std::vector<std::string>& structural_tokens();

/// Vocabulary covering every word that can appear in an SFT target built from `records`.
Vocabulary vocabulary_from_corpus(const std::vector<MemeRecord>& records);

/// Vocabulary of a synthetic corpus; its size equals config.vocab_size.
Vocabulary synthetic_vocabulary(const SynthConfig& config);

}  // namespace memerl
