#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "memerl/label.hpp"

namespace memerl {

// ---------------------------------------------------------------------------
// METEOR

struct MeteorOptions {
    bool use_stemming = false;
    double fmean_recall_weight = 9.0;
    double penalty_gamma = 0.5;
    double penalty_beta = 3.0;
};

/// Alignment details behind a METEOR score.
///
/// Among all alignments with the maximum number of matched unigrams, the one with the
/// fewest chunks is chosen. Ties are broken left to right over candidate tokens, preferring
/// a match to the leftmost free reference position over leaving the token unmatched.
struct MeteorAlignment {
    std::size_t candidate_len = 0;
    std::size_t reference_len = 0;
    std::size_t matches = 0;
    std::size_t chunks = 0;
    std::vector<int> alignment;  // per candidate token: reference index or -1
    bool exact = true;           // false when the search budget forced a greedy fallback
};

/// Lowercased whitespace tokens, as METEOR sees them.
std::vector<std::string> meteor_tokens(std::string_view text, bool use_stemming = false);

/// Minimal English suffix stripper used by the optional stemming stage.
std::string simple_stem(std::string_view word);

MeteorAlignment meteor_align(const std::vector<std::string>& candidate, const std::vector<std::string>& reference);

/// Score from alignment counts: Fmean * (1 - gamma * (chunks/m)^beta), 0 when m = 0.
double meteor_from_counts(std::size_t matches, std::size_t chunks, std::size_t candidate_len,
                          std::size_t reference_len, const MeteorOptions& opts = {});

double meteor(std::string_view candidate, std::string_view reference, const MeteorOptions& opts = {});

// ---------------------------------------------------------------------------
// Classification

/// Two classes plus a column for unparseable predictions.
struct ConfusionMatrix {
    // counts[gold][pred]; gold in {Hateful=0, NonHateful=1}, pred adds Unparseable=2
    std::array<std::array<std::size_t, 3>, 2> counts{};
    std::size_t total() const;
    std::size_t correct() const;
    std::size_t unparseable() const;
};

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct ClassificationReport {
    double accuracy = 0.0;
    double weighted_f1 = 0.0;
    double macro_f1 = 0.0;
    ClassMetrics hateful;
    ClassMetrics non_hateful;
    ConfusionMatrix confusion;
};

/// Unparseable predictions (nullopt) count as wrong and as a missed recall for their gold class.
ClassificationReport classification_report(const std::vector<std::optional<Label>>& preds,
                                           const std::vector<Label>& golds);

// ---------------------------------------------------------------------------
// Inter-judge agreement r*_wg(j)

enum class JudgeDimension { Informativeness, Clarity, Plausibility, Faithfulness };

inline constexpr std::array<JudgeDimension, 4> kAllDimensions = {
    JudgeDimension::Informativeness, JudgeDimension::Clarity, JudgeDimension::Plausibility,
    JudgeDimension::Faithfulness};

std::string_view to_string(JudgeDimension d);
std::optional<JudgeDimension> parse_dimension(std::string_view text);

/// items x judges ratings on a 1..5 scale for one dimension.
using RatingsGrid = std::vector<std::vector<int>>;

struct RatingsMatrix {
    std::map<JudgeDimension, RatingsGrid> grids;
};

enum class AgreementMode {
    PerItem,     // mean over items of 1 - S^2 / sigma_mv^2
    JudgeMeans,  // formula applied once to the judges' mean ratings
};

/// Maximum variance of a two-point split on a 1..5 scale: ((5 - 1) / 2)^2.
inline constexpr double kMaxLikertVariance = 4.0;

double agreement_rwg(const RatingsGrid& grid, AgreementMode mode = AgreementMode::PerItem);
std::map<JudgeDimension, double> agreement_rwg(const RatingsMatrix& ratings,
                                               AgreementMode mode = AgreementMode::PerItem);

}  // namespace memerl
