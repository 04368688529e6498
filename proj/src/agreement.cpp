#include <numeric>

#include "memerl/errors.hpp"
#include "memerl/metrics.hpp"
#include "memerl/util.hpp"

namespace memerl {

std::string_view to_string(JudgeDimension d) {
    switch (d) {
        case JudgeDimension::Informativeness: return "informativeness";
        case JudgeDimension::Clarity: return "clarity";
        case JudgeDimension::Plausibility: return "plausibility";
        case JudgeDimension::Faithfulness: return "faithfulness";
    }
    return "";
}

std::optional<JudgeDimension> parse_dimension(std::string_view text) {
    const std::string lower = to_lower(trim(text));
    for (auto d : kAllDimensions)
        if (to_string(d) == lower) return d;
    return std::nullopt;
}

namespace {

// Population variance: divides by the number of judges.
double population_variance(const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return ss / n;
}

}  // namespace

double agreement_rwg(const RatingsGrid& grid, AgreementMode mode) {
    if (grid.empty()) throw InsufficientJudges("no rated items");
    const std::size_t judges = grid.front().size();
    for (const auto& row : grid) {
        if (row.size() < 2) throw InsufficientJudges("agreement needs at least two judges per item");
        if (row.size() != judges) throw InsufficientJudges("every item must be rated by the same judges");
        for (int v : row)
            if (v < 1 || v > 5) throw InvalidConfig(strprintf("rating %d outside the 1..5 scale", v));
    }

    if (mode == AgreementMode::PerItem) {
        double sum = 0.0;
        for (const auto& row : grid) {
            std::vector<double> xs(row.begin(), row.end());
            sum += 1.0 - population_variance(xs) / kMaxLikertVariance;
        }
        return sum / static_cast<double>(grid.size());
    }

    std::vector<double> judge_means(judges, 0.0);
    for (const auto& row : grid)
        for (std::size_t j = 0; j < judges; ++j) judge_means[j] += row[j];
    for (auto& m : judge_means) m /= static_cast<double>(grid.size());
    return 1.0 - population_variance(judge_means) / kMaxLikertVariance;
}

std::map<JudgeDimension, double> agreement_rwg(const RatingsMatrix& ratings, AgreementMode mode) {
    std::map<JudgeDimension, double> out;
    for (const auto& [dim, grid] : ratings.grids) out[dim] = agreement_rwg(grid, mode);
    return out;
}

}  // namespace memerl
