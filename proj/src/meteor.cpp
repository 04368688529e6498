#include <algorithm>
#include <cstdint>
#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "memerl/metrics.hpp"
#include "memerl/util.hpp"

namespace memerl {

std::string simple_stem(std::string_view word) {
    std::string w(word);
    auto strip = [&w](std::string_view suffix, std::size_t min_stem) {
        if (w.size() >= suffix.size() + min_stem && w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0) {
            w.erase(w.size() - suffix.size());
            return true;
        }
        return false;
    };
    if (strip("ies", 2)) {
        w += 'y';
        return w;
    }
    for (std::string_view s : {"ingly", "edly", "ing", "ed", "ly", "es", "s"}) {
        if (s == "s" && w.size() >= 2 && w[w.size() - 2] == 's') continue;  // "glass"
        if (strip(s, 3)) break;
    }
    return w;
}

std::vector<std::string> meteor_tokens(std::string_view text, bool use_stemming) {
    auto tokens = split_whitespace(to_lower(text));
    if (use_stemming)
        for (auto& t : tokens) t = simple_stem(t);
    return tokens;
}

namespace {

std::size_t count_chunks(const std::vector<int>& alignment) {
    std::size_t chunks = 0;
    for (std::size_t i = 0; i < alignment.size(); ++i) {
        if (alignment[i] < 0) continue;
        const bool continues = i > 0 && alignment[i - 1] >= 0 && alignment[i - 1] + 1 == alignment[i];
        if (!continues) ++chunks;
    }
    return chunks;
}

// Open-addressing map from packed 64-bit states; all-ones marks an empty slot.
class FlatMemo {
public:
    FlatMemo() : keys_(16, kEmpty), values_(16, 0) {}

    std::size_t size() const { return size_; }

    const int* find(std::uint64_t key) const {
        for (std::size_t s = slot(key);; s = (s + 1) & (keys_.size() - 1)) {
            if (keys_[s] == key) return &values_[s];
            if (keys_[s] == kEmpty) return nullptr;
        }
    }

    void insert(std::uint64_t key, int value) {
        if (2 * (size_ + 1) > keys_.size()) grow();
        std::size_t s = slot(key);
        while (keys_[s] != kEmpty && keys_[s] != key) s = (s + 1) & (keys_.size() - 1);
        if (keys_[s] == kEmpty) ++size_;
        keys_[s] = key;
        values_[s] = value;
    }

private:
    static constexpr std::uint64_t kEmpty = ~std::uint64_t{0};

    std::size_t slot(std::uint64_t key) const {
        return static_cast<std::size_t>((key * 0x9e3779b97f4a7c15ull) >> 20) & (keys_.size() - 1);
    }

    void grow() {
        std::vector<std::uint64_t> keys(keys_.size() * 2, kEmpty);
        std::vector<int> values(keys.size(), 0);
        keys.swap(keys_);
        values.swap(values_);
        size_ = 0;
        for (std::size_t s = 0; s < keys.size(); ++s)
            if (keys[s] != kEmpty) insert(keys[s], values[s]);
    }

    std::vector<std::uint64_t> keys_;
    std::vector<int> values_;
    std::size_t size_ = 0;
};

// Exact search for the maximum-match alignment with the most adjacent links (fewest chunks).
// State: candidate position, previous alignment, and the used set of reference positions whose
// word type leaves a choice. Memoized; bails out when the state budget is exhausted.
class AlignmentSearch {
public:
    AlignmentSearch(const std::vector<std::string>& cand, const std::vector<std::string>& ref)
        : cand_(cand), ref_(ref) {
        // short inputs intern by linear scan; longer ones through a hash map
        const bool small = cand.size() + ref.size() <= 32;
        std::vector<const std::string*> small_ids;
        std::unordered_map<std::string, int> type_ids;
        auto type_of = [&](const std::string& w) {
            if (small) {
                for (std::size_t t = 0; t < small_ids.size(); ++t)
                    if (*small_ids[t] == w) return static_cast<int>(t);
                small_ids.push_back(&w);
                return static_cast<int>(small_ids.size() - 1);
            }
            auto [it, inserted] = type_ids.emplace(w, static_cast<int>(type_ids.size()));
            return it->second;
        };
        cand_type_.reserve(cand.size());
        for (const auto& w : cand) cand_type_.push_back(type_of(w));
        ref_type_.reserve(ref.size());
        for (const auto& w : ref) ref_type_.push_back(type_of(w));

        const std::size_t n_types = small ? small_ids.size() : type_ids.size();
        ref_positions_.resize(n_types);
        for (std::size_t j = 0; j < ref.size(); ++j) ref_positions_[ref_type_[j]].push_back(static_cast<int>(j));
        cand_count_.assign(n_types, 0);
        for (int t : cand_type_) ++cand_count_[t];

        // Remaining occurrences of each candidate token's type at and after position i.
        remaining_.assign(cand.size(), 0);
        std::vector<int> seen(n_types, 0);
        for (std::size_t i = cand.size(); i-- > 0;) remaining_[i] = ++seen[cand_type_[i]];

        // Reference positions where the choice of partner is not forced get a bit in the state.
        bit_of_.assign(ref.size(), -1);
        for (std::size_t j = 0; j < ref.size(); ++j) {
            const int t = ref_type_[j];
            if (cand_count_[t] >= 2 || ref_positions_[t].size() >= 2) bit_of_[j] = n_bits_++;
        }
        used_.assign(ref.size(), false);
        used_per_type_.assign(n_types, 0);
        options_.resize(cand.size());
        compact_ = n_bits_ <= 40 && cand.size() < (1u << 12) && ref.size() < (1u << 12) - 1;
    }

    bool solve(std::size_t budget, std::vector<int>& alignment) {
        budget_ = budget;
        alignment.assign(cand_.size(), -1);
        try {
            best(0, -1);
        } catch (const BudgetExceeded&) {
            return false;
        }
        // Reconstruct the preferred optimum.
        int prev = -1;
        for (std::size_t i = 0; i < cand_.size(); ++i) {
            const int target = best(i, prev);
            bool chosen = false;
            for (int j : options(i)) {
                const int gain = (j >= 0 && prev >= 0 && j == prev + 1) ? 1 : 0;
                apply(i, j);
                const bool ok = gain + best(i + 1, j) == target;
                if (ok) {
                    alignment[i] = j;
                    prev = j;
                    chosen = true;
                    break;
                }
                undo(i, j);
            }
            if (!chosen) return false;  // unreachable: some option attains the optimum
        }
        return true;
    }

private:
    struct BudgetExceeded {};

    // Options at candidate position i: unused same-type reference positions ascending, then -1 (skip).
    // Each depth owns its buffer, so deeper calls never clobber a list being iterated.
    const std::vector<int>& options(std::size_t i) {
        auto& out = options_[i];
        out.clear();
        const int t = cand_type_[i];
        const auto& positions = ref_positions_[t];
        const int free_slots = static_cast<int>(positions.size()) - used_per_type_[t];
        if (free_slots > 0)
            for (int j : positions)
                if (!used_[j]) out.push_back(j);
        // Skipping keeps the matching maximum only if later occurrences can still fill every free slot.
        if (remaining_[i] - 1 >= free_slots) out.push_back(-1);
        return out;
    }

    void apply(std::size_t i, int j) {
        if (j < 0) return;
        used_[j] = true;
        if (bit_of_[j] >= 0 && bit_of_[j] < 64) state_bits_ |= std::uint64_t{1} << bit_of_[j];
        ++used_per_type_[cand_type_[i]];
    }
    void undo(std::size_t i, int j) {
        if (j < 0) return;
        used_[j] = false;
        if (bit_of_[j] >= 0 && bit_of_[j] < 64) state_bits_ &= ~(std::uint64_t{1} << bit_of_[j]);
        --used_per_type_[cand_type_[i]];
    }

    // Packs (i, prev, state bits) into 64 bits when they fit.
    std::uint64_t compact_key(std::size_t i, int prev) const {
        return (static_cast<std::uint64_t>(i) << 52) | (static_cast<std::uint64_t>(prev + 1) << 40) | state_bits_;
    }

    std::string key(std::size_t i, int prev) const {
        std::string k;
        k.reserve(8 + (n_bits_ + 7) / 8);
        const auto a = static_cast<std::uint32_t>(i);
        const auto b = static_cast<std::uint32_t>(prev + 1);
        k.append(reinterpret_cast<const char*>(&a), sizeof a);
        k.append(reinterpret_cast<const char*>(&b), sizeof b);
        std::string bits((n_bits_ + 7) / 8, '\0');
        for (std::size_t j = 0; j < used_.size(); ++j)
            if (used_[j] && bit_of_[j] >= 0) bits[bit_of_[j] / 8] |= static_cast<char>(1 << (bit_of_[j] % 8));
        k += bits;
        return k;
    }

    int best(std::size_t i, int prev) {
        if (i == cand_.size()) return 0;
        std::uint64_t k64 = 0;
        std::string k;
        if (compact_) {
            k64 = compact_key(i, prev);
            if (const int* v = memo64_.find(k64)) return *v;
            if (memo64_.size() >= budget_) throw BudgetExceeded{};
        } else {
            k = key(i, prev);
            if (auto it = memo_.find(k); it != memo_.end()) return it->second;
            if (memo_.size() >= budget_) throw BudgetExceeded{};
        }
        int value = -1;
        for (int j : options(i)) {
            const int gain = (j >= 0 && prev >= 0 && j == prev + 1) ? 1 : 0;
            apply(i, j);
            value = std::max(value, gain + best(i + 1, j));
            undo(i, j);
        }
        if (compact_) memo64_.insert(k64, value);
        else memo_.emplace(std::move(k), value);
        return value;
    }

    const std::vector<std::string>& cand_;
    const std::vector<std::string>& ref_;
    std::vector<int> cand_type_, ref_type_;
    std::vector<std::vector<int>> ref_positions_;
    std::vector<int> cand_count_;
    std::vector<int> remaining_;
    std::vector<int> bit_of_;
    int n_bits_ = 0;
    std::vector<bool> used_;
    std::vector<int> used_per_type_;
    bool compact_ = false;
    std::uint64_t state_bits_ = 0;
    std::vector<std::vector<int>> options_;
    FlatMemo memo64_;
    std::unordered_map<std::string, int> memo_;
    std::size_t budget_ = 0;
};

// Maximum matching built left to right, preferring to extend the current chunk.
std::vector<int> greedy_alignment(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
    std::vector<int> alignment(cand.size(), -1);
    std::vector<bool> used(ref.size(), false);
    int prev = -1;
    for (std::size_t i = 0; i < cand.size(); ++i) {
        int pick = -1;
        if (prev >= 0 && static_cast<std::size_t>(prev + 1) < ref.size() && !used[prev + 1] && ref[prev + 1] == cand[i])
            pick = prev + 1;
        for (std::size_t j = 0; pick < 0 && j < ref.size(); ++j)
            if (!used[j] && ref[j] == cand[i]) pick = static_cast<int>(j);
        if (pick >= 0) used[pick] = true;
        alignment[i] = pick;
        prev = pick;
    }
    return alignment;
}

constexpr std::size_t kSearchBudget = 400000;

}  // namespace

MeteorAlignment meteor_align(const std::vector<std::string>& candidate, const std::vector<std::string>& reference) {
    MeteorAlignment out;
    out.candidate_len = candidate.size();
    out.reference_len = reference.size();
    AlignmentSearch search(candidate, reference);
    if (!search.solve(kSearchBudget, out.alignment)) {
        out.alignment = greedy_alignment(candidate, reference);
        out.exact = false;
    }
    out.matches = static_cast<std::size_t>(
        std::count_if(out.alignment.begin(), out.alignment.end(), [](int j) { return j >= 0; }));
    out.chunks = count_chunks(out.alignment);
    return out;
}

double meteor_from_counts(std::size_t matches, std::size_t chunks, std::size_t candidate_len,
                          std::size_t reference_len, const MeteorOptions& opts) {
    if (matches == 0) return 0.0;
    const double m = static_cast<double>(matches);
    const double precision = m / static_cast<double>(candidate_len);
    const double recall = m / static_cast<double>(reference_len);
    const double w = opts.fmean_recall_weight;
    const double fmean = (1.0 + w) * precision * recall / (recall + w * precision);
    const double penalty = opts.penalty_gamma * std::pow(static_cast<double>(chunks) / m, opts.penalty_beta);
    return fmean * (1.0 - penalty);
}

double meteor(std::string_view candidate, std::string_view reference, const MeteorOptions& opts) {
    const auto cand = meteor_tokens(candidate, opts.use_stemming);
    const auto ref = meteor_tokens(reference, opts.use_stemming);
    const auto a = meteor_align(cand, ref);
    return meteor_from_counts(a.matches, a.chunks, a.candidate_len, a.reference_len, opts);
}

}  // namespace memerl
