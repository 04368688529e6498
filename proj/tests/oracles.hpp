// Independent reference implementations used only by tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "memerl/label.hpp"
#include "memerl/policy.hpp"

namespace oracle {

struct MeteorResult {
    std::size_t matches = 0;
    std::size_t chunks = 0;
    double score = 0.0;
};

inline std::size_t count_chunks(const std::vector<int>& align) {
    std::size_t chunks = 0;
    int prev_ref = -2;
    bool prev_matched = false;
    for (int r : align) {
        if (r < 0) {
            prev_matched = false;
            continue;
        }
        if (!(prev_matched && r == prev_ref + 1)) ++chunks;
        prev_ref = r;
        prev_matched = true;
    }
    return chunks;
}

/// Enumerates every one-to-one alignment of equal tokens; keeps the most matches, then the
/// fewest chunks. Score = Fmean * (1 - 0.5 (chunks/m)^3) with Fmean = 10PR / (R + 9P).
namespace detail {

struct AlignmentSearch {
    std::vector<int> cand, ref, align;
    std::vector<char> used;
    MeteorResult best;
    bool have = false;

    void run(std::size_t i, std::size_t m) {
        if (i == cand.size()) {
            const std::size_t ch = count_chunks(align);
            if (!have || m > best.matches || (m == best.matches && ch < best.chunks)) {
                best.matches = m;
                best.chunks = ch;
                have = true;
            }
            return;
        }
        align[i] = -1;
        run(i + 1, m);
        for (std::size_t j = 0; j < ref.size(); ++j) {
            if (used[j] || ref[j] != cand[i]) continue;
            used[j] = 1;
            align[i] = static_cast<int>(j);
            run(i + 1, m + 1);
            used[j] = 0;
            align[i] = -1;
        }
    }
};

}  // namespace detail

inline MeteorResult meteor(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
    // intern tokens so the search compares integers
    std::vector<std::string> seen;
    const auto id = [&](const std::string& t) {
        const auto it = std::find(seen.begin(), seen.end(), t);
        if (it != seen.end()) return static_cast<int>(it - seen.begin());
        seen.push_back(t);
        return static_cast<int>(seen.size() - 1);
    };
    detail::AlignmentSearch search;
    for (const auto& t : cand) search.cand.push_back(id(t));
    for (const auto& t : ref) search.ref.push_back(id(t));
    search.align.assign(cand.size(), -1);
    search.used.assign(ref.size(), 0);
    search.run(0, 0);
    MeteorResult best = search.best;
    if (best.matches == 0) return best;
    const double P = double(best.matches) / double(cand.size());
    const double R = double(best.matches) / double(ref.size());
    const double fmean = 10.0 * P * R / (R + 9.0 * P);
    const double frag = double(best.chunks) / double(best.matches);
    best.score = fmean * (1.0 - 0.5 * frag * frag * frag);
    return best;
}

/// Calls fn(candidate, reference) once for every pair of token sequences with lengths in
/// [1, max_len] over an alphabet of `alphabet` symbols, up to renaming of the symbols.
/// METEOR only sees which tokens are equal, so this covers every pair.
inline void for_each_pair_up_to_renaming(
    std::size_t max_len, int alphabet,
    const std::function<void(const std::vector<std::string>&, const std::vector<std::string>&)>& fn) {
    static const char* names[] = {"a", "b", "c", "d", "e", "f", "g", "h"};
    std::vector<int> seq;
    std::vector<std::string> cand, ref;
    for (std::size_t la = 1; la <= max_len; ++la) {
        for (std::size_t lb = 1; lb <= max_len; ++lb) {
            const std::size_t n = la + lb;
            seq.assign(n, 0);
            // restricted growth strings: seq[i] <= 1 + max(seq[<i]), capped by the alphabet
            std::function<void(std::size_t, int)> rec = [&](std::size_t i, int top) {
                if (i == n) {
                    cand.clear();
                    ref.clear();
                    for (std::size_t k = 0; k < n; ++k) (k < la ? cand : ref).push_back(names[seq[k]]);
                    fn(cand, ref);
                    return;
                }
                for (int v = 0; v <= std::min(top + 1, alphabet - 1); ++v) {
                    seq[i] = v;
                    rec(i + 1, std::max(top, v));
                }
            };
            rec(0, -1);
        }
    }
}

struct ClassScores {
    double accuracy = 0, macro_f1 = 0, weighted_f1 = 0;
    double p[2]{}, r[2]{}, f1[2]{};
};

/// Counts true/false positives per class directly from the pairs; nullopt never matches.
inline ClassScores classification(const std::vector<std::optional<memerl::Label>>& pred,
                                  const std::vector<memerl::Label>& gold) {
    ClassScores s;
    const memerl::Label classes[2] = {memerl::Label::Hateful, memerl::Label::NonHateful};
    std::size_t correct = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) correct += pred[i] && *pred[i] == gold[i];
    s.accuracy = gold.empty() ? 0 : double(correct) / double(gold.size());
    for (int c = 0; c < 2; ++c) {
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < gold.size(); ++i) {
            const bool is_pred = pred[i] && *pred[i] == classes[c];
            const bool is_gold = gold[i] == classes[c];
            tp += is_pred && is_gold;
            fp += is_pred && !is_gold;
            fn += !is_pred && is_gold;
        }
        s.p[c] = tp + fp > 0 ? tp / (tp + fp) : 0;
        s.r[c] = tp + fn > 0 ? tp / (tp + fn) : 0;
        s.f1[c] = s.p[c] + s.r[c] > 0 ? 2 * s.p[c] * s.r[c] / (s.p[c] + s.r[c]) : 0;
        s.macro_f1 += s.f1[c] / 2;
        s.weighted_f1 += gold.empty() ? 0 : s.f1[c] * (tp + fn) / double(gold.size());
    }
    return s;
}

/// Central differences with step h over every coordinate of `theta`.
inline Eigen::VectorXd finite_difference(const std::function<double()>& f, Eigen::Ref<Eigen::VectorXd> theta,
                                         double h = 1e-5) {
    Eigen::VectorXd g(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double x = theta(i);
        theta(i) = x + h;
        const double up = f();
        theta(i) = x - h;
        const double down = f();
        theta(i) = x;
        g(i) = (up - down) / (2 * h);
    }
    return g;
}

/// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double scale = std::max(a.norm(), b.norm());
    return scale == 0 ? 0 : (a - b).norm() / scale;
}

}  // namespace oracle
