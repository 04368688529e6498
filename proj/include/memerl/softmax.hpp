#pragma once

// Scalar-generic categorical helpers over Eigen dense expressions.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "memerl/errors.hpp"

namespace memerl {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Derived>
Vec<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& scores) {
    using Scalar = typename Derived::Scalar;
    const Scalar max = scores.maxCoeff();
    Vec<Scalar> p = (scores.array() - max).exp().matrix();
    p /= p.sum();
    return p;
}

template <typename Derived>
Vec<typename Derived::Scalar> log_softmax(const Eigen::MatrixBase<Derived>& scores) {
    using Scalar = typename Derived::Scalar;
    const Scalar max = scores.maxCoeff();
    const Scalar lse = max + std::log((scores.array() - max).exp().sum());
    return (scores.array() - lse).matrix();
}

/// Exact categorical KL(p || q) = sum p ln(p / q). Zero-probability entries of p contribute nothing.
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar kl_divergence(const Eigen::MatrixBase<DerivedP>& p, const Eigen::MatrixBase<DerivedQ>& q) {
    using Scalar = typename DerivedP::Scalar;
    if (p.size() != q.size()) throw SupportMismatch("distributions have different sizes");
    Scalar kl(0);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p(i) <= Scalar(0)) continue;
        if (q(i) <= Scalar(0)) throw SupportMismatch("q is zero where p is positive");
        kl += p(i) * std::log(p(i) / q(i));
    }
    return std::max(kl, Scalar(0));
}

/// KL computed from log-probabilities; avoids the log of tiny probabilities.
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar kl_from_logits(const Eigen::MatrixBase<DerivedP>& logp, const Eigen::MatrixBase<DerivedQ>& logq) {
    using Scalar = typename DerivedP::Scalar;
    return std::max(Scalar(0), (logp.array().exp() * (logp - logq).array()).sum());
}

/// Smallest set of highest-probability entries whose mass reaches top_p. Ties break by index.
template <typename Derived>
std::vector<bool> nucleus_mask(const Eigen::MatrixBase<Derived>& probs, double top_p) {
    const auto n = static_cast<std::size_t>(probs.size());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return probs(static_cast<Eigen::Index>(a)) > probs(static_cast<Eigen::Index>(b));
    });
    std::vector<bool> keep(n, false);
    double mass = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        keep[order[k]] = true;
        mass += static_cast<double>(probs(static_cast<Eigen::Index>(order[k])));
        if (mass >= top_p - 1e-12) break;
    }
    return keep;
}

}  // namespace memerl
