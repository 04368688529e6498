#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "memerl/policy.hpp"
#include "memerl/util.hpp"

namespace testing_support {

/// Small policy with random weights: 13-token vocabulary, 8 position buckets, 2 watch words.
inline memerl::ToyPolicy random_policy(std::uint64_t seed, double scale = 0.7, std::vector<memerl::TokenId> prefix = {}) {
    memerl::Vocabulary vocab({"a", "b", "c", "d", "zorb", "krell"});
    memerl::FeatureSpec spec{8, 2, {"zorb", "krell"}};
    memerl::ToyPolicy p(vocab, spec, std::move(prefix));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, scale);
    for (Eigen::Index i = 0; i < p.parameters().size(); ++i) p.parameters()(i) = n(rng);
    return p;
}

inline std::vector<memerl::TokenId> random_tokens(std::mt19937_64& rng, std::size_t vocab, std::size_t len) {
    std::vector<memerl::TokenId> out(len);
    for (auto& t : out) t = static_cast<memerl::TokenId>(rng() % vocab);
    return out;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("memerl_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing_support
