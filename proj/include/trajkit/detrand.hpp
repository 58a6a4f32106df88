// Copyright 2026 the trajkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace trajkit::detrand {

inline constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = kFnvOffset)
{
    std::uint64_t hash = seed;
    for (unsigned char c : data) {
        hash ^= c;
        hash *= kFnvPrime;
    }
    return hash;
}

/// Bounded draw via modulo. The slight modulo bias is irrelevant here; what
/// matters is that results are identical across platforms and runs.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n)
{
    return n == 0 ? 0 : rng() % n;
}

template <typename T>
void shuffle(std::vector<T>& items, std::mt19937_64& rng)
{
    for (std::size_t i = items.size(); i > 1; --i)
        std::swap(items[i - 1], items[bounded(rng, i)]);
}

/// First k elements of a deterministic permutation, order randomized.
template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> pool, std::size_t k, std::mt19937_64& rng)
{
    shuffle(pool, rng);
    if (k < pool.size())
        pool.resize(k);
    return pool;
}

} // namespace trajkit::detrand
