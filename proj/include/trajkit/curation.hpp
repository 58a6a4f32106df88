// Copyright 2026 the trajkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trajkit/trajectory.hpp"

namespace trajkit::curation {

using trajectory::TokenCounter;
using trajectory::Trajectory;

/// Keeps records whose patch changes at most `max_lines` lines. Records
/// must carry a patch.
std::vector<Trajectory> filter_patch_lines(const std::vector<Trajectory>& records,
                                           std::size_t max_lines = 40);

/// Keeps records whose mean tool-output size is at most `max_mean_tokens`.
/// Records without tool steps always pass.
std::vector<Trajectory> filter_tool_output(const std::vector<Trajectory>& records,
                                           double max_mean_tokens, const TokenCounter& counter);

/// Descending truncation ratio; ties broken by id.
std::vector<Trajectory> order_by_truncation_ratio(const std::vector<Trajectory>& records,
                                                  std::size_t limit, const TokenCounter& counter);

/// Consecutive chunks of exactly `size` from an already-ordered input; a
/// short trailing chunk is dropped.
std::vector<std::vector<Trajectory>> partition_fixed(const std::vector<Trajectory>& ordered,
                                                     std::size_t size = 3000);

enum class SelectionStop { Exhausted, TargetReached, RatioFloor };

struct SelectionResult {
    std::vector<Trajectory> records; // over-long records arrive truncated
    SelectionStop stop = SelectionStop::Exhausted;
};

/// Fully fitting records first, then truncated records in descending ratio
/// order; stops at `target` records or when the next ratio would drop below
/// `min_ratio`, whichever binds first.
SelectionResult select_ordered_truncated(const std::vector<Trajectory>& records, std::size_t limit,
                                         const TokenCounter& counter, double min_ratio = 0.88,
                                         std::size_t target = SIZE_MAX);

struct DatasetSource {
    std::string label;
    std::vector<Trajectory> records;
};

struct MixShare {
    std::string label;
    double proportion = 0.0;
};

struct DatasetSpec {
    std::vector<DatasetSource> sources;
    std::vector<MixShare> mix; // proportions must sum to 1 (±1e-9)
    std::size_t target_size = 0;
    std::uint64_t seed = 0;
};

class InsufficientSourceError : public std::runtime_error {
public:
    InsufficientSourceError(const std::string& label, std::size_t need, std::size_t have)
        : std::runtime_error("source '" + label + "' has " + std::to_string(have)
                             + " records but the mix needs " + std::to_string(need))
    {
    }
};

/// Seeded sample of floor(p*target) records per source without replacement;
/// rounding remainder goes to the largest share; output shuffled by seed.
std::vector<Trajectory> mix(const DatasetSpec& spec);

/// First occurrence kept per patches_identical equivalence class.
std::vector<Trajectory> dedup_by_patch(const std::vector<Trajectory>& records);

} // namespace trajkit::curation
