// Copyright 2026 the trajkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace trajkit::stats {

/// One experiment condition: one value per evaluation seed, in percent.
struct SeedGroup {
    std::string label;
    std::vector<double> values;
};

struct Summary {
    double mean = 0.0;
    double std = 0.0; // sample standard deviation (n-1); 0 when n == 1
    std::size_t n = 0;
};

Summary summarize(const SeedGroup& group);

/// |mean(a) - mean(b)| / sqrt((std(a)^2 + std(b)^2) / 2). Returns 0 when the
/// means are equal and +inf when both stds are 0 but the means differ.
double snr(const SeedGroup& a, const SeedGroup& b);

enum class ConfidenceTier { Low, Borderline, Real };

std::string_view tier_name(ConfidenceTier tier);

/// low for snr < 1, borderline for 1 <= snr <= 2, real for snr > 2.
ConfidenceTier confidence_tier(double snr_value);

/// ceil(pooling_factor * std^2 / effect^2), floored at 2. pooling_factor 4
/// is the single-mean rule n = (2*std/effect)^2; 8 models a two-group mean
/// difference.
std::size_t seeds_required(double effect_pct, double std_pct, int pooling_factor = 8);

} // namespace trajkit::stats
