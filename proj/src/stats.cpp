// Copyright 2026 the trajkit authors
// SPDX-License-Identifier: Apache-2.0

#include "trajkit/stats.hpp"

#include <cmath>
#include <limits>

namespace trajkit::stats {

Summary summarize(const SeedGroup& group)
{
    if (group.values.empty())
        throw std::invalid_argument("summarize: group '" + group.label + "' has no values");
    Summary summary;
    summary.n = group.values.size();
    for (double v : group.values) {
        if (v < 0.0 || v > 100.0)
            throw std::invalid_argument("summarize: value out of [0,100] in group '" + group.label
                                        + "'");
        summary.mean += v;
    }
    summary.mean /= static_cast<double>(summary.n);
    if (summary.n > 1) {
        double ss = 0.0;
        for (double v : group.values)
            ss += (v - summary.mean) * (v - summary.mean);
        summary.std = std::sqrt(ss / static_cast<double>(summary.n - 1));
    }
    return summary;
}

double snr(const SeedGroup& a, const SeedGroup& b)
{
    Summary sa = summarize(a);
    Summary sb = summarize(b);
    if (sa.n < 2 || sb.n < 2)
        throw std::invalid_argument("snr: both groups need at least 2 seeds");
    double diff = std::abs(sa.mean - sb.mean);
    if (diff == 0.0)
        return 0.0;
    double pooled = std::sqrt((sa.std * sa.std + sb.std * sb.std) / 2.0);
    if (pooled == 0.0)
        return std::numeric_limits<double>::infinity();
    return diff / pooled;
}

std::string_view tier_name(ConfidenceTier tier)
{
    switch (tier) {
    case ConfidenceTier::Low: return "low";
    case ConfidenceTier::Borderline: return "borderline";
    case ConfidenceTier::Real: return "real";
    }
    return "low";
}

ConfidenceTier confidence_tier(double snr_value)
{
    if (snr_value < 0.0)
        throw std::invalid_argument("confidence_tier: snr must be non-negative");
    if (snr_value < 1.0)
        return ConfidenceTier::Low;
    if (snr_value <= 2.0)
        return ConfidenceTier::Borderline;
    return ConfidenceTier::Real;
}

std::size_t seeds_required(double effect_pct, double std_pct, int pooling_factor)
{
    if (effect_pct <= 0.0)
        throw std::invalid_argument("seeds_required: effect must be positive");
    if (std_pct <= 0.0)
        throw std::invalid_argument("seeds_required: std must be positive");
    if (pooling_factor != 4 && pooling_factor != 8)
        throw std::invalid_argument("seeds_required: pooling_factor must be 4 or 8");
    double n = static_cast<double>(pooling_factor) * std_pct * std_pct / (effect_pct * effect_pct);
    auto needed = static_cast<std::size_t>(std::ceil(n - 1e-12));
    return std::max<std::size_t>(needed, 2);
}

} // namespace trajkit::stats
