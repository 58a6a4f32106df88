// Copyright 2026 the trajkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "trajkit/scaling.hpp"

namespace trajkit::costmodel {

/// API pricing (per million tokens) or a self-hosted GPU rate.
struct PricingProfile {
    std::string name;
    bool self_hosted = false;
    // API regime
    double input_per_mtok = 0.0;
    double cached_per_mtok = 0.0;
    double output_per_mtok = 0.0;
    // self-hosted regime
    double gpu_hours_per_trajectory = 0.0;
    double gpu_rate = 0.0; // dollars per GPU-hour
};

/// Average token consumption of one trajectory.
struct TokenUsageProfile {
    double cached_tokens = 0.0;
    double new_input_tokens = 0.0;
    double output_tokens = 0.0;
    double api_calls = 0.0;
    double issue_creation_cost = 0.0;        // dollars; 0 when absent
    double training_cost_per_trajectory = 0.0; // dollars
};

struct CostBreakdown {
    double cached = 0.0;
    double new_input = 0.0;
    double output = 0.0;
    double issue = 0.0;
    double inference_subtotal = 0.0;
    double training = 0.0;
    double total = 0.0;
};

/// Per-trajectory cost. API regime prices each token class; the self-hosted
/// regime charges gpu_hours_per_trajectory * gpu_rate instead.
CostBreakdown trajectory_cost(const TokenUsageProfile& profile, const PricingProfile& pricing);

/// n * per_trajectory.total.
double campaign_cost(std::size_t n, const CostBreakdown& per_trajectory);

/// Dollars needed to reach target_pct under the fitted scaling law
/// (fit costs are in thousands of dollars).
double cost_to_match(const scaling::ScalingFit& fit, double target_pct);

PricingProfile pricing_from_json(const nlohmann::json& j);
TokenUsageProfile usage_from_json(const nlohmann::json& j);

} // namespace trajkit::costmodel
