// Copyright 2026 the trajkit authors
// SPDX-License-Identifier: Apache-2.0

#include "trajkit/costmodel.hpp"

namespace trajkit::costmodel {

namespace {

void require_non_negative(double value, const char* what)
{
    if (value < 0.0)
        throw std::invalid_argument(std::string(what) + " must be non-negative");
}

} // namespace

CostBreakdown trajectory_cost(const TokenUsageProfile& profile, const PricingProfile& pricing)
{
    require_non_negative(profile.cached_tokens, "cached_tokens");
    require_non_negative(profile.new_input_tokens, "new_input_tokens");
    require_non_negative(profile.output_tokens, "output_tokens");
    require_non_negative(profile.issue_creation_cost, "issue_creation_cost");
    require_non_negative(profile.training_cost_per_trajectory, "training_cost_per_trajectory");
    require_non_negative(pricing.input_per_mtok, "input_per_mtok");
    require_non_negative(pricing.cached_per_mtok, "cached_per_mtok");
    require_non_negative(pricing.output_per_mtok, "output_per_mtok");
    require_non_negative(pricing.gpu_hours_per_trajectory, "gpu_hours_per_trajectory");
    require_non_negative(pricing.gpu_rate, "gpu_rate");

    CostBreakdown cost;
    if (pricing.self_hosted) {
        cost.inference_subtotal = pricing.gpu_hours_per_trajectory * pricing.gpu_rate;
    } else {
        cost.cached = profile.cached_tokens * pricing.cached_per_mtok / 1e6;
        cost.new_input = profile.new_input_tokens * pricing.input_per_mtok / 1e6;
        cost.output = profile.output_tokens * pricing.output_per_mtok / 1e6;
        cost.issue = profile.issue_creation_cost;
        cost.inference_subtotal = cost.cached + cost.new_input + cost.output + cost.issue;
    }
    cost.training = profile.training_cost_per_trajectory;
    cost.total = cost.inference_subtotal + cost.training;
    return cost;
}

double campaign_cost(std::size_t n, const CostBreakdown& per_trajectory)
{
    return static_cast<double>(n) * per_trajectory.total;
}

double cost_to_match(const scaling::ScalingFit& fit, double target_pct)
{
    return scaling::invert(fit, target_pct) * 1000.0;
}

PricingProfile pricing_from_json(const nlohmann::json& j)
{
    PricingProfile pricing;
    pricing.name = j.value("name", "");
    pricing.self_hosted = j.value("self_hosted", false);
    pricing.input_per_mtok = j.value("input_per_mtok", 0.0);
    pricing.cached_per_mtok = j.value("cached_per_mtok", 0.0);
    pricing.output_per_mtok = j.value("output_per_mtok", 0.0);
    pricing.gpu_hours_per_trajectory = j.value("gpu_hours_per_trajectory", 0.0);
    pricing.gpu_rate = j.value("gpu_rate", 0.0);
    return pricing;
}

TokenUsageProfile usage_from_json(const nlohmann::json& j)
{
    TokenUsageProfile usage;
    usage.cached_tokens = j.value("cached_tokens", 0.0);
    usage.new_input_tokens = j.value("new_input_tokens", 0.0);
    usage.output_tokens = j.value("output_tokens", 0.0);
    usage.api_calls = j.value("api_calls", 0.0);
    usage.issue_creation_cost = j.value("issue_creation_cost", 0.0);
    usage.training_cost_per_trajectory = j.value("training_cost_per_trajectory", 0.0);
    return usage;
}

} // namespace trajkit::costmodel
