// Copyright 2026 the trajkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

namespace trajkit::scaling {

/// One (cost, performance) observation. Cost is in thousands of dollars,
/// performance in percent.
struct CostPerfPoint {
    double cost_kusd = 0.0;
    double resolve_pct = 0.0;
    std::optional<double> std_pct;
    int n_seeds = 1;
};

/// Parameters of y = c - a * x^(-b) plus fit diagnostics.
struct ScalingFit {
    double asymptote_pct = 0.0;   // c
    double coefficient = 0.0;     // a
    double exponent = 0.0;        // b
    double r_squared = 0.0;
    double mean_abs_error = 0.0;
    double residual_sum = 0.0;
    bool ridge_guarded = false;   // asymptote selected by the 1-SE rule
};

class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TargetExceedsAsymptoteError : public std::runtime_error {
public:
    TargetExceedsAsymptoteError(double target, double asymptote)
        : std::runtime_error("target " + std::to_string(target)
                             + "% exceeds the fitted asymptote " + std::to_string(asymptote) + "%")
    {
    }
};

struct FitOptions {
    double b_min = 0.01;
    double b_max = 3.0;
    int grid_size = 2000;          // dense grid over [b_min, b_max]
    bool weight_by_variance = false; // 1/std^2 weights when stds are present
    double asymptote_cap = 100.0;  // percent-domain ceiling for c
};

/// Least squares for y = c - a*x^(-b): closed-form (c, a) per candidate b,
/// b from a dense grid plus golden-section refinement. When the data is too
/// close to log-linear to identify the asymptote (the unconstrained optimum
/// has c above `asymptote_cap`), b is instead chosen by the one-standard-
/// error rule on closed-form leave-one-out error: the largest b, hence the
/// most conservative asymptote, whose LOO error is within one standard
/// error of the minimum.
ScalingFit fit_power_law(const std::vector<CostPerfPoint>& points, const FitOptions& options = {});

/// c - a*x^(-b), clamped to [0, 100]. x must be positive.
double predict(const ScalingFit& fit, double cost_kusd);

/// Exact inverse of predict on (0, c): (a / (c - y))^(1/b).
double invert(const ScalingFit& fit, double target_pct);

} // namespace trajkit::scaling
