// Copyright 2026 the trajkit authors
// SPDX-License-Identifier: Apache-2.0

#include "trajkit/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace trajkit::scaling {

namespace {

struct Design {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> w; // all 1 when unweighted
};

struct LinearSolution {
    double c = 0.0;
    double a = 0.0;
    double sse = 0.0; // unweighted, for diagnostics
    double objective = 0.0; // weighted when weights in use
};

// Exact least squares in (c, a) for fixed b: y ~ c - a * x^(-b).
LinearSolution solve_ca(const Design& d, double b)
{
    const std::size_t n = d.x.size();
    double sw = 0.0, su = 0.0, sy = 0.0, suu = 0.0, suy = 0.0;
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = std::pow(d.x[i], -b);
        sw += d.w[i];
        su += d.w[i] * u[i];
        sy += d.w[i] * d.y[i];
        suu += d.w[i] * u[i] * u[i];
        suy += d.w[i] * u[i] * d.y[i];
    }
    const double ubar = su / sw;
    const double ybar = sy / sw;
    double cov_uy = 0.0, var_u = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cov_uy += d.w[i] * (d.y[i] - ybar) * u[i];
        var_u += d.w[i] * (u[i] - ubar) * u[i];
    }
    LinearSolution sol;
    if (var_u == 0.0) {
        sol.c = ybar;
        sol.a = 0.0;
    } else {
        sol.a = -cov_uy / var_u;
        sol.c = ybar + sol.a * ubar;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double e = d.y[i] - (sol.c - sol.a * u[i]);
        sol.sse += e * e;
        sol.objective += d.w[i] * e * e;
    }
    return sol;
}

template <typename F>
double golden_section_min(F f, double lo, double hi, double tol = 1e-11)
{
    static const double kGolden = (std::sqrt(5.0) - 1.0) / 2.0;
    double c1 = hi - kGolden * (hi - lo);
    double c2 = lo + kGolden * (hi - lo);
    double f1 = f(c1);
    double f2 = f(c2);
    int guard = 0;
    while (hi - lo > tol && ++guard < 300) {
        if (f1 < f2) {
            hi = c2;
            c2 = c1;
            f2 = f1;
            c1 = hi - kGolden * (hi - lo);
            f1 = f(c1);
        } else {
            lo = c1;
            c1 = c2;
            f1 = f2;
            c2 = lo + kGolden * (hi - lo);
            f2 = f(c2);
        }
    }
    return 0.5 * (lo + hi);
}

// Sum of squared leave-one-out residuals for fixed b, via the hat matrix of
// the 2-parameter linear model. Also reports the per-point squared values.
double press_for_b(const Design& d, double b, std::vector<double>* squares = nullptr)
{
    const std::size_t n = d.x.size();
    double s00 = 0.0, s01 = 0.0, s11 = 0.0;
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = std::pow(d.x[i], -b);
        s00 += d.w[i];
        s01 += d.w[i] * -u[i];
        s11 += d.w[i] * u[i] * u[i];
    }
    const double det = s00 * s11 - s01 * s01;
    if (det <= 0.0 || !std::isfinite(det))
        return std::numeric_limits<double>::infinity();
    const double i00 = s11 / det, i01 = -s01 / det, i11 = s00 / det;

    LinearSolution sol = solve_ca(d, b);
    double press = 0.0;
    if (squares)
        squares->assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double h = d.w[i] * (i00 + 2.0 * i01 * -u[i] + i11 * u[i] * u[i]);
        const double e = d.y[i] - (sol.c - sol.a * u[i]);
        if (h >= 1.0)
            return std::numeric_limits<double>::infinity();
        const double loo = e / (1.0 - h);
        press += loo * loo;
        if (squares)
            (*squares)[i] = loo * loo;
    }
    return press;
}

} // namespace

ScalingFit fit_power_law(const std::vector<CostPerfPoint>& points, const FitOptions& options)
{
    if (points.size() < 4)
        throw FitError("fit requires at least 4 points, got " + std::to_string(points.size()));
    if (options.b_min <= 0.0 || options.b_max <= options.b_min)
        throw FitError("invalid exponent range");
    if (options.grid_size < 2)
        throw FitError("grid_size must be at least 2");

    Design d;
    bool weighted = options.weight_by_variance;
    for (const CostPerfPoint& p : points) {
        if (p.cost_kusd <= 0.0)
            throw FitError("non-positive cost in fit data");
        d.x.push_back(p.cost_kusd);
        d.y.push_back(p.resolve_pct);
        if (weighted && (!p.std_pct || *p.std_pct <= 0.0))
            weighted = false;
    }
    d.w.assign(points.size(), 1.0);
    if (weighted)
        for (std::size_t i = 0; i < points.size(); ++i)
            d.w[i] = 1.0 / (*points[i].std_pct * *points[i].std_pct);
    if (std::all_of(d.x.begin(), d.x.end(), [&](double x) { return x == d.x.front(); }))
        throw FitError("degenerate design: all costs are equal");

    const std::size_t grid = static_cast<std::size_t>(options.grid_size);
    const double step = (options.b_max - options.b_min) / static_cast<double>(grid - 1);
    auto grid_b = [&](std::size_t i) { return options.b_min + step * static_cast<double>(i); };

    std::size_t best = 0;
    double best_obj = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid; ++i) {
        double obj = solve_ca(d, grid_b(i)).objective;
        if (obj < best_obj) {
            best_obj = obj;
            best = i;
        }
    }
    double lo = grid_b(best == 0 ? 0 : best - 1);
    double hi = grid_b(best + 1 >= grid ? grid - 1 : best + 1);
    double b = golden_section_min([&](double cand) { return solve_ca(d, cand).objective; }, lo, hi);
    LinearSolution sol = solve_ca(d, b);
    bool guarded = false;

    if (sol.c > options.asymptote_cap) {
        // The asymptote is not identified (the data is close to log-linear
        // and raw least squares runs away along b -> 0). One-standard-error
        // rule: take the largest b whose leave-one-out error is within one
        // SE of the LOO minimum, i.e. the most conservative asymptote among
        // statistically indistinguishable fits.
        guarded = true;
        std::vector<double> press_grid(grid);
        std::size_t pbest = 0;
        for (std::size_t i = 0; i < grid; ++i) {
            press_grid[i] = press_for_b(d, grid_b(i));
            if (press_grid[i] < press_grid[pbest])
                pbest = i;
        }
        double plo = grid_b(pbest == 0 ? 0 : pbest - 1);
        double phi = grid_b(pbest + 1 >= grid ? grid - 1 : pbest + 1);
        double b_press = golden_section_min([&](double cand) { return press_for_b(d, cand); }, plo, phi);
        std::vector<double> squares;
        double press_min = press_for_b(d, b_press, &squares);

        const double n = static_cast<double>(squares.size());
        double mean_sq = press_min / n;
        double var = 0.0;
        for (double s : squares)
            var += (s - mean_sq) * (s - mean_sq);
        var /= (n - 1.0);
        const double threshold = press_min + std::sqrt(var / n) * n; // SE of the sum

        std::size_t k = grid;
        for (std::size_t i = grid; i-- > 0;) {
            if (press_grid[i] <= threshold) {
                k = i;
                break;
            }
        }
        if (k == grid) {
            b = b_press;
        } else if (k + 1 >= grid) {
            b = grid_b(grid - 1);
        } else {
            double inside = grid_b(k);
            double outside = grid_b(k + 1);
            for (int iter = 0; iter < 200 && outside - inside > 1e-11; ++iter) {
                double mid = 0.5 * (inside + outside);
                (press_for_b(d, mid) <= threshold ? inside : outside) = mid;
            }
            b = inside;
        }
        sol = solve_ca(d, b);
        if (sol.c > options.asymptote_cap)
            throw FitError("asymptote not identifiable from this data (c="
                           + std::to_string(sol.c) + " even under conservative selection)");
    }

    double y_max = *std::max_element(d.y.begin(), d.y.end());
    if (!(sol.c > y_max) || !(sol.a > 0.0) || !(b > 0.0))
        throw FitError("fit violates model constraints (c=" + std::to_string(sol.c)
                       + ", a=" + std::to_string(sol.a) + ", b=" + std::to_string(b) + ")");

    ScalingFit fit;
    fit.asymptote_pct = sol.c;
    fit.coefficient = sol.a;
    fit.exponent = b;
    fit.residual_sum = sol.sse;
    fit.ridge_guarded = guarded;

    double ybar = 0.0;
    for (double y : d.y)
        ybar += y;
    ybar /= static_cast<double>(d.y.size());
    double ss_tot = 0.0, abs_err = 0.0;
    for (std::size_t i = 0; i < d.x.size(); ++i) {
        ss_tot += (d.y[i] - ybar) * (d.y[i] - ybar);
        abs_err += std::abs(d.y[i] - (sol.c - sol.a * std::pow(d.x[i], -b)));
    }
    fit.r_squared = ss_tot == 0.0 ? 1.0 : 1.0 - sol.sse / ss_tot;
    fit.mean_abs_error = abs_err / static_cast<double>(d.x.size());
    return fit;
}

double predict(const ScalingFit& fit, double cost_kusd)
{
    if (cost_kusd <= 0.0)
        throw std::domain_error("predict: cost must be positive");
    double y = fit.asymptote_pct - fit.coefficient * std::pow(cost_kusd, -fit.exponent);
    return std::clamp(y, 0.0, 100.0);
}

double invert(const ScalingFit& fit, double target_pct)
{
    if (target_pct >= fit.asymptote_pct)
        throw TargetExceedsAsymptoteError(target_pct, fit.asymptote_pct);
    return std::pow(fit.coefficient / (fit.asymptote_pct - target_pct), 1.0 / fit.exponent);
}

} // namespace trajkit::scaling
