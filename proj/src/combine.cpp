#include "cfuse/combine.hpp"

#include <cmath>
#include <vector>

#include "cfuse/error.hpp"
#include "cfuse/pvalue_curve.hpp"
#include "cfuse/stat_kernel.hpp"

namespace cfuse {

double kappa_alpha(double alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::domain_error("kappa_alpha: alpha must lie in (0, 1)");
    }
    return std::exp(-0.5 * chi2_4_quantile(1.0 - alpha));
}

LimitResult combined_limit(PCurve const& p_os, PCurve const& p_rct, double kappa,
                           Direction direction, GridSpec const& grid)
{
    if (grid.points < 3 || !(grid.half_width > 0.0)) {
        throw std::invalid_argument("combined_limit: bad grid");
    }
    auto accepted = [&](double b) { return p_os(b) * p_rct(b) >= kappa; };
    // Positions are scanned from the far side towards the near side so the
    // same code serves both directions: sign flips the axis for LOWER.
    double const sign = direction == Direction::kUpper ? 1.0 : -1.0;
    LimitResult out;
    double half = grid.half_width;
    for (int attempt = 0; attempt < 2; ++attempt) {
        double const step = 2.0 * half / (grid.points - 1);
        auto at = [&](int i) { return grid.center + sign * (-half + i * step); };
        int first = -1;
        int transitions = 0;
        bool prev = false;
        for (int i = 0; i < grid.points; ++i) {
            bool const ok = accepted(at(i));
            if (ok && first < 0) {
                first = i;
            }
            if (i > 0 && ok != prev) {
                ++transitions;
            }
            prev = ok;
        }
        if (first < 0) {
            throw NumericalError("combined_limit: no null value accepted on the grid");
        }
        if (first == 0) {
            if (attempt == 0) {
                half *= 2.0;
                ++out.extensions;
                continue;
            }
            throw NumericalError("combined_limit: grid edge accepted after extension");
        }
        out.grid_monotone = transitions == 1 && prev;
        double rejected = at(first - 1);
        double acc = at(first);
        while (std::fabs(acc - rejected) > grid.tol) {
            double const mid = 0.5 * (acc + rejected);
            (accepted(mid) ? acc : rejected) = mid;
        }
        out.value = acc;
        return out;
    }
    throw NumericalError("combined_limit: grid exhausted");
}

CombinedLimits combined_limits(CombinedCurves const& curves, double kappa, GridSpec const& grid)
{
    double const lo = grid.center - grid.half_width;
    double const hi = grid.center + grid.half_width;
    for (auto* c : {curves.os_upper, curves.os_lower, curves.rct_upper, curves.rct_lower}) {
        c->precompute(lo, hi);
    }
    auto wrap = [](EnvelopeCurve* c) { return [c](double b) { return (*c)(b); }; };
    CombinedLimits out;
    out.lower = combined_limit(wrap(curves.os_upper), wrap(curves.rct_upper), kappa,
                               Direction::kUpper, grid);
    out.upper = combined_limit(wrap(curves.os_lower), wrap(curves.rct_lower), kappa,
                               Direction::kLower, grid);
    return out;
}

IntervalResult CombinedResult::interval() const
{
    IntervalResult r;
    r.method = "combined";
    r.lower = lower;
    r.upper = upper;
    r.alpha = alpha;
    r.gamma = gamma;
    r.delta = delta;
    r.estimate = rct.estimate;
    r.diagnostics["kappa"] = kappa;
    r.diagnostics["grid_monotone"] = grid_monotone ? 1.0 : 0.0;
    return r;
}

CombinedResult combined_ci(OsDesign const& os, RctNull const& rct, double gamma, double delta,
                           double alpha, double outcome_sd)
{
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw InputError("combined_ci: alpha must lie in (0, 1)");
    }
    CombinedResult r;
    r.alpha = alpha;
    r.gamma = gamma;
    r.delta = delta;
    r.kappa = kappa_alpha(alpha / 2.0);
    r.os = os_ci(os, gamma, alpha / 2.0);
    r.os.alpha = alpha;
    r.rct = rct_ci(rct, delta, alpha);

    double const os_se = os.null_se();
    double const rct_sd = r.rct.diagnostics.at("mc_sd");
    GridSpec grid;
    grid.center = r.rct.estimate;
    grid.half_width = delta + 8.0 * rct_sd;
    grid.tol = 1e-4 * (outcome_sd > 0.0 ? outcome_sd : 1.0);

    EnvelopeCurve os_up([&](double b) { return os_raw_p_value(os, b, gamma, Direction::kUpper); },
                        os_se, Direction::kUpper);
    EnvelopeCurve os_lo([&](double b) { return os_raw_p_value(os, b, gamma, Direction::kLower); },
                        os_se, Direction::kLower);
    EnvelopeCurve rct_up([&](double b) { return rct.raw_p(b, delta, Direction::kUpper); }, rct_sd,
                         Direction::kUpper);
    EnvelopeCurve rct_lo([&](double b) { return rct.raw_p(b, delta, Direction::kLower); }, rct_sd,
                         Direction::kLower);
    auto const limits = combined_limits({&os_up, &os_lo, &rct_up, &rct_lo}, r.kappa, grid);
    r.lower = limits.lower.value;
    r.upper = limits.upper.value;
    r.grid_monotone = limits.lower.grid_monotone && limits.upper.grid_monotone;
    if (r.lower > r.upper) {
        throw NumericalError("combined_ci: lower limit exceeds upper limit");
    }
    return r;
}

CombinedResult combined_ci(OsDesign const& os, RctDesign const& rct, double gamma, double delta,
                           double alpha, std::size_t samples, SeededRng const& rng)
{
    return combined_ci(os, RctNull(rct, rng, samples), gamma, delta, alpha, os.outcome_sd());
}

}  // namespace cfuse
