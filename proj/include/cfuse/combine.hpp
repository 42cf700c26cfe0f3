#pragma once

#include <functional>

#include "cfuse/interval.hpp"
#include "cfuse/os_sens.hpp"
#include "cfuse/rct_infer.hpp"

namespace cfuse {

/// exp(-chi2_4_quantile(1 - alpha) / 2), the cutoff for a product of two
/// independent uniform p-values.
double kappa_alpha(double alpha);

using PCurve = std::function<double(double)>;

struct GridSpec {
    double center = 0.0;
    double half_width = 1.0;
    int points = 401;
    double tol = 1e-6;  // bisection tolerance for the refined limit
};

struct LimitResult {
    double value = 0.0;
    bool grid_monotone = true;
    int extensions = 0;
};

/// UPPER: infimum of {b : p_os(b) p_rct(b) >= kappa}, the lower confidence
/// limit. LOWER: supremum of the same set built from LOWER-alternative curves.
/// Both use a grid scan followed by bisection between the boundary grid points.
/// If the grid edge is accepted the half width is doubled once; a second
/// edge hit, or no accepted point, throws NumericalError.
LimitResult combined_limit(PCurve const& p_os, PCurve const& p_rct, double kappa,
                           Direction direction, GridSpec const& grid);

class EnvelopeCurve;

/// Envelope curves for one (gamma, delta) cell. Curves keep their lattice
/// caches, so a cell ladder can share them.
struct CombinedCurves {
    EnvelopeCurve* os_upper = nullptr;
    EnvelopeCurve* os_lower = nullptr;
    EnvelopeCurve* rct_upper = nullptr;
    EnvelopeCurve* rct_lower = nullptr;
};

struct CombinedLimits {
    LimitResult lower;
    LimitResult upper;
};

/// Both one-sided limits at cutoff kappa. Lattice points covering the grid
/// are precomputed first.
CombinedLimits combined_limits(CombinedCurves const& curves, double kappa, GridSpec const& grid);

struct CombinedResult {
    double lower = 0.0;
    double upper = 0.0;
    double alpha = 0.05;
    double gamma = 1.0;
    double delta = 0.0;
    double kappa = 0.0;  // kappa at alpha / 2
    bool grid_monotone = true;
    IntervalResult os;
    IntervalResult rct;

    IntervalResult interval() const;
};

/// Two-sided (1 - alpha) interval from the two one-sided limits at alpha / 2.
/// Limits are refined to 1e-4 x outcome_sd.
CombinedResult combined_ci(OsDesign const& os, RctNull const& rct, double gamma, double delta,
                           double alpha, double outcome_sd);

CombinedResult combined_ci(OsDesign const& os, RctDesign const& rct, double gamma, double delta,
                           double alpha, std::size_t samples, SeededRng const& rng);

}  // namespace cfuse
