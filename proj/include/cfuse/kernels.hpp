#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "cfuse/rng.hpp"

namespace cfuse {

class RctDesign;

/// Per-draw components of the randomization statistic, T_s(b) = a[s] - b * b[s].
struct NullStats {
    std::vector<double> a;
    std::vector<double> b;
};

/// Reference implementation: draws evaluated one after another.
NullStats null_stats_serial(RctDesign const& design, SeededRng const& rng, std::size_t samples);
/// OpenMP version. Draw s always uses rng.substream(s), so the output is
/// identical to the serial one for any thread count.
NullStats null_stats_parallel(RctDesign const& design, SeededRng const& rng, std::size_t samples);

/// out[i] = f(x[i]).
void eval_curve_serial(std::function<double(double)> const& f, std::vector<double> const& x,
                       std::vector<double>& out);
void eval_curve_parallel(std::function<double(double)> const& f, std::vector<double> const& x,
                         std::vector<double>& out);

}  // namespace cfuse
