#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cfuse/interval.hpp"

namespace cfuse {

/// Monotone envelope of a one-sided p-value curve. For UPPER the envelope at b
/// is the maximum of the raw p over {b} and the lattice points in
/// [b - width * se_scale, b]; LOWER mirrors the window to [b, b + width * se_scale].
/// Lattice points are j * step with step = width * se_scale / (points - 1), so
/// raw values are shared between neighbouring evaluations.
class EnvelopeCurve {
public:
    using RawFn = std::function<double(double)>;

    EnvelopeCurve(RawFn raw, double se_scale, Direction direction, int points = 201,
                  double width = 6.0);

    double raw(double b) const { return raw_(b); }
    double operator()(double b);

    /// Evaluates every lattice point needed for envelopes on [lo, hi],
    /// in parallel when OpenMP is active.
    void precompute(double lo, double hi);

    Direction direction() const { return direction_; }
    double step() const { return step_; }
    double se_scale() const { return se_scale_; }

private:
    double lattice(std::int64_t j);
    void ensure(std::int64_t lo, std::int64_t hi);

    RawFn raw_;
    double se_scale_;
    Direction direction_;
    int span_;  // lattice points per window, excluding the evaluation point
    double step_;
    std::int64_t first_ = 0;
    std::vector<double> cache_;  // NaN marks missing
};

}  // namespace cfuse
