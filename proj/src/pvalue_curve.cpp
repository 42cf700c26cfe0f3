#include "cfuse/pvalue_curve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cfuse {

EnvelopeCurve::EnvelopeCurve(RawFn raw, double se_scale, Direction direction, int points,
                             double width)
    : raw_(std::move(raw)), se_scale_(se_scale), direction_(direction), span_(points - 1)
{
    if (!(se_scale > 0) || !std::isfinite(se_scale)) {
        throw std::invalid_argument("envelope: se_scale must be positive and finite");
    }
    if (points < 2 || !(width > 0)) {
        throw std::invalid_argument("envelope: need at least two points and positive width");
    }
    step_ = width * se_scale / span_;
}

void EnvelopeCurve::ensure(std::int64_t lo, std::int64_t hi)
{
    double const nan = std::numeric_limits<double>::quiet_NaN();
    if (cache_.empty()) {
        first_ = lo;
        cache_.assign(static_cast<std::size_t>(hi - lo + 1), nan);
        return;
    }
    std::int64_t const last = first_ + static_cast<std::int64_t>(cache_.size()) - 1;
    if (lo < first_) {
        cache_.insert(cache_.begin(), static_cast<std::size_t>(first_ - lo), nan);
        first_ = lo;
    }
    if (hi > last) {
        cache_.resize(cache_.size() + static_cast<std::size_t>(hi - last), nan);
    }
}

double EnvelopeCurve::lattice(std::int64_t j)
{
    double& slot = cache_[static_cast<std::size_t>(j - first_)];
    if (std::isnan(slot)) {
        slot = raw_(static_cast<double>(j) * step_);
    }
    return slot;
}

void EnvelopeCurve::precompute(double lo, double hi)
{
    auto j_lo = static_cast<std::int64_t>(std::floor(lo / step_)) - 1;
    auto j_hi = static_cast<std::int64_t>(std::ceil(hi / step_)) + 1;
    if (direction_ == Direction::kUpper) {
        j_lo -= span_;
    } else {
        j_hi += span_;
    }
    ensure(j_lo, j_hi);
    auto const n = static_cast<std::int64_t>(cache_.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t k = 0; k < n; ++k) {
        auto& slot = cache_[static_cast<std::size_t>(k)];
        if (std::isnan(slot)) {
            slot = raw_(static_cast<double>(first_ + k) * step_);
        }
    }
}

double EnvelopeCurve::operator()(double b)
{
    double best = raw_(b);
    std::int64_t lo;
    std::int64_t hi;
    if (direction_ == Direction::kUpper) {
        hi = static_cast<std::int64_t>(std::floor(b / step_));
        lo = static_cast<std::int64_t>(std::ceil((b - span_ * step_) / step_));
    } else {
        lo = static_cast<std::int64_t>(std::ceil(b / step_));
        hi = static_cast<std::int64_t>(std::floor((b + span_ * step_) / step_));
    }
    if (lo > hi) {
        return best;
    }
    ensure(lo, hi);
    for (std::int64_t j = lo; j <= hi; ++j) {
        best = std::max(best, lattice(j));
    }
    return best;
}

}  // namespace cfuse
