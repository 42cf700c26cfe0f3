#include "cfuse/rct_infer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "cfuse/error.hpp"
#include "cfuse/kernels.hpp"
#include "cfuse/pvalue_curve.hpp"
#include "cfuse/stat_kernel.hpp"

namespace cfuse {

RctDesign::RctDesign(std::vector<RctUnit> units, RctScheme scheme)
    : units_(std::move(units)), scheme_(scheme)
{
    std::size_t treated = 0;
    for (auto const& u : units_) {
        if (!(u.theta > 0.0 && u.theta < 1.0)) {
            throw InputError("rct design: theta must lie in (0, 1) for unit '" + u.id + "'");
        }
        if (u.copies < 1) {
            throw InputError("rct design: copies must be >= 1 for unit '" + u.id + "'");
        }
        if (u.z != 0 && u.z != 1) {
            throw InputError("rct design: z must be 0 or 1 for unit '" + u.id + "'");
        }
        if (!std::isfinite(u.y)) {
            throw InputError("rct design: non-finite outcome for unit '" + u.id + "'");
        }
        treated += static_cast<std::size_t>(u.z);
    }
    if (treated == 0 || treated == units_.size()) {
        throw InputError("rct design: need at least one treated and one control unit");
    }
    if (scheme_ == RctScheme::kComplete) {
        for (auto const& u : units_) {
            if (u.theta != units_.front().theta) {
                throw InputError("rct design: COMPLETE randomization requires equal theta");
            }
        }
        std::vector<std::size_t> all(units_.size());
        std::iota(all.begin(), all.end(), 0);
        groups_.push_back(std::move(all));
        treated_per_group_.push_back(treated);
    } else if (scheme_ == RctScheme::kBlocked) {
        std::map<std::string, std::size_t> slot;
        for (std::size_t m = 0; m < units_.size(); ++m) {
            if (!units_[m].block) {
                throw InputError("rct design: BLOCKED randomization needs a block for unit '"
                                 + units_[m].id + "'");
            }
            auto [it, fresh] = slot.emplace(*units_[m].block, groups_.size());
            if (fresh) {
                groups_.emplace_back();
                treated_per_group_.push_back(0);
            }
            groups_[it->second].push_back(m);
            treated_per_group_[it->second] += static_cast<std::size_t>(units_[m].z);
        }
        for (auto const& [name, g] : slot) {
            if (treated_per_group_[g] == 0 || treated_per_group_[g] == groups_[g].size()) {
                throw InputError("rct design: block '" + name
                                 + "' needs at least one treated and one control unit");
            }
        }
    }
}

RctDesign RctDesign::from_study(StudyData const& data, CopyPlan const& plan, double theta,
                                RctScheme scheme)
{
    std::vector<RctUnit> units;
    for (auto const& c : plan.units) {
        auto const& r = data.records()[c.record_index];
        units.push_back({r.id, r.z, r.y, theta, c.copies, r.block});
    }
    return RctDesign(std::move(units), scheme);
}

RctDesign RctDesign::from_matches(StudyData const& data, std::vector<MatchedSet> const& sets,
                                  double theta, RctScheme scheme)
{
    std::map<std::size_t, int> retained;
    for (auto const& s : sets) {
        if (s.rct_index) {
            ++retained[*s.rct_index];
        }
    }
    std::vector<RctUnit> units;
    for (auto const& [index, copies] : retained) {
        auto const& r = data.records()[index];
        units.push_back({r.id, r.z, r.y, theta, copies, r.block});
    }
    return RctDesign(std::move(units), scheme);
}

void RctDesign::draw(SeededRng& rng, std::vector<std::uint8_t>& z,
                     std::vector<std::size_t>& scratch) const
{
    z.assign(units_.size(), 0);
    if (scheme_ == RctScheme::kBernoulli) {
        for (std::size_t m = 0; m < units_.size(); ++m) {
            z[m] = rng.uniform() < units_[m].theta ? 1 : 0;
        }
        return;
    }
    for (std::size_t g = 0; g < groups_.size(); ++g) {
        scratch.assign(groups_[g].begin(), groups_[g].end());
        std::size_t const n = scratch.size();
        for (std::size_t i = 0; i < treated_per_group_[g]; ++i) {
            std::size_t const j = i + static_cast<std::size_t>(rng.below(n - i));
            std::swap(scratch[i], scratch[j]);
            z[scratch[i]] = 1;
        }
    }
}

namespace {

// Accumulates A and B exactly as the null-statistic kernel does, so the
// observed assignment reproduces its own draw bit for bit.
void observed_components(RctDesign const& design, double& a, double& b)
{
    double total = 0.0;
    for (auto const& u : design.units()) {
        total += u.copies;
    }
    // Same accumulation as the null kernel, so the observed assignment drawn
    // again reproduces these values exactly.
    double at = 0.0, ac = 0.0, bt = 0.0, bc = 0.0;
    for (auto const& u : design.units()) {
        double const c = u.copies / total;
        if (u.z) {
            at += c * u.y / u.theta;
            bt += c / u.theta;
        } else {
            ac += c * u.y / (1.0 - u.theta);
        }
    }
    a = at - ac;
    b = bt - bc;
}

}  // namespace

double rct_estimate(RctDesign const& design)
{
    double a = 0.0;
    double b = 0.0;
    observed_components(design, a, b);
    return a;
}

std::vector<std::vector<std::uint8_t>> draw_assignments(RctDesign const& design,
                                                        SeededRng const& rng, std::size_t count)
{
    std::vector<std::vector<std::uint8_t>> out(count);
    std::vector<std::size_t> scratch;
    for (std::size_t s = 0; s < count; ++s) {
        SeededRng local = rng.substream(s);
        design.draw(local, out[s], scratch);
    }
    return out;
}

RctNull::RctNull(RctDesign const& design, SeededRng const& rng, std::size_t samples, bool parallel)
{
    if (samples < 1) {
        throw InputError("rct: need at least one Monte Carlo sample");
    }
    observed_components(design, a_obs_, b_obs_);
    NullStats stats = parallel ? null_stats_parallel(design, rng, samples)
                               : null_stats_serial(design, rng, samples);
    a_ = std::move(stats.a);
    b_ = std::move(stats.b);
    for (std::size_t s = 0; s < a_.size(); ++s) {
        double const da = a_[s] - a_obs_;
        double const dc = b_[s] - b_obs_;
        if (dc > 0.0) {
            root_pos_.push_back(da / dc);
        } else if (dc < 0.0) {
            root_neg_.push_back(da / dc);
        } else if (da > 0.0) {
            ++flat_greater_;
        } else if (da < 0.0) {
            ++flat_less_;
        }
    }
    std::sort(root_pos_.begin(), root_pos_.end());
    std::sort(root_neg_.begin(), root_neg_.end());
}

std::size_t RctNull::count_greater(double b) const
{
    auto const pos = root_pos_.end() - std::upper_bound(root_pos_.begin(), root_pos_.end(), b);
    auto const neg = std::lower_bound(root_neg_.begin(), root_neg_.end(), b) - root_neg_.begin();
    return static_cast<std::size_t>(pos + neg) + flat_greater_;
}

std::size_t RctNull::count_less(double b) const
{
    auto const pos = std::lower_bound(root_pos_.begin(), root_pos_.end(), b) - root_pos_.begin();
    auto const neg = root_neg_.end() - std::upper_bound(root_neg_.begin(), root_neg_.end(), b);
    return static_cast<std::size_t>(pos + neg) + flat_less_;
}

double RctNull::raw_p(double beta0, double delta, Direction direction) const
{
    // Draws tying the observed statistic count as at least as extreme.
    std::size_t const count = direction == Direction::kUpper
                                  ? samples() - count_less(beta0 + delta)
                                  : samples() - count_greater(beta0 - delta);
    return (1.0 + static_cast<double>(count)) / (static_cast<double>(samples()) + 1.0);
}

double RctNull::hl_estimate() const
{
    double const n = static_cast<double>(samples());
    double const mean_a = std::accumulate(a_.begin(), a_.end(), 0.0) / n;
    double const mean_b = std::accumulate(b_.begin(), b_.end(), 0.0) / n;
    double const slope = b_obs_ - mean_b;
    if (!(std::fabs(slope) > 1e-12)) {
        throw NumericalError("rct: Hodges-Lehmann equation has no unique root");
    }
    return (a_obs_ - mean_a) / slope;
}

double RctNull::sd_at(double b) const
{
    std::vector<double> t(samples());
    for (std::size_t s = 0; s < samples(); ++s) {
        t[s] = draw_statistic(s, b);
    }
    return std::sqrt(sample_variance(t));
}

bool RctNull::accepts(double b, double alpha) const
{
    double const last = static_cast<double>(samples() - 1);
    auto const k_lo = static_cast<std::size_t>(std::floor(0.5 * alpha * last));
    auto const k_hi = static_cast<std::size_t>(std::ceil((1.0 - 0.5 * alpha) * last));
    return count_less(b) <= k_hi && count_greater(b) <= samples() - 1 - k_lo;
}

RctTestResult rct_test(RctNull const& null, double beta0, double delta, Direction direction)
{
    if (!(delta >= 0.0)) {
        throw InputError("rct_test: delta must be >= 0");
    }
    double const sign = direction == Direction::kUpper ? 1.0 : -1.0;
    double const b = direction == Direction::kUpper ? beta0 + delta : beta0 - delta;
    RctTestResult r;
    r.direction = direction;
    r.samples = null.samples();
    r.observed_statistic = sign * null.observed(b);
    std::vector<double> t(null.samples());
    for (std::size_t s = 0; s < t.size(); ++s) {
        t[s] = sign * null.draw_statistic(s, b);
    }
    auto quantile = [&](double q) {
        auto const k = static_cast<std::size_t>(std::lround(q * static_cast<double>(t.size() - 1)));
        std::nth_element(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(k), t.end());
        return t[k];
    };
    r.q025 = quantile(0.025);
    r.q500 = quantile(0.5);
    r.q975 = quantile(0.975);
    r.raw_p_value = null.raw_p(beta0, delta, direction);
    double se = null.sd_at(null.hl_estimate());
    EnvelopeCurve curve([&](double x) { return null.raw_p(x, delta, direction); },
                        se > 0 ? se : 1.0, direction);
    r.p_value = curve(beta0);
    return r;
}

RctTestResult rct_test(RctDesign const& design, double beta0, double delta, Direction direction,
                       std::size_t samples, SeededRng const& rng)
{
    if (samples < 99) {
        throw InputError("rct_test: need at least 99 Monte Carlo samples");
    }
    return rct_test(RctNull(design, rng, samples), beta0, delta, direction);
}

IntervalResult rct_ci(RctNull const& null, double delta, double alpha, int grid_points)
{
    if (grid_points < 3) {
        throw InputError("rct_ci: need at least 3 grid points");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw InputError("rct_ci: alpha must lie in (0, 1)");
    }
    if (!(delta >= 0.0)) {
        throw InputError("rct_ci: delta must be >= 0");
    }
    double const est = null.hl_estimate();
    double const sd = null.sd_at(est);
    if (!(sd > 0.0)) {
        throw NumericalError("rct_ci: randomization distribution is degenerate");
    }
    int const kPoints = grid_points;
    double const lo = est - 8.0 * sd;
    double const step = 16.0 * sd / (kPoints - 1);
    int first = -1;
    int last = -1;
    int runs = 0;
    bool prev = false;
    for (int i = 0; i < kPoints; ++i) {
        bool const ok = null.accepts(lo + i * step, alpha);
        if (ok) {
            if (first < 0) {
                first = i;
            }
            last = i;
            if (!prev) {
                ++runs;
            }
        }
        prev = ok;
    }
    if (first < 0) {
        throw NumericalError("rct_ci: no null value accepted on the grid; use a finer grid");
    }
    auto refine = [&](double accepted, double rejected) {
        for (int it = 0; it < 60; ++it) {
            double const mid = 0.5 * (accepted + rejected);
            (null.accepts(mid, alpha) ? accepted : rejected) = mid;
        }
        return accepted;
    };
    double lower = lo + first * step;
    double upper = lo + last * step;
    if (first > 0) {
        lower = refine(lower, lower - step);
    }
    if (last < kPoints - 1) {
        upper = refine(upper, upper + step);
    }
    IntervalResult r;
    r.method = "rct";
    r.alpha = alpha;
    r.delta = delta;
    r.estimate = est;
    r.lower = lower - delta;
    r.upper = upper + delta;
    r.diagnostics["mc_sd"] = sd;
    r.diagnostics["grid_step"] = step;
    r.diagnostics["grid_monotone"] = runs == 1 ? 1.0 : 0.0;
    r.diagnostics["boundary_hit"] = (first == 0 || last == kPoints - 1) ? 1.0 : 0.0;
    return r;
}

IntervalResult rct_ci(RctDesign const& design, double delta, double alpha, std::size_t samples,
                      SeededRng const& rng)
{
    return rct_ci(RctNull(design, rng, samples), delta, alpha);
}

DeltaRescaling delta_rescalings(double delta, StudyData const& data,
                                std::vector<MatchedSet> const& sets)
{
    if (!(delta >= 0.0)) {
        throw InputError("delta_rescalings: delta must be >= 0");
    }
    DeltaRescaling out;
    auto const& c = data.counts();
    std::size_t const treated = c.n_o1_plus + c.n_o1_minus;
    if (treated > 0 && c.n_o1_minus > 0) {
        out.delta_tilde = delta / (static_cast<double>(c.n_o1_minus) / static_cast<double>(treated));
    }
    if (delta == 0.0) {
        out.delta_prime = 0.0;
        return out;
    }
    std::vector<double> yt;
    std::vector<double> yc;
    for (auto const& s : sets) {
        yt.push_back(data.records()[s.treated_index].y);
        for (auto i : s.control_indices) {
            yc.push_back(data.records()[i].y);
        }
    }
    double const pooled = sample_variance(yt) + sample_variance(yc);
    if (!(pooled > 0.0)) {
        throw NumericalError("delta_rescalings: matched outcomes have zero variance in both arms");
    }
    out.delta_prime = delta / std::sqrt(pooled);
    return out;
}

}  // namespace cfuse
