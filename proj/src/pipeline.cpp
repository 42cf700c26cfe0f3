#include "cfuse/pipeline.hpp"

#include <cmath>

#include "cfuse/error.hpp"
#include "cfuse/stat_kernel.hpp"

namespace cfuse {

MatchedStudy build_matched_study(StudyData const& raw, PipelineOptions const& options)
{
    MatchedStudy s;
    StudyData flagged = apply_overlap(raw, options.overlap);
    s.model = fit_generalization(flagged, options.clamp);
    s.plan = plan_copies(s.model, flagged);
    s.match = match_triplets(flagged, s.plan, options.controls_per_set);
    s.data = options.residualize ? residualize(flagged) : std::move(flagged);
    s.os = OsDesign::from_matches(s.data, s.match.sets);
    s.rct = options.rct_matched_copies
                ? RctDesign::from_matches(s.data, s.match.sets, options.rct_theta, options.rct_scheme)
                : RctDesign::from_study(s.data, s.plan, options.rct_theta, options.rct_scheme);
    std::vector<double> ys;
    for (auto const& r : s.data.records()) {
        ys.push_back(r.y);
    }
    s.outcome_sd = std::sqrt(sample_variance(ys));
    return s;
}

LadderEngine::LadderEngine(MatchedStudy const& study, std::size_t mc_samples, SeededRng const& rng,
                           bool parallel, GridSizes grid)
    : study_(study), null_(study.rct, rng, mc_samples, parallel), grid_(grid)
{
    os_se_ = study_.os.null_se();
    rct_estimate_ = null_.hl_estimate();
    rct_sd_ = null_.sd_at(rct_estimate_);
    if (!(rct_sd_ > 0.0)) {
        throw NumericalError("ladder: randomization distribution is degenerate");
    }
}

EnvelopeCurve& LadderEngine::os_curve(double gamma, Direction d)
{
    auto& slot = os_curves_[{gamma, static_cast<int>(d)}];
    if (!slot) {
        OsDesign const* os = &study_.os;
        slot = std::make_unique<EnvelopeCurve>(
            [os, gamma, d](double b) { return os_raw_p_value(*os, b, gamma, d); }, os_se_, d,
            grid_.envelope_points);
    }
    return *slot;
}

EnvelopeCurve& LadderEngine::rct_curve(double delta, Direction d)
{
    auto& slot = rct_curves_[{delta, static_cast<int>(d)}];
    if (!slot) {
        RctNull const* null = &null_;
        slot = std::make_unique<EnvelopeCurve>(
            [null, delta, d](double b) { return null->raw_p(b, delta, d); }, rct_sd_, d,
            grid_.envelope_points);
    }
    return *slot;
}

IntervalResult LadderEngine::os_interval(double gamma, double alpha)
{
    IntervalResult r = os_ci(study_.os, gamma, alpha / 2.0);
    r.alpha = alpha;
    return r;
}

IntervalResult LadderEngine::rct_interval(double delta, double alpha)
{
    return rct_ci(null_, delta, alpha, grid_.beta_points);
}

CombinedResult LadderEngine::combined(double gamma, double delta, double alpha)
{
    CombinedResult r;
    r.alpha = alpha;
    r.gamma = gamma;
    r.delta = delta;
    r.kappa = kappa_alpha(alpha / 2.0);
    r.rct.estimate = rct_estimate_;
    GridSpec grid;
    grid.center = rct_estimate_;
    grid.half_width = delta + 8.0 * rct_sd_;
    grid.points = grid_.beta_points;
    grid.tol = 1e-4 * (study_.outcome_sd > 0.0 ? study_.outcome_sd : 1.0);
    CombinedCurves curves{&os_curve(gamma, Direction::kUpper), &os_curve(gamma, Direction::kLower),
                          &rct_curve(delta, Direction::kUpper),
                          &rct_curve(delta, Direction::kLower)};
    auto const limits = combined_limits(curves, r.kappa, grid);
    r.lower = limits.lower.value;
    r.upper = limits.upper.value;
    r.grid_monotone = limits.lower.grid_monotone && limits.upper.grid_monotone;
    if (r.lower > r.upper) {
        throw NumericalError("combined: lower limit exceeds upper limit");
    }
    return r;
}

std::vector<LadderRow> LadderEngine::ladder(std::vector<double> const& gammas,
                                            std::vector<double> const& deltas, double alpha)
{
    std::vector<LadderRow> rows;
    for (double d : deltas) {
        auto const r = rct_interval(d, alpha);
        rows.push_back({"rct", 1.0, d, alpha, r.lower, r.upper});
    }
    for (double g : gammas) {
        auto const r = os_interval(g, alpha);
        rows.push_back({"os", g, 0.0, alpha, r.lower, r.upper});
    }
    for (double d : deltas) {
        for (double g : gammas) {
            auto const r = combined(g, d, alpha);
            rows.push_back({"combined", g, d, alpha, r.lower, r.upper});
        }
    }
    return rows;
}

}  // namespace cfuse
