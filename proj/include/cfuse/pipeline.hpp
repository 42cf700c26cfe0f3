#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cfuse/combine.hpp"
#include "cfuse/gen_score.hpp"
#include "cfuse/os_sens.hpp"
#include "cfuse/pvalue_curve.hpp"
#include "cfuse/rct_infer.hpp"
#include "cfuse/study_data.hpp"
#include "cfuse/tri_match.hpp"

namespace cfuse {

struct PipelineOptions {
    OverlapRule overlap = OverlapRule::rct_bounding_box();
    std::size_t controls_per_set = 1;
    double clamp = 0.01;
    double rct_theta = 0.5;
    RctScheme rct_scheme = RctScheme::kBernoulli;
    bool residualize = true;
    // true: RCT copies retained in real matched sets; false: the full copy plan.
    bool rct_matched_copies = true;
};

/// Overlap flags, nuisance fits, copy plan, matched sets and the two designs.
/// `data` holds the analysis outcomes (residualized unless disabled).
struct MatchedStudy {
    StudyData data;
    GeneralizationModel model;
    CopyPlan plan;
    MatchResult match;
    OsDesign os;
    RctDesign rct;
    double outcome_sd = 1.0;
};

MatchedStudy build_matched_study(StudyData const& raw, PipelineOptions const& options);

struct LadderRow {
    std::string method;
    double gamma = 1.0;
    double delta = 0.0;
    double alpha = 0.05;
    double lower = 0.0;
    double upper = 0.0;
};

/// Confidence intervals for one matched study over Gamma and Delta ladders.
/// The randomization draws are made once and every envelope curve is cached,
/// so an entire ladder costs little more than one cell.
struct GridSizes {
    int beta_points = 401;     // null-value grid for test inversion
    int envelope_points = 201; // window of the monotone p-value envelope
};

class LadderEngine {
public:
    LadderEngine(MatchedStudy const& study, std::size_t mc_samples, SeededRng const& rng,
                 bool parallel = true, GridSizes grid = {});

    IntervalResult os_interval(double gamma, double alpha);
    IntervalResult rct_interval(double delta, double alpha);
    CombinedResult combined(double gamma, double delta, double alpha);

    /// Rows ordered RCT (per delta), OS (per gamma), combined (delta-major).
    std::vector<LadderRow> ladder(std::vector<double> const& gammas,
                                  std::vector<double> const& deltas, double alpha);

    RctNull const& rct_null() const { return null_; }

private:
    EnvelopeCurve& os_curve(double gamma, Direction d);
    EnvelopeCurve& rct_curve(double delta, Direction d);

    MatchedStudy const& study_;
    RctNull null_;
    double os_se_;
    double rct_sd_;
    double rct_estimate_;
    GridSizes grid_;
    std::map<std::pair<double, int>, std::unique_ptr<EnvelopeCurve>> os_curves_;
    std::map<std::pair<double, int>, std::unique_ptr<EnvelopeCurve>> rct_curves_;
};

}  // namespace cfuse
