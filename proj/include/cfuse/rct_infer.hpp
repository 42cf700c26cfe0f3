#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cfuse/gen_score.hpp"
#include "cfuse/interval.hpp"
#include "cfuse/rng.hpp"
#include "cfuse/study_data.hpp"
#include "cfuse/tri_match.hpp"

namespace cfuse {

enum class RctScheme { kBernoulli, kComplete, kBlocked };

struct RctUnit {
    std::string id;
    int z = 0;
    double y = 0.0;
    double theta = 0.5;
    int copies = 1;
    std::optional<std::string> block;
};

class RctDesign {
public:
    RctDesign() = default;
    /// Throws InputError when an invariant fails (theta outside (0, 1), copies
    /// below 1, one-arm design, a block without both arms, or COMPLETE with
    /// unequal theta).
    RctDesign(std::vector<RctUnit> units, RctScheme scheme);

    /// All RCT records of `data` with the copy counts of `plan`.
    static RctDesign from_study(StudyData const& data, CopyPlan const& plan, double theta,
                                RctScheme scheme);

    /// RCT units weighted by the copies retained in real matched sets; copies
    /// matched to imaginary OS treated units are dropped with their sets, and
    /// units left without copies leave the design.
    static RctDesign from_matches(StudyData const& data, std::vector<MatchedSet> const& sets,
                                  double theta, RctScheme scheme);

    std::vector<RctUnit> const& units() const { return units_; }
    RctScheme scheme() const { return scheme_; }
    std::size_t size() const { return units_.size(); }

    /// Writes one assignment drawn from the design into `z` (resized). `scratch`
    /// is reused between calls.
    void draw(SeededRng& rng, std::vector<std::uint8_t>& z, std::vector<std::size_t>& scratch) const;

private:
    std::vector<RctUnit> units_;
    RctScheme scheme_ = RctScheme::kBernoulli;
    std::vector<std::vector<std::size_t>> groups_;  // randomization strata
    std::vector<std::size_t> treated_per_group_;
};

double rct_estimate(RctDesign const& design);

/// `count` assignments; draw s uses rng.substream(s).
std::vector<std::vector<std::uint8_t>> draw_assignments(RctDesign const& design,
                                                        SeededRng const& rng, std::size_t count);

/// Randomization distribution of the weighted statistic under constant-effect
/// imputation, using common draws for every null value. With
///   T_obs(b) = A_obs - b B_obs,   T_s(b) = A_s - b B_s,
/// the UPPER raw p at (beta0, delta) is (1 + #{T_s >= T_obs at b = beta0 + delta}) / (S + 1)
/// and the LOWER raw p is (1 + #{T_s <= T_obs at b = beta0 - delta}) / (S + 1).
class RctNull {
public:
    RctNull(RctDesign const& design, SeededRng const& rng, std::size_t samples,
            bool parallel = true);

    std::size_t samples() const { return a_.size(); }
    double observed(double b) const { return a_obs_ - b * b_obs_; }
    double draw_statistic(std::size_t s, double b) const { return a_[s] - b * b_[s]; }

    /// #{s : T_s(b) > T_obs(b)} and #{s : T_s(b) < T_obs(b)}.
    std::size_t count_greater(double b) const;
    std::size_t count_less(double b) const;

    double raw_p(double beta0, double delta, Direction direction) const;

    /// Root of T_obs(b) = mean_s T_s(b).
    double hl_estimate() const;
    /// Sample sd of T_s(b).
    double sd_at(double b) const;

    /// Two-sided acceptance at level alpha with delta = 0.
    bool accepts(double b, double alpha) const;

private:
    double a_obs_ = 0.0;
    double b_obs_ = 0.0;
    std::vector<double> a_;
    std::vector<double> b_;
    std::vector<double> root_pos_;  // a_s / c_s where c_s > 0, sorted
    std::vector<double> root_neg_;  // a_s / c_s where c_s < 0, sorted
    std::size_t flat_greater_ = 0;  // c_s == 0 and a_s > 0
    std::size_t flat_less_ = 0;     // c_s == 0 and a_s < 0
};

struct RctTestResult {
    double observed_statistic = 0.0;
    std::size_t samples = 0;
    double q025 = 0.0;
    double q500 = 0.0;
    double q975 = 0.0;
    double raw_p_value = 1.0;
    double p_value = 1.0;
    Direction direction = Direction::kUpper;
};

/// Envelope-enforced randomization test of beta = beta0 under the delta model.
/// The observed statistic is reported for the alternative's adjusted outcomes
/// (y - (beta0 + delta) for treated units under UPPER, sign-flipped under LOWER).
RctTestResult rct_test(RctDesign const& design, double beta0, double delta, Direction direction,
                       std::size_t samples, SeededRng const& rng);

RctTestResult rct_test(RctNull const& null, double beta0, double delta, Direction direction);

/// Inverts the delta = 0 two-sided test over grid_points (default 401) spanning the
/// Hodges-Lehmann estimate +/- 8 sd, refines both ends by bisection, then
/// widens to [lo - delta, hi + delta].
IntervalResult rct_ci(RctNull const& null, double delta, double alpha, int grid_points = 401);
IntervalResult rct_ci(RctDesign const& design, double delta, double alpha, std::size_t samples,
                      SeededRng const& rng);

struct DeltaRescaling {
    std::optional<double> delta_tilde;  // empty when every OS treated unit is in the overlap
    double delta_prime = 0.0;
};

/// delta_tilde = delta / (fraction of OS treated outside the overlap);
/// delta_prime = delta / sqrt(S_t^2 + S_c^2) over the matched OS treated and
/// control outcomes.
DeltaRescaling delta_rescalings(double delta, StudyData const& data,
                                std::vector<MatchedSet> const& sets);

}  // namespace cfuse
