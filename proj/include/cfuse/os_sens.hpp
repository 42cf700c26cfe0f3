#pragma once

#include <cstddef>
#include <vector>

#include "cfuse/interval.hpp"
#include "cfuse/tri_match.hpp"

namespace cfuse {

struct SetOutcomes {
    std::vector<double> adjusted;  // y - z * beta0, one per OS unit in the set
    std::size_t treated_index = 0;

    std::size_t size() const { return adjusted.size(); }
};

struct EtaVector {
    std::vector<double> probs;  // in the set's original unit order
};

/// Separable extreme probabilities at sensitivity gamma. Throws
/// std::domain_error for gamma < 1.
EtaVector separable_eta(SetOutcomes const& set, double gamma);

/// Sum of eta_j * y_j, the quantity separable_eta maximizes.
double eta_mean(SetOutcomes const& set, EtaVector const& eta);

double tilde_tau(SetOutcomes const& set, EtaVector const& eta);

struct OsTestResult {
    double statistic = 0.0;  // mean of tilde tau
    double se = 0.0;
    double z_score = 0.0;
    double p_value = 1.0;
    Direction direction = Direction::kUpper;
};

/// `sets` hold adjusted outcomes at the null value of interest. LOWER negates
/// them and runs the UPPER test.
OsTestResult os_test(std::vector<SetOutcomes> const& sets, double gamma, Direction direction);

/// Matched OS sets with raw outcomes in flat storage. Only OS members enter;
/// the RCT reference of a set is ignored here.
class OsDesign {
public:
    OsDesign() = default;
    OsDesign(std::vector<std::vector<double>> outcomes, std::vector<std::size_t> treated_index);
    static OsDesign from_matches(StudyData const& data, std::vector<MatchedSet> const& sets);

    std::size_t num_sets() const { return treated_.size(); }
    std::vector<SetOutcomes> at(double beta0) const;

    /// Same result as os_test(at(beta0), ...) without allocating.
    OsTestResult test(double beta0, double gamma, Direction direction) const;

    /// Gamma = 1 point estimate (mean of treated-minus-control differences).
    double estimate() const;
    /// Gamma = 1 standard error of the mean difference; independent of beta0.
    double null_se() const;
    /// Pooled sample sd of every outcome in the design.
    double outcome_sd() const;

private:
    std::vector<double> y_;
    std::vector<std::size_t> offset_;  // size num_sets + 1
    std::vector<std::size_t> treated_;
};

/// Raw (unenveloped) p-value of os_test at beta0.
double os_raw_p_value(OsDesign const& design, double beta0, double gamma, Direction direction);

/// Monotone-envelope p-value: running maximum of the raw p over a 201-point
/// window of width 6 standard errors on the conservative side of beta0.
double os_p_value(OsDesign const& design, double beta0, double gamma, Direction direction);

/// (1 - 2 alpha) interval [beta_L, beta_U] where beta_L solves the UPPER
/// z-score = z_{1 - alpha} and beta_U the LOWER analog.
IntervalResult os_ci(OsDesign const& design, double gamma, double alpha);

}  // namespace cfuse
