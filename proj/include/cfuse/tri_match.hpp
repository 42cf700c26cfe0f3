#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfuse/gen_score.hpp"
#include "cfuse/study_data.hpp"

namespace cfuse {

/// Mahalanobis metric whose covariance comes from a reference sample (pooled
/// OS covariates), ridge-regularized by 1e-6 * trace / p.
class MahalanobisMetric {
public:
    explicit MahalanobisMetric(std::vector<std::vector<double>> const& reference);
    static MahalanobisMetric from_os(StudyData const& data);
    /// Identity covariance (Euclidean distance).
    static MahalanobisMetric identity(std::size_t dim);

    double distance(std::vector<double> const& a, std::vector<double> const& b) const;
    Eigen::VectorXd whiten(std::vector<double> const& x) const;
    std::size_t dim() const { return static_cast<std::size_t>(chol_l_.rows()); }

private:
    MahalanobisMetric() = default;
    Eigen::MatrixXd chol_l_;
};

/// Distance matrix between row units and column units. A null pointer marks an
/// imaginary unit, which matches anything at cost 0.
Eigen::MatrixXd mahalanobis_matrix(std::vector<std::vector<double> const*> const& rows,
                                   std::vector<std::vector<double> const*> const& cols,
                                   MahalanobisMetric const& metric);

struct MatchedSet {
    int set_id = 0;
    std::string treated_id;
    std::vector<std::string> control_ids;
    std::optional<std::string> rct_id;
    bool in_overlap = true;

    std::size_t treated_index = 0;              // StudyData record indices
    std::vector<std::size_t> control_indices;
    std::optional<std::size_t> rct_index;
};

/// |mean_a - mean_b| / sqrt((var_a + var_b) / 2) with sample variances. Returns
/// 0 for 0/0 and 1e6 when the pooled sd is 0 but the means differ.
double smd(std::vector<double> const& group_a, std::vector<double> const& group_b);

struct BalanceEntry {
    std::string domain;    // overlap | nonoverlap
    std::string contrast;  // os_treated_vs_rct | os_control_vs_rct | os_treated_vs_os_control
    std::string covariate;
    double before = 0.0;
    double after = 0.0;
};

struct BalanceReport {
    enum Domain { kOverlap = 0, kNonOverlap = 1 };
    std::vector<BalanceEntry> entries;
    std::array<bool, 2> has_domain{false, false};
    std::array<double, 2> max_abs_before{0.0, 0.0};
    std::array<double, 2> max_abs_after{0.0, 0.0};
};

struct MatchResult {
    std::vector<MatchedSet> sets;
    BalanceReport balance;
    double pass_a_cost = 0.0;
    double pass_b_cost = 0.0;
};

/// Two-pass triplet matching. Pass A assigns RCT copies to OS treated units in
/// the overlap region (padded with zero-cost imaginary treated units); pass B
/// gives every real OS treated anchor `controls_per_set` OS controls with cost
/// d(control, treated) + d(control, RCT copy), preferring controls from the
/// anchor's own domain (crossing domains costs 10 x the largest finite cost).
MatchResult match_triplets(StudyData const& data, CopyPlan const& plan,
                           std::size_t controls_per_set = 1);

BalanceReport balance_report(StudyData const& data, std::vector<MatchedSet> const& sets);

}  // namespace cfuse
