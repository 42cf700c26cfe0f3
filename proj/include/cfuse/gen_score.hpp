#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cfuse/stat_kernel.hpp"
#include "cfuse/study_data.hpp"

namespace cfuse {

/// Nuisance models behind the generalization score
/// nu(x) = pi_o(x) (1 - e(x)) / e(x).
struct GeneralizationModel {
    RegressionFit selection_fit;   // e(x): P(RCT | x) within the overlap region
    RegressionFit propensity_fit;  // pi_o(x): P(z = 1 | x, OS) within the overlap region
    double clamp = 0.01;
    std::size_t dim = 0;

    double selection(std::vector<double> const& x) const;
    double propensity(std::vector<double> const& x) const;
    double nu(std::vector<double> const& x) const;
};

GeneralizationModel fit_generalization(StudyData const& data, double clamp = 0.01);

struct RctCopies {
    std::size_t record_index = 0;  // index into StudyData::records()
    std::string id;
    double nu_hat = 0.0;
    int copies = 1;
};

struct CopyPlan {
    std::vector<RctCopies> units;  // one entry per RCT record, in record order
    std::size_t n_o1_plus = 0;
    std::size_t imaginary_treated = 0;
    std::size_t imaginary_rct = 0;

    std::size_t total_copies() const;
};

CopyPlan plan_copies(GeneralizationModel const& model, StudyData const& data);

/// C_m = ceil(n_o1_plus * nu_m / sum nu) from precomputed scores (one per RCT
/// record, in record order).
CopyPlan plan_copies_from_scores(StudyData const& data, std::vector<double> const& nu_hat);

}  // namespace cfuse
