#include "cfuse/gen_score.hpp"

#include <algorithm>
#include <cmath>

#include "cfuse/error.hpp"

namespace cfuse {

double GeneralizationModel::selection(std::vector<double> const& x) const
{
    return std::clamp(expit(selection_fit.linear_predictor(x)), clamp, 1.0 - clamp);
}

double GeneralizationModel::propensity(std::vector<double> const& x) const
{
    return std::clamp(expit(propensity_fit.linear_predictor(x)), clamp, 1.0 - clamp);
}

double GeneralizationModel::nu(std::vector<double> const& x) const
{
    double const e = selection(x);
    return propensity(x) * (1.0 - e) / e;
}

namespace {

RegressionFit fit_named(std::vector<UnitRecord const*> const& rows, std::size_t dim,
                        bool rct_label, char const* which)
{
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
    Eigen::VectorXd labels(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i]->x[j];
        }
        labels[static_cast<Eigen::Index>(i)] =
            rct_label ? (rows[i]->source == Source::kRct ? 1.0 : 0.0) : rows[i]->z;
    }
    try {
        return fit_logistic(x, labels);
    } catch (std::exception const& e) {
        throw NumericalError(std::string("fit_generalization: ") + which + " model failed: "
                             + e.what());
    }
}

}  // namespace

GeneralizationModel fit_generalization(StudyData const& data, double clamp)
{
    std::vector<UnitRecord const*> overlap;
    std::vector<UnitRecord const*> os_overlap;
    for (auto const& r : data.records()) {
        if (!r.in_overlap) {
            continue;
        }
        overlap.push_back(&r);
        if (r.source == Source::kOs) {
            os_overlap.push_back(&r);
        }
    }
    GeneralizationModel model;
    model.clamp = clamp;
    model.dim = data.dim();
    model.selection_fit = fit_named(overlap, data.dim(), true, "RCT selection e(x)");
    model.propensity_fit = fit_named(os_overlap, data.dim(), false, "OS propensity pi_o(x)");
    return model;
}

std::size_t CopyPlan::total_copies() const
{
    std::size_t total = 0;
    for (auto const& u : units) {
        total += static_cast<std::size_t>(u.copies);
    }
    return total;
}

CopyPlan plan_copies_from_scores(StudyData const& data, std::vector<double> const& nu_hat)
{
    if (data.counts().n_r == 0) {
        throw InputError("plan_copies: the study has no RCT units");
    }
    if (nu_hat.size() != data.counts().n_r) {
        throw std::invalid_argument("plan_copies: one score per RCT unit required");
    }
    double total = 0.0;
    for (double v : nu_hat) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw NumericalError("plan_copies: generalization scores must be positive");
        }
        total += v;
    }
    CopyPlan plan;
    plan.n_o1_plus = data.counts().n_o1_plus;
    std::size_t k = 0;
    auto const n_plus = static_cast<double>(plan.n_o1_plus);
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto const& r = data.records()[i];
        if (r.source != Source::kRct) {
            continue;
        }
        double const raw = n_plus * nu_hat[k] / total;
        // Relative slack so values that are integers in exact arithmetic do not
        // round up on a last-bit error.
        double const c = std::ceil(raw - 1e-9 * std::max(1.0, raw));
        plan.units.push_back({i, r.id, nu_hat[k], std::max(1, static_cast<int>(c))});
        ++k;
    }
    std::size_t const copies = plan.total_copies();
    plan.imaginary_treated = copies - plan.n_o1_plus;
    plan.imaginary_rct = data.counts().n_o1_minus;
    return plan;
}

CopyPlan plan_copies(GeneralizationModel const& model, StudyData const& data)
{
    if (model.dim != data.dim()) {
        throw std::invalid_argument("plan_copies: model fitted on a different covariate dimension");
    }
    std::vector<double> nu;
    for (auto const& r : data.records()) {
        if (r.source == Source::kRct) {
            nu.push_back(model.nu(r.x));
        }
    }
    return plan_copies_from_scores(data, nu);
}

}  // namespace cfuse
