#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "cfuse/error.hpp"

namespace cfuse {

/// Standard normal CDF, computed from erfc so both tails keep full relative
/// precision.
double normal_cdf(double x);

/// Inverse of normal_cdf (Wichura AS241). Throws std::domain_error for p
/// outside (0, 1).
double normal_quantile(double p);

/// CDF of the chi-square distribution with 4 degrees of freedom:
/// 1 - exp(-x/2) (1 + x/2).
double chi2_4_cdf(double x);

/// Quantile of chi-square(4) by bracketed bisection on chi2_4_cdf.
double chi2_4_quantile(double p);

inline double expit(double eta)
{
    if (eta >= 0) {
        double const e = std::exp(-eta);
        return 1.0 / (1.0 + e);
    }
    double const e = std::exp(eta);
    return e / (1.0 + e);
}

class SingularDesignError : public NumericalError {
public:
    SingularDesignError(std::size_t column, std::string const& what)
        : NumericalError(what), column_(column)
    {
    }
    // Column index in the design with the intercept at 0.
    std::size_t column() const { return column_; }

private:
    std::size_t column_;
};

struct RegressionFit {
    Eigen::VectorXd coefficients;  // intercept first, then one per covariate
    Eigen::VectorXd residuals;     // response residuals y - fitted
    Eigen::VectorXd fitted;        // fitted values (probabilities for logistic)
    bool converged = false;
    int iterations = 0;
    bool quasi_separated = false;

    /// Linear predictor for one covariate row (without intercept column).
    double linear_predictor(std::vector<double> const& x) const;
};

/// Least squares with an intercept column prepended to `design`.
RegressionFit fit_linear(Eigen::MatrixXd const& design, Eigen::VectorXd const& outcome);

/// Logistic regression by IRLS with ridge jitter 1e-8 on the weighted normal
/// equations. Labels must be 0/1 with both classes present.
RegressionFit fit_logistic(Eigen::MatrixXd const& design, Eigen::VectorXd const& labels);

struct RootOptions {
    double tol = 1e-10;
    int max_expansions = 60;
    int max_iterations = 400;
};

/// Bisection root of a monotone function. If f(lo) and f(hi) do not differ in
/// sign the bracket is doubled about its center up to max_expansions times.
double find_root(std::function<double(double)> const& f, double lo, double hi,
                 RootOptions const& opts = {});

double mean(std::vector<double> const& v);
/// Sample variance (n - 1 denominator); 0 for fewer than two values.
double sample_variance(std::vector<double> const& v);

}  // namespace cfuse
