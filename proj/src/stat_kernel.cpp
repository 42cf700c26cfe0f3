#include "cfuse/stat_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cfuse {

double normal_cdf(double x)
{
    return 0.5 * std::erfc(-x * M_SQRT1_2);
}

// Wichura, Algorithm AS241 (PPND16), accurate to about 1e-16.
double normal_quantile(double p)
{
    if (!(p > 0.0 && p < 1.0)) {
        throw std::domain_error("normal_quantile: p must lie in (0, 1)");
    }
    double const q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        double const r = 0.180625 - q * q;
        return q
               * (((((((2509.0809287301226727 * r + 33430.575583588128105) * r
                       + 67265.770927008700853) * r + 45921.953931549871457) * r
                     + 13731.693765509461125) * r + 1971.5909503065514427) * r
                   + 133.14166789178437745) * r + 3.387132872796366608)
               / (((((((5226.495278852545925 * r + 28729.085735721942674) * r
                       + 39307.89580009271061) * r + 21213.794301586595867) * r
                     + 5394.1960214247511077) * r + 687.1870074920579083) * r
                   + 42.313330701600911252) * r + 1.0);
    }
    double r = q < 0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r
                    + 0.24178072517745061177) * r + 1.27045825245236838258) * r
                  + 3.64784832476320460504) * r + 5.7694972214606914055) * r
                + 4.6303378461565452959) * r + 1.42343711074968357734)
              / (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r
                      + 0.0151986665636164571966) * r + 0.14810397642748007459) * r
                    + 0.68976733498510000455) * r + 1.6763848301838038494) * r
                  + 2.05319162663775882187) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 0.0012426609473880784386) * r + 0.026532189526576123093) * r
                  + 0.29656057182850489123) * r + 1.7848265399172913358) * r
                + 5.4637849111641143699) * r + 6.6579046435011037772)
              / (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r
                      + 1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r
                    + 0.0148753612908506148525) * r + 0.13692988092273580531) * r
                  + 0.59983220655588793769) * r + 1.0);
    }
    return q < 0 ? -val : val;
}

double chi2_4_cdf(double x)
{
    if (x <= 0) {
        return 0.0;
    }
    // -expm1 keeps precision for small x where the CDF is ~x^2/8.
    double const h = 0.5 * x;
    return -std::expm1(-h) - h * std::exp(-h);
}

double chi2_4_quantile(double p)
{
    if (!(p > 0.0 && p < 1.0)) {
        throw std::domain_error("chi2_4_quantile: p must lie in (0, 1)");
    }
    double lo = 0.0;
    double hi = 1.0;
    while (chi2_4_cdf(hi) < p) {
        hi *= 2.0;
        if (hi > 1e4) {
            break;
        }
    }
    for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++it) {
        double const mid = 0.5 * (lo + hi);
        if (chi2_4_cdf(mid) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double RegressionFit::linear_predictor(std::vector<double> const& x) const
{
    double eta = coefficients[0];
    for (std::size_t j = 0; j < x.size(); ++j) {
        eta += coefficients[static_cast<Eigen::Index>(j + 1)] * x[j];
    }
    return eta;
}

namespace {

Eigen::MatrixXd with_intercept(Eigen::MatrixXd const& design)
{
    Eigen::MatrixXd x(design.rows(), design.cols() + 1);
    x.col(0).setOnes();
    x.rightCols(design.cols()) = design;
    return x;
}

void check_finite(Eigen::MatrixXd const& design, Eigen::VectorXd const& outcome,
                  char const* who)
{
    if (design.rows() != outcome.size()) {
        throw std::invalid_argument(std::string(who) + ": design/outcome row mismatch");
    }
    if (design.rows() < design.cols() + 2) {
        throw std::invalid_argument(std::string(who)
                                    + ": need at least columns + 2 rows (intercept included)");
    }
    if (!design.allFinite() || !outcome.allFinite()) {
        throw std::invalid_argument(std::string(who) + ": non-finite entries");
    }
}

}  // namespace

RegressionFit fit_linear(Eigen::MatrixXd const& design, Eigen::VectorXd const& outcome)
{
    check_finite(design, outcome, "fit_linear");
    Eigen::MatrixXd const x = with_intercept(design);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    if (qr.rank() < x.cols()) {
        // Report the first column, in design order, spanned by the ones before it.
        std::size_t col = static_cast<std::size_t>(x.cols() - 1);
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> head(x.leftCols(j + 1));
            head.setThreshold(1e-10);
            if (head.rank() <= j) {
                col = static_cast<std::size_t>(j);
                break;
            }
        }
        std::ostringstream msg;
        msg << "fit_linear: singular design, column " << col << " is linearly dependent"
            << (col == 0 ? " (intercept)" : "");
        throw SingularDesignError(col, msg.str());
    }
    RegressionFit fit;
    fit.coefficients = qr.solve(outcome);
    fit.fitted = x * fit.coefficients;
    fit.residuals = outcome - fit.fitted;
    fit.converged = true;
    fit.iterations = 1;
    return fit;
}

RegressionFit fit_logistic(Eigen::MatrixXd const& design, Eigen::VectorXd const& labels)
{
    check_finite(design, labels, "fit_logistic");
    Eigen::Index positives = 0;
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0.0 && labels[i] != 1.0) {
            throw std::invalid_argument("fit_logistic: labels must be 0 or 1");
        }
        positives += labels[i] == 1.0;
    }
    if (positives == 0 || positives == labels.size()) {
        throw NumericalError("fit_logistic: labels contain a single class");
    }

    constexpr double kRidge = 1e-8;
    constexpr double kTol = 1e-8;
    constexpr int kMaxIter = 100;

    Eigen::MatrixXd const x = with_intercept(design);
    Eigen::Index const p = x.cols();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd prob(x.rows());

    RegressionFit fit;
    for (int it = 1; it <= kMaxIter; ++it) {
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            prob[i] = expit(eta[i]);
        }
        Eigen::VectorXd const w = prob.array() * (1.0 - prob.array());
        // Working response times weight: W z = W eta + (y - p).
        Eigen::VectorXd const wz = w.cwiseProduct(eta) + (labels - prob);
        Eigen::MatrixXd xtwx = x.transpose() * w.asDiagonal() * x;
        // Relative ridge: keeps LDLT stable as weights vanish under separation
        // without capping the coefficients.
        xtwx.diagonal().array() += kRidge * xtwx.diagonal().maxCoeff();
        Eigen::VectorXd const next = xtwx.ldlt().solve(x.transpose() * wz);
        double const change = (next - beta).cwiseAbs().maxCoeff();
        beta = next;
        eta = x * beta;
        fit.iterations = it;
        if (!beta.allFinite()) {
            throw NumericalError("fit_logistic: IRLS diverged");
        }
        if (change < kTol) {
            fit.converged = true;
            break;
        }
    }
    fit.coefficients = beta;
    fit.fitted.resize(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        fit.fitted[i] = std::clamp(expit(eta[i]), 1e-15, 1.0 - 1e-15);
    }
    fit.residuals = labels - fit.fitted;
    // IRLS under separation creeps outwards slowly, so a non-converged fit that
    // already reproduces every label counts as separated too.
    fit.quasi_separated = beta.cwiseAbs().maxCoeff() > 30.0
                          || (!fit.converged && fit.residuals.cwiseAbs().maxCoeff() < 1e-6);
    return fit;
}

double find_root(std::function<double(double)> const& f, double lo, double hi,
                 RootOptions const& opts)
{
    if (!(lo < hi)) {
        std::swap(lo, hi);
    }
    double flo = f(lo);
    double fhi = f(hi);
    int expansions = 0;
    while ((flo > 0) == (fhi > 0) && flo != 0 && fhi != 0) {
        if (expansions++ >= opts.max_expansions) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "find_root: no sign change on [" << lo << ", " << hi << "] (f = " << flo
                << ", " << fhi << ")";
            throw NumericalError(msg.str());
        }
        double const center = 0.5 * (lo + hi);
        double const half = hi - lo;
        lo = center - half;
        hi = center + half;
        flo = f(lo);
        fhi = f(hi);
    }
    if (flo == 0) {
        return lo;
    }
    if (fhi == 0) {
        return hi;
    }
    bool const rising = fhi > 0;
    for (int it = 0; it < opts.max_iterations && hi - lo > opts.tol; ++it) {
        double const mid = 0.5 * (lo + hi);
        double const fm = f(mid);
        if (fm == 0) {
            return mid;
        }
        if ((fm > 0) == rising) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double mean(std::vector<double> const& v)
{
    if (v.empty()) {
        return 0.0;
    }
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s / static_cast<double>(v.size());
}

double sample_variance(std::vector<double> const& v)
{
    if (v.size() < 2) {
        return 0.0;
    }
    double const m = mean(v);
    double ss = 0.0;
    for (double x : v) {
        ss += (x - m) * (x - m);
    }
    return ss / static_cast<double>(v.size() - 1);
}

}  // namespace cfuse
