#include "cfuse/os_sens.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cfuse/error.hpp"
#include "cfuse/pvalue_curve.hpp"
#include "cfuse/stat_kernel.hpp"

namespace cfuse {

namespace {

struct EtaChoice {
    std::size_t m = 0;   // number of sorted outcomes at the low probability
    double low = 0.0;
    double high = 0.0;
    double mu = 0.0;
};

/// Best separable candidate for outcomes already sorted ascending.
EtaChoice best_candidate(double const* sorted, std::size_t j, double gamma)
{
    EtaChoice best;
    if (j < 2) {
        best.m = j;
        best.low = best.high = 1.0;
        best.mu = j ? sorted[0] : 0.0;
        return best;
    }
    double total = 0.0;
    double total_sq = 0.0;
    for (std::size_t k = 0; k < j; ++k) {
        total += sorted[k];
        total_sq += sorted[k] * sorted[k];
    }
    double best_var = -1.0;
    bool have = false;
    double prefix = 0.0;
    double prefix_sq = 0.0;
    for (std::size_t m = 1; m < j; ++m) {
        prefix += sorted[m - 1];
        prefix_sq += sorted[m - 1] * sorted[m - 1];
        double const low = 1.0 / (static_cast<double>(m) + static_cast<double>(j - m) * gamma);
        double const high = gamma * low;
        double const mu = low * prefix + high * (total - prefix);
        double const var = low * prefix_sq + high * (total_sq - prefix_sq) - mu * mu;
        if (!have || mu > best.mu + 1e-12
            || (std::fabs(mu - best.mu) <= 1e-12 && var > best_var)) {
            best = {m, low, high, mu};
            best_var = var;
            have = true;
        }
    }
    return best;
}

void validate_gamma(double gamma)
{
    if (!(gamma >= 1.0) || !std::isfinite(gamma)) {
        throw std::domain_error("gamma must be a finite value >= 1");
    }
}

OsTestResult summarize(double const* tau, std::size_t count, Direction direction)
{
    if (count < 2) {
        throw InputError("os_test: need at least two matched sets");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        sum += tau[i];
    }
    double const n = static_cast<double>(count);
    double const avg = sum / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        ss += (tau[i] - avg) * (tau[i] - avg);
    }
    OsTestResult r;
    r.direction = direction;
    r.statistic = avg;
    r.se = std::sqrt(ss / (n * (n - 1.0)));
    if (!(r.se > 0.0)) {
        throw NumericalError("os_test: zero standard error (all tilde tau equal)");
    }
    r.z_score = r.statistic / r.se;
    r.p_value = 1.0 - normal_cdf(r.z_score);
    return r;
}

}  // namespace

EtaVector separable_eta(SetOutcomes const& set, double gamma)
{
    validate_gamma(gamma);
    std::size_t const j = set.size();
    std::vector<std::size_t> order(j);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return set.adjusted[a] < set.adjusted[b]; });
    std::vector<double> sorted(j);
    for (std::size_t k = 0; k < j; ++k) {
        sorted[k] = set.adjusted[order[k]];
    }
    EtaChoice const c = best_candidate(sorted.data(), j, gamma);
    EtaVector eta;
    eta.probs.assign(j, 0.0);
    for (std::size_t k = 0; k < j; ++k) {
        eta.probs[order[k]] = k < c.m ? c.low : c.high;
    }
    return eta;
}

double eta_mean(SetOutcomes const& set, EtaVector const& eta)
{
    double mu = 0.0;
    for (std::size_t k = 0; k < set.size(); ++k) {
        mu += eta.probs[k] * set.adjusted[k];
    }
    return mu;
}

double tilde_tau(SetOutcomes const& set, EtaVector const& eta)
{
    std::size_t const j = set.size();
    if (j < 2 || eta.probs.size() != j || set.treated_index >= j) {
        throw std::invalid_argument("tilde_tau: set and eta sizes disagree");
    }
    double total = 0.0;
    for (double v : set.adjusted) {
        total += v;
    }
    double const jm1 = static_cast<double>(j - 1);
    double const treated = set.adjusted[set.treated_index];
    double const tau_hat = treated - (total - treated) / jm1;
    double const mu = eta_mean(set, eta);
    return tau_hat - (mu - (total - mu) / jm1);
}

OsTestResult os_test(std::vector<SetOutcomes> const& sets, double gamma, Direction direction)
{
    validate_gamma(gamma);
    std::vector<double> tau;
    tau.reserve(sets.size());
    for (auto const& s : sets) {
        if (direction == Direction::kUpper) {
            tau.push_back(tilde_tau(s, separable_eta(s, gamma)));
        } else {
            SetOutcomes neg = s;
            for (double& v : neg.adjusted) {
                v = -v;
            }
            tau.push_back(tilde_tau(neg, separable_eta(neg, gamma)));
        }
    }
    return summarize(tau.data(), tau.size(), direction);
}

OsDesign::OsDesign(std::vector<std::vector<double>> outcomes, std::vector<std::size_t> treated_index)
{
    if (outcomes.size() != treated_index.size()) {
        throw std::invalid_argument("OsDesign: outcome and treated lists differ in length");
    }
    offset_.push_back(0);
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i].size() < 2 || treated_index[i] >= outcomes[i].size()) {
            throw InputError("OsDesign: every set needs a treated unit and at least one control");
        }
        y_.insert(y_.end(), outcomes[i].begin(), outcomes[i].end());
        offset_.push_back(y_.size());
    }
    treated_ = std::move(treated_index);
}

OsDesign OsDesign::from_matches(StudyData const& data, std::vector<MatchedSet> const& sets)
{
    std::vector<std::vector<double>> outcomes;
    std::vector<std::size_t> treated;
    for (auto const& s : sets) {
        std::vector<double> ys{data.records()[s.treated_index].y};
        for (auto c : s.control_indices) {
            ys.push_back(data.records()[c].y);
        }
        outcomes.push_back(std::move(ys));
        treated.push_back(0);
    }
    return OsDesign(std::move(outcomes), std::move(treated));
}

std::vector<SetOutcomes> OsDesign::at(double beta0) const
{
    std::vector<SetOutcomes> out(num_sets());
    for (std::size_t i = 0; i < num_sets(); ++i) {
        out[i].adjusted.assign(y_.begin() + static_cast<std::ptrdiff_t>(offset_[i]),
                               y_.begin() + static_cast<std::ptrdiff_t>(offset_[i + 1]));
        out[i].adjusted[treated_[i]] -= beta0;
        out[i].treated_index = treated_[i];
    }
    return out;
}

OsTestResult OsDesign::test(double beta0, double gamma, Direction direction) const
{
    validate_gamma(gamma);
    thread_local std::vector<double> tau;
    thread_local std::vector<double> buf;
    tau.resize(num_sets());
    double const sign = direction == Direction::kUpper ? 1.0 : -1.0;
    for (std::size_t i = 0; i < num_sets(); ++i) {
        std::size_t const j = offset_[i + 1] - offset_[i];
        buf.resize(j);
        double total = 0.0;
        for (std::size_t k = 0; k < j; ++k) {
            double v = y_[offset_[i] + k];
            if (k == treated_[i]) {
                v -= beta0;
            }
            buf[k] = sign * v;
            total += buf[k];
        }
        double const treated = buf[treated_[i]];
        std::sort(buf.begin(), buf.end());
        double const jm1 = static_cast<double>(j - 1);
        double const mu = best_candidate(buf.data(), j, gamma).mu;
        tau[i] = treated - (total - treated) / jm1 - (mu - (total - mu) / jm1);
    }
    return summarize(tau.data(), tau.size(), direction);
}

double OsDesign::estimate() const
{
    double sum = 0.0;
    for (std::size_t i = 0; i < num_sets(); ++i) {
        std::size_t const j = offset_[i + 1] - offset_[i];
        double total = 0.0;
        for (std::size_t k = offset_[i]; k < offset_[i + 1]; ++k) {
            total += y_[k];
        }
        double const treated = y_[offset_[i] + treated_[i]];
        sum += treated - (total - treated) / static_cast<double>(j - 1);
    }
    return sum / static_cast<double>(num_sets());
}

double OsDesign::null_se() const
{
    return test(estimate(), 1.0, Direction::kUpper).se;
}

double OsDesign::outcome_sd() const
{
    return std::sqrt(sample_variance(y_));
}

double os_raw_p_value(OsDesign const& design, double beta0, double gamma, Direction direction)
{
    return design.test(beta0, gamma, direction).p_value;
}

double os_p_value(OsDesign const& design, double beta0, double gamma, Direction direction)
{
    EnvelopeCurve curve([&](double b) { return os_raw_p_value(design, b, gamma, direction); },
                        design.null_se(), direction);
    return curve(beta0);
}

IntervalResult os_ci(OsDesign const& design, double gamma, double alpha)
{
    if (!(alpha > 0.0 && alpha < 0.5)) {
        throw InputError("os_ci: alpha must lie in (0, 0.5)");
    }
    validate_gamma(gamma);
    double const zcrit = normal_quantile(1.0 - alpha);
    double const est = design.estimate();
    double const se = design.null_se();
    IntervalResult r;
    r.method = "os";
    r.alpha = alpha;
    r.gamma = gamma;
    r.estimate = est;
    RootOptions opts;
    opts.tol = 1e-8 * std::max(se, 1e-12);
    try {
        r.lower = find_root(
            [&](double b) { return design.test(b, gamma, Direction::kUpper).z_score - zcrit; },
            est - 4.0 * se, est + se, opts);
        r.upper = find_root(
            [&](double b) { return design.test(b, gamma, Direction::kLower).z_score - zcrit; },
            est - se, est + 4.0 * se, opts);
    } catch (NumericalError const& e) {
        throw NumericalError(std::string("os_ci: ") + e.what());
    }
    r.diagnostics["null_se"] = se;
    r.diagnostics["sets"] = static_cast<double>(design.num_sets());
    return r;
}

}  // namespace cfuse
