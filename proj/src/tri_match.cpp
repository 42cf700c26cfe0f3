#include "cfuse/tri_match.hpp"

#include <algorithm>
#include <cmath>

#include "cfuse/assignment.hpp"
#include "cfuse/error.hpp"
#include "cfuse/stat_kernel.hpp"

namespace cfuse {

MahalanobisMetric::MahalanobisMetric(std::vector<std::vector<double>> const& reference)
{
    if (reference.size() < 2) {
        throw InputError("mahalanobis: need at least two reference units");
    }
    auto const p = static_cast<Eigen::Index>(reference.front().size());
    Eigen::MatrixXd x(static_cast<Eigen::Index>(reference.size()), p);
    for (std::size_t i = 0; i < reference.size(); ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            double const v = reference[i][static_cast<std::size_t>(j)];
            if (!std::isfinite(v)) {
                throw InputError("mahalanobis: non-finite covariate");
            }
            x(static_cast<Eigen::Index>(i), j) = v;
        }
    }
    Eigen::MatrixXd const centered = x.rowwise() - x.colwise().mean();
    Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
    double const ridge = 1e-6 * cov.trace() / static_cast<double>(p);
    cov.diagonal().array() += ridge > 0 ? ridge : 1e-12;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("mahalanobis: covariance not positive definite");
    }
    chol_l_ = llt.matrixL();
}

MahalanobisMetric MahalanobisMetric::from_os(StudyData const& data)
{
    std::vector<std::vector<double>> ref;
    for (auto const& r : data.records()) {
        if (r.source == Source::kOs) {
            ref.push_back(r.x);
        }
    }
    return MahalanobisMetric(ref);
}

MahalanobisMetric MahalanobisMetric::identity(std::size_t dim)
{
    MahalanobisMetric m;
    m.chol_l_ = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim),
                                          static_cast<Eigen::Index>(dim));
    return m;
}

Eigen::VectorXd MahalanobisMetric::whiten(std::vector<double> const& x) const
{
    if (x.size() != dim()) {
        throw std::invalid_argument("mahalanobis: covariate dimension mismatch");
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(x.size()));
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (!std::isfinite(x[j])) {
            throw InputError("mahalanobis: non-finite covariate");
        }
        v[static_cast<Eigen::Index>(j)] = x[j];
    }
    return chol_l_.triangularView<Eigen::Lower>().solve(v);
}

double MahalanobisMetric::distance(std::vector<double> const& a, std::vector<double> const& b) const
{
    return (whiten(a) - whiten(b)).norm();
}

Eigen::MatrixXd mahalanobis_matrix(std::vector<std::vector<double> const*> const& rows,
                                   std::vector<std::vector<double> const*> const& cols,
                                   MahalanobisMetric const& metric)
{
    auto whiten_all = [&](std::vector<std::vector<double> const*> const& units) {
        std::vector<std::optional<Eigen::VectorXd>> out;
        out.reserve(units.size());
        for (auto const* u : units) {
            out.push_back(u ? std::optional(metric.whiten(*u)) : std::nullopt);
        }
        return out;
    };
    auto const wr = whiten_all(rows);
    auto const wc = whiten_all(cols);
    Eigen::MatrixXd d(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
            d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                (wr[i] && wc[j]) ? (*wr[i] - *wc[j]).norm() : 0.0;
        }
    }
    return d;
}

double smd(std::vector<double> const& group_a, std::vector<double> const& group_b)
{
    if (group_a.empty() || group_b.empty()) {
        return 0.0;
    }
    double const diff = std::fabs(mean(group_a) - mean(group_b));
    double const pooled = std::sqrt(0.5 * (sample_variance(group_a) + sample_variance(group_b)));
    if (pooled == 0.0) {
        return diff == 0.0 ? 0.0 : 1e6;
    }
    return diff / pooled;
}

namespace {

struct Groups {
    std::vector<std::size_t> treated;
    std::vector<std::size_t> control;
    std::vector<std::size_t> rct;  // may repeat (one per set)
};

std::vector<double> column(StudyData const& data, std::vector<std::size_t> const& idx,
                           std::size_t j)
{
    std::vector<double> v;
    v.reserve(idx.size());
    for (auto i : idx) {
        v.push_back(data.records()[i].x[j]);
    }
    return v;
}

}  // namespace

BalanceReport balance_report(StudyData const& data, std::vector<MatchedSet> const& sets)
{
    std::array<Groups, 2> before;
    std::array<Groups, 2> after;
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto const& r = data.records()[i];
        int const d = r.in_overlap ? BalanceReport::kOverlap : BalanceReport::kNonOverlap;
        if (r.source == Source::kRct) {
            before[BalanceReport::kOverlap].rct.push_back(i);
        } else if (r.z == 1) {
            before[d].treated.push_back(i);
        } else {
            before[d].control.push_back(i);
        }
    }
    for (auto const& s : sets) {
        auto& g = after[s.in_overlap ? BalanceReport::kOverlap : BalanceReport::kNonOverlap];
        g.treated.push_back(s.treated_index);
        g.control.insert(g.control.end(), s.control_indices.begin(), s.control_indices.end());
        if (s.rct_index) {
            g.rct.push_back(*s.rct_index);
        }
    }

    BalanceReport report;
    char const* domain_names[2] = {"overlap", "nonoverlap"};
    for (int d = 0; d < 2; ++d) {
        if (before[d].treated.empty()) {
            continue;
        }
        report.has_domain[d] = true;
        struct Contrast {
            char const* name;
            std::vector<std::size_t> Groups::*a;
            std::vector<std::size_t> Groups::*b;
        };
        Contrast const contrasts[3] = {
            {"os_treated_vs_rct", &Groups::treated, &Groups::rct},
            {"os_control_vs_rct", &Groups::control, &Groups::rct},
            {"os_treated_vs_os_control", &Groups::treated, &Groups::control},
        };
        for (auto const& c : contrasts) {
            if ((before[d].*c.a).empty() || (before[d].*c.b).empty()) {
                continue;
            }
            for (std::size_t j = 0; j < data.dim(); ++j) {
                BalanceEntry e;
                e.domain = domain_names[d];
                e.contrast = c.name;
                e.covariate = data.covariate_names()[j];
                e.before = smd(column(data, before[d].*c.a, j), column(data, before[d].*c.b, j));
                e.after = smd(column(data, after[d].*c.a, j), column(data, after[d].*c.b, j));
                report.max_abs_before[d] = std::max(report.max_abs_before[d], e.before);
                report.max_abs_after[d] = std::max(report.max_abs_after[d], e.after);
                report.entries.push_back(std::move(e));
            }
        }
    }
    return report;
}

MatchResult match_triplets(StudyData const& data, CopyPlan const& plan,
                           std::size_t controls_per_set)
{
    if (controls_per_set == 0) {
        throw InputError("match_triplets: controls_per_set must be at least 1");
    }
    auto const& recs = data.records();
    std::vector<std::size_t> treated_in;
    std::vector<std::size_t> treated_out;
    std::vector<std::size_t> controls;  // overlap controls first, then the rest
    std::vector<std::size_t> controls_out;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        auto const& r = recs[i];
        if (r.source != Source::kOs) {
            continue;
        }
        if (r.z == 1) {
            (r.in_overlap ? treated_in : treated_out).push_back(i);
        } else {
            (r.in_overlap ? controls : controls_out).push_back(i);
        }
    }
    std::size_t const n_controls_in = controls.size();
    controls.insert(controls.end(), controls_out.begin(), controls_out.end());

    if (plan.n_o1_plus != treated_in.size()) {
        throw std::invalid_argument("match_triplets: copy plan does not match this study");
    }
    std::size_t const anchors = treated_in.size() + treated_out.size();
    if (anchors * controls_per_set > controls.size()) {
        throw NumericalError("match_triplets: not enough OS controls: need "
                             + std::to_string(anchors * controls_per_set) + ", have "
                             + std::to_string(controls.size()) + " (shortfall "
                             + std::to_string(anchors * controls_per_set - controls.size()) + ")");
    }

    MahalanobisMetric const metric = MahalanobisMetric::from_os(data);
    MatchResult result;

    // Pass A: RCT copies x (overlap OS treated + imaginary treated).
    std::vector<std::size_t> copy_record;
    for (auto const& u : plan.units) {
        for (int c = 0; c < u.copies; ++c) {
            copy_record.push_back(u.record_index);
        }
    }
    std::vector<std::optional<std::size_t>> rct_of_treated(treated_in.size());
    if (!treated_in.empty()) {
        if (copy_record.size() < treated_in.size()) {
            throw std::invalid_argument("match_triplets: fewer RCT copies than overlap treated");
        }
        std::vector<std::vector<double> const*> rows;
        for (auto i : copy_record) {
            rows.push_back(&recs[i].x);
        }
        std::vector<std::vector<double> const*> cols;
        for (auto i : treated_in) {
            cols.push_back(&recs[i].x);
        }
        cols.resize(copy_record.size(), nullptr);
        Eigen::MatrixXd const cost = mahalanobis_matrix(rows, cols, metric);
        auto const assign = solve_assignment(cost);
        result.pass_a_cost = assign.total_cost;
        for (std::size_t r = 0; r < copy_record.size(); ++r) {
            std::size_t const col = assign.column_of_row[r];
            if (col < treated_in.size()) {
                rct_of_treated[col] = copy_record[r];
            }
        }
    }

    // Pass B: anchor slots x OS controls. Outside the overlap the metric comes
    // from that domain's OS units, whose spread is truncated by the overlap rule.
    std::vector<std::vector<double>> out_ref;
    for (auto i : treated_out) out_ref.push_back(recs[i].x);
    for (auto i : controls_out) out_ref.push_back(recs[i].x);
    std::optional<MahalanobisMetric> metric_out;
    if (!treated_out.empty() && out_ref.size() >= data.dim() + 2) {
        try {
            metric_out.emplace(out_ref);
        } catch (NumericalError const&) {
            // degenerate domain: keep the pooled metric
        }
    }
    MahalanobisMetric const& outside = metric_out ? *metric_out : metric;
    std::vector<Eigen::VectorXd> wc;
    std::vector<Eigen::VectorXd> wc_out;
    wc.reserve(controls.size());
    for (auto i : controls) {
        wc.push_back(metric.whiten(recs[i].x));
        wc_out.push_back(outside.whiten(recs[i].x));
    }
    struct Anchor {
        std::size_t treated;
        std::optional<std::size_t> rct;
        bool in_overlap;
    };
    std::vector<Anchor> anchor_list;
    for (std::size_t t = 0; t < treated_in.size(); ++t) {
        anchor_list.push_back({treated_in[t], rct_of_treated[t], true});
    }
    for (auto t : treated_out) {
        anchor_list.push_back({t, std::nullopt, false});
    }
    auto const n_slots = static_cast<Eigen::Index>(anchors * controls_per_set);
    Eigen::MatrixXd cost(n_slots, static_cast<Eigen::Index>(controls.size()));
    double max_cost = 0.0;
    for (std::size_t a = 0; a < anchor_list.size(); ++a) {
        bool const inside = anchor_list[a].in_overlap;
        auto const& w = inside ? wc : wc_out;
        Eigen::VectorXd const wt = (inside ? metric : outside).whiten(recs[anchor_list[a].treated].x);
        std::optional<Eigen::VectorXd> wr;
        if (anchor_list[a].rct) {
            wr = metric.whiten(recs[*anchor_list[a].rct].x);
        }
        for (std::size_t c = 0; c < controls.size(); ++c) {
            double d = (w[c] - wt).norm();
            if (wr) {
                d += (wc[c] - *wr).norm();
            }
            max_cost = std::max(max_cost, d);
            for (std::size_t k = 0; k < controls_per_set; ++k) {
                cost(static_cast<Eigen::Index>(a * controls_per_set + k),
                     static_cast<Eigen::Index>(c)) = d;
            }
        }
    }
    double const penalty = 10.0 * max_cost;
    for (std::size_t a = 0; a < anchor_list.size(); ++a) {
        for (std::size_t c = 0; c < controls.size(); ++c) {
            bool const control_in = c < n_controls_in;
            if (control_in != anchor_list[a].in_overlap) {
                for (std::size_t k = 0; k < controls_per_set; ++k) {
                    cost(static_cast<Eigen::Index>(a * controls_per_set + k),
                         static_cast<Eigen::Index>(c)) += penalty;
                }
            }
        }
    }
    auto const assign_b = solve_assignment(cost);
    result.pass_b_cost = assign_b.total_cost;

    int next_id = 1;
    for (std::size_t a = 0; a < anchor_list.size(); ++a) {
        MatchedSet s;
        s.set_id = next_id++;
        s.treated_index = anchor_list[a].treated;
        s.treated_id = recs[s.treated_index].id;
        s.in_overlap = anchor_list[a].in_overlap;
        s.rct_index = anchor_list[a].rct;
        if (s.rct_index) {
            s.rct_id = recs[*s.rct_index].id;
        }
        for (std::size_t k = 0; k < controls_per_set; ++k) {
            std::size_t const c = controls[assign_b.column_of_row[a * controls_per_set + k]];
            s.control_indices.push_back(c);
        }
        std::sort(s.control_indices.begin(), s.control_indices.end());
        for (auto c : s.control_indices) {
            s.control_ids.push_back(recs[c].id);
        }
        result.sets.push_back(std::move(s));
    }
    result.balance = balance_report(data, result.sets);
    return result;
}

}  // namespace cfuse
