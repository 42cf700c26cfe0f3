#include "cfuse/sim_lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cfuse/error.hpp"
#include "cfuse/pipeline.hpp"
#include "cfuse/stat_kernel.hpp"

namespace cfuse {

char const* to_string(OverlapRegime r)
{
    switch (r) {
    case OverlapRegime::kAll: return "all";
    case OverlapRegime::kMajority: return "majority";
    case OverlapRegime::kLimited: return "limited";
    }
    return "all";
}

OverlapRegime parse_regime(std::string const& text)
{
    std::string t;
    for (char c : text) {
        t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (t == "all") return OverlapRegime::kAll;
    if (t == "majority") return OverlapRegime::kMajority;
    if (t == "limited") return OverlapRegime::kLimited;
    throw InputError("unknown overlap regime '" + text + "' (expected all, majority or limited)");
}

double regime_threshold(OverlapRegime r)
{
    switch (r) {
    case OverlapRegime::kAll: return -std::numeric_limits<double>::infinity();
    case OverlapRegime::kMajority: return -1.0;
    case OverlapRegime::kLimited: return 0.0;
    }
    return 0.0;
}

void ScenarioSpec::validate() const
{
    auto fail = [](std::string const& m) { throw InputError("scenario: " + m); };
    if (n_total < 20) fail("n_total must be at least 20");
    if (!(delta_star >= 0.0) || !std::isfinite(delta_star)) fail("delta_star must be >= 0");
    if (!(gamma_star >= 1.0) || !std::isfinite(gamma_star)) fail("gamma_star must be >= 1");
    if (overlap == OverlapRegime::kAll && delta_star > 0.0) {
        fail("delta_star > 0 needs partial overlap (all-overlap has no out-of-overlap treated)");
    }
    if (replications < 1) fail("replications must be >= 1");
    if (!(alpha > 0.0 && alpha < 0.5)) fail("alpha must lie in (0, 0.5)");
    if (mc_samples < 99) fail("mc_samples must be >= 99");
    if (controls_per_set < 1) fail("controls_per_set must be >= 1");
    if (effect_tau && !std::isfinite(*effect_tau)) fail("tau must be finite");
    for (double g : analysis_gamma) {
        if (!(g >= 1.0) || !std::isfinite(g)) fail("analysis gamma must be >= 1");
    }
    for (double d : analysis_delta) {
        if (!(d >= 0.0) || !std::isfinite(d)) fail("analysis delta must be >= 0");
    }
}

std::vector<double> ScenarioSpec::gammas() const
{
    return analysis_gamma.empty() ? std::vector<double>{gamma_star} : analysis_gamma;
}

std::vector<double> ScenarioSpec::deltas() const
{
    return analysis_delta.empty() ? std::vector<double>{delta_star} : analysis_delta;
}

SimulatedStudy generate(ScenarioSpec const& spec, SeededRng& rng)
{
    spec.validate();
    double const threshold = regime_threshold(spec.overlap);
    double const log_gamma = std::log(spec.gamma_star);
    double const tau = spec.effect_tau.value_or(0.0);

    struct Draw {
        std::vector<double> x;
        bool in_overlap;
        bool rct;
        int z;
        double y0;
    };
    std::vector<Draw> draws(spec.n_total);
    std::size_t os_treated = 0;
    std::size_t os_treated_out = 0;
    for (auto& d : draws) {
        d.x.resize(5);
        for (double& v : d.x) {
            v = rng.normal();
        }
        double const u = rng.normal();
        double const eps = rng.normal();
        d.in_overlap = d.x[0] >= threshold;
        d.rct = d.in_overlap
                && rng.bernoulli(expit(-1.5 + 0.1 * d.x[0] + 0.1 * d.x[1] - 0.3 * d.x[3]));
        if (d.rct) {
            d.z = rng.bernoulli(0.5) ? 1 : 0;
        } else {
            d.z = rng.bernoulli(expit(-2.0 - 0.3 * d.x[0] + 0.1 * d.x[2] - 0.2 * d.x[4]
                                      + log_gamma * u))
                      ? 1
                      : 0;
            if (d.z) {
                ++os_treated;
                os_treated_out += d.in_overlap ? 0 : 1;
            }
        }
        d.y0 = 10.0 + 4.0 * d.x[0] - 2.0 * d.x[1] + 3.0 * d.x[4] + u + eps;
    }
    if (os_treated == 0) {
        throw NumericalError("generate: no OS treated units drawn");
    }

    SimulatedStudy out;
    out.out_of_overlap_fraction = static_cast<double>(os_treated_out) / static_cast<double>(os_treated);
    if (spec.delta_star > 0.0) {
        if (os_treated_out == 0) {
            throw NumericalError("generate: no OS treated unit outside the overlap region");
        }
        out.delta_tilde = spec.delta_star / out.out_of_overlap_fraction;
    }

    std::vector<UnitRecord> records;
    records.reserve(draws.size());
    double effect_sum = 0.0;
    for (std::size_t i = 0; i < draws.size(); ++i) {
        auto& d = draws[i];
        double const effect = (d.in_overlap ? out.delta_tilde : 0.0) + tau;
        UnitRecord r;
        r.id = "u" + std::to_string(i + 1);
        r.source = d.rct ? Source::kRct : Source::kOs;
        r.z = d.z;
        r.y = d.y0 + (d.z ? effect : 0.0);
        r.x = std::move(d.x);
        r.in_overlap = d.in_overlap;
        if (!d.rct && d.z) {
            effect_sum += effect;
        }
        records.push_back(std::move(r));
    }
    out.true_atot = effect_sum / static_cast<double>(os_treated);
    out.data = StudyData(std::move(records), {"x1", "x2", "x3", "x4", "x5"});
    return out;
}

ReplicationRecord run_replication(ScenarioSpec const& spec, std::size_t r)
{
    ReplicationRecord rec;
    rec.index = r;
    try {
        SeededRng const root(spec.base_seed, r);
        SeededRng gen_rng = root.substream(1);
        SimulatedStudy sim = generate(spec, gen_rng);
        rec.truth = sim.true_atot;

        PipelineOptions options;
        options.controls_per_set = spec.controls_per_set;
        options.rct_scheme = spec.analysis_scheme;
        double const threshold = regime_threshold(spec.overlap);
        options.overlap = OverlapRule::unbounded();
        if (std::isfinite(threshold)) {
            options.overlap.bounds.push_back({0, threshold});
        }
        MatchedStudy const study = build_matched_study(sim.data, options);
        auto const& bal = study.match.balance;
        rec.has_domain = bal.has_domain;
        rec.smd_before = bal.max_abs_before;
        rec.smd_after = bal.max_abs_after;

        LadderEngine engine(study, spec.mc_samples, root.substream(2), false);
        for (double d : spec.deltas()) {
            IntervalResult const rct = engine.rct_interval(d, spec.alpha);
            for (double g : spec.gammas()) {
                IntervalResult const os = engine.os_interval(g, spec.alpha);
                CombinedResult const comb = engine.combined(g, d, spec.alpha);
                CellResult cell;
                cell.gamma = g;
                cell.delta = d;
                cell.lower = {rct.lower, os.lower, comb.lower};
                cell.upper = {rct.upper, os.upper, comb.upper};
                rec.cells.push_back(cell);
            }
        }
        rec.ok = true;
    } catch (std::exception const& e) {
        rec.ok = false;
        rec.error = e.what();
        rec.cells.clear();
    }
    return rec;
}

std::vector<ReplicationRecord> run_replications_serial(ScenarioSpec const& spec)
{
    spec.validate();
    std::vector<ReplicationRecord> out(spec.replications);
    for (std::size_t r = 0; r < spec.replications; ++r) {
        out[r] = run_replication(spec, r);
    }
    return out;
}

std::vector<ReplicationRecord> run_replications_parallel(ScenarioSpec const& spec,
                                                         ProgressFn const& progress)
{
    spec.validate();
    std::vector<ReplicationRecord> out(spec.replications);
    auto const n = static_cast<std::int64_t>(spec.replications);
    std::size_t done = 0;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t r = 0; r < n; ++r) {
        out[static_cast<std::size_t>(r)] = run_replication(spec, static_cast<std::size_t>(r));
        if (progress) {
#pragma omp critical(cfuse_progress)
            progress(++done, spec.replications);
        }
    }
    return out;
}

ScenarioReport summarize(ScenarioSpec const& spec, std::vector<ReplicationRecord> records)
{
    std::sort(records.begin(), records.end(),
              [](auto const& a, auto const& b) { return a.index < b.index; });
    ScenarioReport rep;
    rep.spec = spec;
    char const* names[3] = {"rct", "os", "combined"};
    std::vector<double> const gammas = spec.gammas();
    std::vector<double> const deltas = spec.deltas();
    std::size_t const n_cells = gammas.size() * deltas.size();
    for (std::size_t m = 0; m < 3; ++m) {
        for (double d : deltas) {
            for (double g : gammas) {
                rep.summaries.push_back({names[m], g, d, 0, 0.0, 0.0, 0.0});
            }
        }
    }
    std::array<std::size_t, 2> domain_count{0, 0};
    for (auto const& rec : records) {
        if (!rec.ok) {
            ++rep.failures;
            continue;
        }
        for (std::size_t m = 0; m < 3; ++m) {
            for (std::size_t c = 0; c < n_cells; ++c) {
                auto& s = rep.summaries[m * n_cells + c];
                auto const& cell = rec.cells[c];
                double const lo = cell.lower[m];
                double const hi = cell.upper[m];
                ++s.count;
                s.coverage += (lo <= rec.truth && rec.truth <= hi) ? 1.0 : 0.0;
                s.mean_length += hi - lo;
                s.rejection_rate += (lo > 0.0 || hi < 0.0) ? 1.0 : 0.0;
            }
        }
        for (int d = 0; d < 2; ++d) {
            if (rec.has_domain[d]) {
                ++domain_count[d];
                rep.mean_smd_before[d] += rec.smd_before[d];
                rep.mean_smd_after[d] += rec.smd_after[d];
            }
        }
    }
    for (auto& s : rep.summaries) {
        if (s.count) {
            double const n = static_cast<double>(s.count);
            s.coverage /= n;
            s.mean_length /= n;
            s.rejection_rate /= n;
        }
    }
    for (int d = 0; d < 2; ++d) {
        if (domain_count[d]) {
            rep.mean_smd_before[d] /= static_cast<double>(domain_count[d]);
            rep.mean_smd_after[d] /= static_cast<double>(domain_count[d]);
        }
    }
    rep.failed = static_cast<double>(rep.failures) > 0.02 * static_cast<double>(records.size());
    rep.replications = std::move(records);
    return rep;
}

MethodSummary const& ScenarioReport::summary(std::string const& method, double gamma,
                                             double delta) const
{
    for (auto const& s : summaries) {
        if (s.method == method && std::fabs(s.gamma - gamma) < 1e-12
            && std::fabs(s.delta - delta) < 1e-12) {
            return s;
        }
    }
    throw std::out_of_range("scenario report: no summary for " + method);
}

ScenarioReport run_scenario(ScenarioSpec const& spec, bool parallel, ProgressFn const& progress)
{
    return summarize(spec, parallel ? run_replications_parallel(spec, progress)
                                    : run_replications_serial(spec));
}

}  // namespace cfuse
