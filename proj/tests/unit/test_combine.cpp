#include <doctest.h>

#include <cmath>

#include "cfuse/combine.hpp"
#include "cfuse/error.hpp"
#include "cfuse/pipeline.hpp"
#include "cfuse/rng.hpp"
#include "cfuse/sim_lab.hpp"
#include "cfuse/stat_kernel.hpp"
#include "oracles.hpp"

using namespace cfuse;

namespace {

MatchedStudy simulated_study(std::uint64_t seed, OverlapRegime regime)
{
    ScenarioSpec spec;
    spec.overlap = regime;
    SeededRng rng(seed, 0);
    auto const sim = generate(spec, rng);
    PipelineOptions opt;
    opt.overlap = OverlapRule::unbounded();
    if (regime != OverlapRegime::kAll) {
        opt.overlap.bounds.push_back({0, regime_threshold(regime), std::numeric_limits<double>::infinity()});
    }
    opt.rct_scheme = RctScheme::kComplete;
    return build_matched_study(sim.data, opt);
}

bool contains(CombinedResult const& outer, CombinedResult const& inner, double tol)
{
    return outer.lower <= inner.lower + tol && outer.upper >= inner.upper - tol;
}

}  // namespace

TEST_SUITE("combine")
{
    TEST_CASE("kappa identity")
    {
        for (double a : {0.01, 0.05, 0.1, 0.2}) {
            double const k = kappa_alpha(a);
            CHECK(std::abs(k * (1 - std::log(k)) - a) < 1e-9);
            CHECK(k == doctest::Approx(oracle::kappa(a)).epsilon(1e-9));
        }
        CHECK(kappa_alpha(0.05) == doctest::Approx(0.008713).epsilon(1e-3));
        CHECK(kappa_alpha(0.999999) > 0.99);
        CHECK_THROWS_AS(kappa_alpha(0.0), std::domain_error);
        CHECK_THROWS_AS(kappa_alpha(1.0), std::domain_error);
    }

    TEST_CASE("product of two uniforms falls below kappa at rate alpha")
    {
        SeededRng rng(1, 0);
        double const k = kappa_alpha(0.05);
        int const n = 200000;
        int hits = 0;
        for (int i = 0; i < n; ++i) hits += rng.uniform() * rng.uniform() <= k;
        CHECK(std::abs(static_cast<double>(hits) / n - 0.05) < 4 * std::sqrt(0.05 * 0.95 / n));
    }

    TEST_CASE("acceptance arithmetic")
    {
        double const k = kappa_alpha(0.05);
        CHECK(0.2 * 0.1 >= k);
        CHECK(0.05 * 0.05 < k);
        // Each factor alone at its boundary still rejects in combination.
        GridSpec g;
        g.center = 0.0;
        g.half_width = 1.0;
        auto const flat_reject = [](double) { return 0.05; };
        CHECK_THROWS_AS(combined_limit(flat_reject, flat_reject, k, Direction::kUpper, g), NumericalError);
        auto const one = [](double) { return 1.0; };
        CHECK_THROWS_AS(combined_limit(one, one, k, Direction::kUpper, g), NumericalError);
    }

    TEST_CASE("one constant factor reduces to the other at the cutoff")
    {
        double const k = kappa_alpha(0.025);
        auto const up = [](double b) { return normal_cdf(b); };
        auto const down = [](double b) { return 1 - normal_cdf(b); };
        auto const one = [](double) { return 1.0; };
        GridSpec g;
        g.center = 0.0;
        g.half_width = 4.0;
        g.tol = 1e-10;
        auto const lo = combined_limit(up, one, k, Direction::kUpper, g);
        CHECK(lo.value == doctest::Approx(normal_quantile(k)).epsilon(1e-8));
        CHECK(lo.grid_monotone);
        CHECK(lo.extensions == 0);
        auto const hi = combined_limit(one, down, k, Direction::kLower, g);
        CHECK(hi.value == doctest::Approx(-normal_quantile(k)).epsilon(1e-8));
        // A grid too narrow at first is extended once.
        g.half_width = 1.5;
        auto const ext = combined_limit(up, one, k, Direction::kUpper, g);
        CHECK(ext.extensions == 1);
        CHECK(ext.value == doctest::Approx(normal_quantile(k)).epsilon(1e-8));
    }

    TEST_CASE("product of two normal factors")
    {
        // p_os(b) = Phi(b), p_rct(b) = Phi(b - 1); solve Phi(b) Phi(b - 1) = kappa directly.
        double const k = kappa_alpha(0.025);
        auto const f = [](double b) { return normal_cdf(b); };
        auto const g1 = [](double b) { return normal_cdf(b - 1); };
        GridSpec g;
        g.center = 0.5;
        g.half_width = 5;
        g.tol = 1e-11;
        double const root = oracle::bisect([&](double b) { return f(b) * g1(b) - k; }, -6, 6);
        CHECK(combined_limit(f, g1, k, Direction::kUpper, g).value == doctest::Approx(root).epsilon(1e-8));
    }

    TEST_CASE("combined interval nests across a ladder")
    {
        auto const study = simulated_study(3, OverlapRegime::kMajority);
        LadderEngine eng(study, 2000, SeededRng(5, 0), true);
        double const gs[3] = {1.0, 1.2, 1.5};
        double const ds[3] = {0.0, 0.1, 0.3};
        std::vector<CombinedResult> cells;
        for (double d : ds) {
            for (double g : gs) {
                cells.push_back(eng.combined(g, d, 0.05));
                CHECK(cells.back().grid_monotone);
                CHECK(cells.back().lower < cells.back().upper);
            }
        }
        double const tol = 1e-3 * study.outcome_sd;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                for (int i2 = i; i2 < 3; ++i2) {
                    for (int j2 = j; j2 < 3; ++j2) {
                        CHECK(contains(cells[static_cast<std::size_t>(i2 * 3 + j2)],
                                       cells[static_cast<std::size_t>(i * 3 + j)], tol));
                    }
                }
            }
        }
    }

    TEST_CASE("ladder engine matches direct computation")
    {
        auto const study = simulated_study(4, OverlapRegime::kAll);
        SeededRng const rng(6, 0);
        LadderEngine eng(study, 1500, rng, false);
        auto const direct = combined_ci(study.os, study.rct, 1.2, 0.1, 0.05, 1500, rng);
        auto const cached = eng.combined(1.2, 0.1, 0.05);
        double const tol = 1e-3 * study.outcome_sd;
        CHECK(std::abs(cached.lower - direct.lower) <= tol);
        CHECK(std::abs(cached.upper - direct.upper) <= tol);
        // Attached marginal intervals.
        CHECK(direct.os.method == "os");
        CHECK(direct.rct.method == "rct");
        auto const os = os_ci(study.os, 1.2, 0.025);
        CHECK(direct.os.lower == doctest::Approx(os.lower).epsilon(1e-12));
    }

    TEST_CASE("ladder row layout")
    {
        auto const study = simulated_study(5, OverlapRegime::kAll);
        LadderEngine eng(study, 1000, SeededRng(7, 0), true);
        auto const rows = eng.ladder({1.0, 1.23}, {0.0, 0.02}, 0.05);
        REQUIRE(rows.size() == 8);
        CHECK(rows[0].method == "rct");
        CHECK(rows[1].method == "rct");
        CHECK(rows[1].delta == 0.02);
        CHECK(rows[2].method == "os");
        CHECK(rows[3].gamma == 1.23);
        CHECK(rows[4].method == "combined");
        CHECK(rows[4].delta == 0.0);
        CHECK(rows[5].gamma == 1.23);
        CHECK(rows[6].delta == 0.02);
        for (auto const& r : rows) CHECK(r.lower < r.upper);
    }
}
