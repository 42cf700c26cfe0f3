#include <doctest.h>

#include <map>
#include <set>

#include "cfuse/assignment.hpp"
#include "cfuse/error.hpp"
#include "cfuse/gen_score.hpp"
#include "cfuse/rng.hpp"
#include "cfuse/sim_lab.hpp"
#include "cfuse/tri_match.hpp"
#include "oracles.hpp"
#include "test_data.hpp"

using namespace cfuse;

namespace {

void check_partition(StudyData const& d, std::vector<MatchedSet> const& sets, std::size_t k)
{
    std::set<std::size_t> treated;
    std::set<std::size_t> controls;
    for (auto const& s : sets) {
        CHECK(d.records()[s.treated_index].source == Source::kOs);
        CHECK(d.records()[s.treated_index].z == 1);
        CHECK(treated.insert(s.treated_index).second);
        CHECK(s.control_indices.size() == k);
        for (auto c : s.control_indices) {
            CHECK(d.records()[c].z == 0);
            CHECK(controls.insert(c).second);
        }
        CHECK(s.rct_index.has_value() == s.in_overlap);
        CHECK(s.in_overlap == d.records()[s.treated_index].in_overlap);
    }
    std::size_t real_treated = 0;
    for (auto const& r : d.records()) {
        real_treated += r.source == Source::kOs && r.z == 1;
    }
    CHECK(treated.size() == real_treated);
}

}  // namespace

TEST_SUITE("tri_match")
{
    TEST_CASE("distance examples")
    {
        auto const id = MahalanobisMetric::identity(2);
        CHECK(id.distance({1, 2}, {1, 2}) == 0.0);
        CHECK(id.distance({0, 0}, {3, 4}) == doctest::Approx(5.0).epsilon(1e-14));
        std::vector<double> const a{1, 2};
        std::vector<double> const b{4, 6};
        auto const m = mahalanobis_matrix({&a, nullptr}, {&b, nullptr}, id);
        CHECK(m(0, 0) == doctest::Approx(5.0));
        CHECK(m(0, 1) == 0.0);
        CHECK(m(1, 0) == 0.0);
        CHECK(m(1, 1) == 0.0);
    }

    TEST_CASE("metric whitens by the reference covariance")
    {
        // Reference with sd 2 on the first axis and 1 on the second.
        std::vector<std::vector<double>> ref{{2, 1}, {-2, 1}, {2, -1}, {-2, -1}};
        MahalanobisMetric const m(ref);
        double const var1 = 16.0 / 3.0;
        double const var2 = 4.0 / 3.0;
        CHECK(m.distance({0, 0}, {1, 0}) == doctest::Approx(1 / std::sqrt(var1)).epsilon(1e-5));
        CHECK(m.distance({0, 0}, {0, 1}) == doctest::Approx(1 / std::sqrt(var2)).epsilon(1e-5));
    }

    TEST_CASE("assignment: 2x2 example")
    {
        Eigen::MatrixXd c(2, 2);
        c << 1, 10, 10, 1;
        auto const r = solve_assignment(c);
        CHECK(r.column_of_row == std::vector<std::size_t>{0, 1});
        CHECK(r.total_cost == 2.0);
        CHECK(r.total_cost == oracle::brute_force_assignment({{1, 10}, {10, 1}}));
    }

    TEST_CASE("assignment matches brute force")
    {
        SeededRng rng(21, 0);
        for (int rep = 0; rep < 200; ++rep) {
            std::size_t const rows = 1 + rng.below(7);
            std::size_t const cols = rows + rng.below(2);
            Eigen::MatrixXd c(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
            std::vector<std::vector<double>> v(rows, std::vector<double>(cols));
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < cols; ++j) {
                    // Integer costs exercise ties.
                    double const x = rep % 2 ? rng.uniform() * 10 : static_cast<double>(rng.below(4));
                    c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x;
                    v[i][j] = x;
                }
            }
            auto const r = solve_assignment(c);
            CHECK(r.total_cost == doctest::Approx(oracle::brute_force_assignment(v)).epsilon(1e-12));
            std::set<std::size_t> used(r.column_of_row.begin(), r.column_of_row.end());
            CHECK(used.size() == rows);
        }
    }

    TEST_CASE("smd examples")
    {
        CHECK(smd({1, 2, 3}, {1, 2, 3}) == 0.0);
        // Means 1 and 0, both sample sd 1.
        CHECK(smd({0, 1, 2}, {-1, 0, 1}) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(smd({4, 4}, {4, 4}) == 0.0);
        CHECK(smd({4, 4}, {5, 5}) == 1e6);
    }

    TEST_CASE("toy layout matching")
    {
        auto const d = fixture::toy_study();
        auto const plan = plan_copies_from_scores(d, {1, 1, 2});
        CHECK(plan.total_copies() == 4);
        CHECK(plan.imaginary_treated == 1);
        CHECK(plan.imaginary_rct == 2);
        auto const m = match_triplets(d, plan, 1);
        CHECK(m.sets.size() == 5);
        check_partition(d, m.sets, 1);
        // Copies used by real sets never exceed their plan.
        std::map<std::size_t, int> used;
        for (auto const& s : m.sets) {
            if (s.rct_index) ++used[*s.rct_index];
        }
        for (auto const& u : plan.units) CHECK(used[u.record_index] <= u.copies);
        // Out-of-overlap anchors draw out-of-overlap controls when available.
        for (auto const& s : m.sets) {
            if (!s.in_overlap) CHECK_FALSE(d.records()[s.control_indices[0]].in_overlap);
        }
    }

    TEST_CASE("exact duplicates cost nothing")
    {
        std::vector<UnitRecord> r;
        for (int i = 0; i < 3; ++i) r.push_back(fixture::unit("r" + std::to_string(i), Source::kRct, i % 2, 0, {1.0, 2.0}));
        for (int i = 0; i < 3; ++i) r.push_back(fixture::unit("t" + std::to_string(i), Source::kOs, 1, 0, {1.0, 2.0}));
        for (int i = 0; i < 4; ++i) r.push_back(fixture::unit("c" + std::to_string(i), Source::kOs, 0, 0, {1.0, 2.0}));
        StudyData const d(std::move(r), {"a", "b"});
        auto const plan = plan_copies_from_scores(d, {1, 1, 1});
        auto const m = match_triplets(d, plan, 1);
        CHECK(m.pass_a_cost == 0.0);
        CHECK(m.pass_b_cost == 0.0);
        check_partition(d, m.sets, 1);
    }

    TEST_CASE("too few controls is an error")
    {
        auto const d = fixture::toy_study();
        auto const plan = plan_copies_from_scores(d, {1, 1, 2});
        // 5 anchors x 2 controls = 10 > 8 controls.
        CHECK_THROWS_AS(match_triplets(d, plan, 2), NumericalError);
    }

    TEST_CASE("matching on simulated data improves balance")
    {
        // The overlap domain must improve in every run. The nonoverlap domain
        // holds only 10-25 treated, so it is checked on the bulk of runs.
        int out_runs = 0;
        int out_improved = 0;
        for (auto regime : {OverlapRegime::kAll, OverlapRegime::kMajority}) {
            ScenarioSpec spec;
            spec.n_total = 500;
            spec.overlap = regime;
            for (std::uint64_t seed = 1; seed <= 10; ++seed) {
                SeededRng rng(seed, 0);
                auto const sim = generate(spec, rng);
                OverlapRule rule;
                if (regime != OverlapRegime::kAll) {
                    rule.bounds.push_back({0, regime_threshold(regime), std::numeric_limits<double>::infinity()});
                }
                auto const d = apply_overlap(sim.data, rule);
                auto const plan = plan_copies(fit_generalization(d), d);
                for (std::size_t k : {1u, 2u}) {
                    auto const m = match_triplets(d, plan, k);
                    check_partition(d, m.sets, k);
                    CAPTURE(seed);
                    CAPTURE(k);
                    CHECK(m.balance.max_abs_after[0] < m.balance.max_abs_before[0]);
                    if (m.balance.has_domain[1]) {
                        ++out_runs;
                        out_improved += m.balance.max_abs_after[1] < m.balance.max_abs_before[1];
                    }
                }
            }
        }
        CHECK(out_runs == 20);
        CHECK(out_improved >= 17);
    }
}
