#include <doctest.h>

#include <cmath>

#include "cfuse/gen_score.hpp"
#include "cfuse/rng.hpp"
#include "test_data.hpp"

using namespace cfuse;

namespace {

double logit(double p) { return std::log(p / (1 - p)); }

GeneralizationModel constant_model(double e, double pi, double clamp = 0.01)
{
    GeneralizationModel m;
    m.selection_fit.coefficients = Eigen::VectorXd::Zero(2);
    m.selection_fit.coefficients(0) = logit(e);
    m.propensity_fit.coefficients = Eigen::VectorXd::Zero(2);
    m.propensity_fit.coefficients(0) = logit(pi);
    m.clamp = clamp;
    m.dim = 1;
    return m;
}

// n_rct RCT units and n_plus / n_minus OS treated units in / out of the overlap.
StudyData layout(int n_rct, int n_plus, int n_minus, int n_control = 4)
{
    std::vector<UnitRecord> r;
    for (int i = 0; i < n_rct; ++i) r.push_back(fixture::unit("r" + std::to_string(i), Source::kRct, i % 2, 0, {0.0}));
    for (int i = 0; i < n_plus; ++i) r.push_back(fixture::unit("p" + std::to_string(i), Source::kOs, 1, 0, {0.0}));
    for (int i = 0; i < n_minus; ++i)
        r.push_back(fixture::unit("m" + std::to_string(i), Source::kOs, 1, 0, {0.0}, false));
    for (int i = 0; i < n_control; ++i) r.push_back(fixture::unit("c" + std::to_string(i), Source::kOs, 0, 0, {0.0}));
    return StudyData(std::move(r), {"x"});
}

}  // namespace

TEST_SUITE("gen_score")
{
    TEST_CASE("generalization score from its parts")
    {
        CHECK(constant_model(1.0 / 7, 1.0 / 3).nu({0.3}) == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(constant_model(0.5, 0.5).nu({0.0}) == doctest::Approx(0.5* 0.5 / 0.5).epsilon(1e-12));
        // pi -> 0 is clamped.
        double const tiny = constant_model(0.5, 1e-12).nu({0.0});
        CHECK(tiny > 0.0);
        CHECK(tiny == doctest::Approx(0.01).epsilon(1e-12));
    }

    TEST_CASE("fitted score on exchangeable sources")
    {
        // RCT and OS share one covariate law; half RCT, OS treated share 1/2.
        SeededRng rng(3, 0);
        std::vector<UnitRecord> r;
        for (int i = 0; i < 4000; ++i) {
            bool const rct = rng.bernoulli(0.5);
            int const z = rng.bernoulli(0.5) ? 1 : 0;
            r.push_back(fixture::unit("u" + std::to_string(i), rct ? Source::kRct : Source::kOs, z,
                                      0.0, {rng.normal(), rng.normal()}));
        }
        StudyData const d(std::move(r), {"a", "b"});
        auto const m = fit_generalization(d);
        for (auto const& u : d.records()) {
            if (u.source == Source::kRct) {
                CHECK(std::abs(m.nu(u.x) - 0.5) < 0.15);
            }
        }
    }

    TEST_CASE("copies: even split")
    {
        auto const d = layout(3, 6, 0);
        auto const p = plan_copies_from_scores(d, {0.7, 0.7, 0.7});
        REQUIRE(p.units.size() == 3);
        for (auto const& u : p.units) CHECK(u.copies == 2);
        CHECK(p.imaginary_treated == 0);
        CHECK(p.imaginary_rct == 0);
    }

    TEST_CASE("copies: hand ceiling arithmetic")
    {
        // raw = 5 * (1, 1, 2) / 4 = (1.25, 1.25, 2.5).
        auto const d = layout(3, 5, 4);
        auto const p = plan_copies_from_scores(d, {1, 1, 2});
        CHECK(p.units[0].copies == 2);
        CHECK(p.units[1].copies == 2);
        CHECK(p.units[2].copies == 3);
        CHECK(p.imaginary_treated == 2);
        CHECK(p.imaginary_rct == 4);
    }

    TEST_CASE("copy plan invariants")
    {
        SeededRng rng(8, 0);
        for (int rep = 0; rep < 50; ++rep) {
            int const n_rct = 2 + static_cast<int>(rng.below(10));
            int const n_plus = 1 + static_cast<int>(rng.below(30));
            auto const d = layout(n_rct, n_plus, static_cast<int>(rng.below(5)));
            std::vector<double> nu(static_cast<std::size_t>(n_rct));
            for (auto& v : nu) v = 0.01 + rng.uniform();
            auto const p = plan_copies_from_scores(d, nu);
            CHECK(p.total_copies() - p.imaginary_treated == d.counts().n_o1_plus);

            // Ratio form: scaling every score leaves the plan unchanged.
            std::vector<double> scaled = nu;
            for (auto& v : scaled) v *= 3.7;
            auto const q = plan_copies_from_scores(d, scaled);
            for (std::size_t i = 0; i < nu.size(); ++i) CHECK(p.units[i].copies == q.units[i].copies);

            // Raising one score never lowers its copies.
            std::vector<double> bumped = nu;
            bumped[0] *= 2.0;
            CHECK(plan_copies_from_scores(d, bumped).units[0].copies >= p.units[0].copies);
        }
    }

    TEST_CASE("plan needs RCT units")
    {
        auto const d = layout(0, 3, 0);
        CHECK_THROWS(plan_copies_from_scores(d, {}));
    }
}
