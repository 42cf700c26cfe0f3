#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "cfuse/error.hpp"
#include "cfuse/study_data.hpp"
#include "test_data.hpp"

using namespace cfuse;

namespace {

StudyData random_study(std::uint64_t seed, std::size_t n)
{
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> n01;
    std::vector<UnitRecord> r;
    for (std::size_t i = 0; i < n; ++i) {
        bool const rct = i % 4 == 0;
        r.push_back(fixture::unit("u" + std::to_string(i), rct ? Source::kRct : Source::kOs,
                                  static_cast<int>(i % 3 == 0), n01(gen) * 1e3,
                                  {n01(gen), n01(gen) * 1e-7, std::exp(n01(gen))}));
    }
    return StudyData(std::move(r), {"a", "b", "c"});
}

}  // namespace

TEST_SUITE("study_data")
{
    TEST_CASE("parse a well-formed file")
    {
        auto const d = parse_csv("id,source,z,y,x1\nu1,rct,1,2.5,0.1\nu2,os,0,1,0.2\nu3,os,1,3,-1\n");
        CHECK(d.size() == 3);
        CHECK(d.counts().n_r == 1);
        CHECK(d.counts().n_o == 2);
        CHECK(d.covariate_names() == std::vector<std::string>{"x1"});
    }

    TEST_CASE("bad treatment value cites its row")
    {
        std::string text = "id,source,z,y,x1\n";
        for (int i = 1; i <= 4; ++i) text += "u" + std::to_string(i) + ",os,0,1,0\n";
        text += "u5,os,2,1,0\n";
        try {
            (void)parse_csv(text);
            FAIL("expected InputError");
        } catch (InputError const& e) {
            CHECK(std::string(e.what()).find("row 5") != std::string::npos);
            CHECK(std::string(e.what()).find("'z'") != std::string::npos);
        }
    }

    TEST_CASE("malformed inputs are rejected")
    {
        CHECK_THROWS_AS(parse_csv("id,source,z,y,x1\nu1,lab,0,1,0\n"), InputError);
        CHECK_THROWS_AS(parse_csv("id,source,z,y,x1\nu1,os,0,abc,0\n"), InputError);
        CHECK_THROWS_AS(parse_csv("id,source,z,y,x1\nu1,os,0,1,0\nu1,os,1,1,0\n"), InputError);
        CHECK_THROWS_AS(parse_csv("id,source,z,x1\nu1,os,0,0\n"), InputError);
        CHECK_THROWS_AS(parse_csv("id,source,z,y,x1\nu1,os,0,1\n"), InputError);
        CHECK_THROWS_AS(load_csv("/nonexistent/study.csv"), InputError);
    }

    TEST_CASE("toy layout counts")
    {
        auto const d = fixture::toy_study();
        CHECK(d.counts().n_r == 3);
        CHECK(d.counts().n_o == 13);
        CHECK(d.counts().n_o1_plus == 3);
        CHECK(d.counts().n_o1_minus == 2);
    }

    TEST_CASE("csv round trip is lossless")
    {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            auto const d = random_study(seed, 41);
            auto const back = parse_csv(to_csv(d));
            REQUIRE(back.size() == d.size());
            for (std::size_t i = 0; i < d.size(); ++i) {
                auto const& a = d.records()[i];
                auto const& b = back.records()[i];
                CHECK(a.id == b.id);
                CHECK(a.source == b.source);
                CHECK(a.z == b.z);
                CHECK(a.y == b.y);
                CHECK(a.x == b.x);
                CHECK(a.in_overlap == b.in_overlap);
            }
            CHECK(to_csv(back) == to_csv(d));
        }
    }

    TEST_CASE("file round trip")
    {
        auto const d = random_study(9, 20);
        auto const path = std::filesystem::temp_directory_path() / "cfuse_roundtrip.csv";
        write_csv(path.string(), d);
        auto const back = load_csv(path.string());
        CHECK(to_csv(back) == to_csv(d));
        std::filesystem::remove(path);
    }

    TEST_CASE("covariate selection")
    {
        auto const d = parse_csv("id,source,z,y,a,b\nu1,rct,1,1,1,2\nu2,os,0,1,3,4\n", {"b"});
        CHECK(d.dim() == 1);
        CHECK(d.records()[1].x[0] == 4.0);
        CHECK_THROWS_AS(parse_csv("id,source,z,y,a\nu1,os,0,1,1\n", {"q"}), InputError);
    }

    TEST_CASE("apply_overlap rules")
    {
        auto const d = random_study(3, 60);
        auto const all = apply_overlap(d, OverlapRule::unbounded());
        for (auto const& r : all.records()) CHECK(r.in_overlap);

        OverlapRule rule;
        rule.bounds.push_back({0, -1.0, std::numeric_limits<double>::infinity()});
        auto const maj = apply_overlap(d, rule);
        for (auto const& r : maj.records()) {
            if (r.source == Source::kOs) {
                CHECK(r.in_overlap == (r.x[0] >= -1.0));
            } else {
                CHECK(r.in_overlap);
            }
        }
        // Idempotent.
        CHECK(to_csv(apply_overlap(maj, rule)) == to_csv(maj));
    }

    TEST_CASE("rct bounding box")
    {
        std::vector<UnitRecord> r;
        r.push_back(fixture::unit("r1", Source::kRct, 1, 0, {5.0}));
        r.push_back(fixture::unit("r2", Source::kRct, 0, 0, {10.0}));
        r.push_back(fixture::unit("o1", Source::kOs, 1, 0, {4.0}));
        r.push_back(fixture::unit("o2", Source::kOs, 0, 0, {7.0}));
        StudyData const d(std::move(r), {"x1"});
        auto const out = apply_overlap(d, OverlapRule::rct_bounding_box());
        CHECK_FALSE(out.records()[2].in_overlap);
        CHECK(out.records()[3].in_overlap);

        std::vector<UnitRecord> os_only{fixture::unit("o1", Source::kOs, 1, 0, {4.0}),
                                        fixture::unit("o2", Source::kOs, 0, 0, {7.0})};
        StudyData const no_rct(std::move(os_only), {"x1"});
        CHECK_THROWS_AS(apply_overlap(no_rct, OverlapRule::rct_bounding_box()), InputError);
    }

    TEST_CASE("residualize exact linear outcome")
    {
        std::vector<UnitRecord> r;
        for (int i = 0; i < 8; ++i) {
            double const a = i;
            double const b = (i * 7) % 5;
            r.push_back(fixture::unit("u" + std::to_string(i), i < 3 ? Source::kRct : Source::kOs,
                                      i % 2, 1 + 2 * a - 3 * b, {a, b}));
        }
        auto const res = residualize(StudyData(r, {"a", "b"}));
        REQUIRE(res.size() == 8);
        for (std::size_t i = 0; i < res.size(); ++i) {
            CHECK(std::abs(res.records()[i].y) < 1e-10);
            CHECK(res.records()[i].id == r[i].id);
            CHECK(res.records()[i].y_raw.value() == r[i].y);
        }
    }

    TEST_CASE("residualize orthogonality")
    {
        std::mt19937_64 gen(11);
        std::normal_distribution<double> n01;
        std::vector<UnitRecord> r;
        for (int i = 0; i < 200; ++i) {
            double const x = n01(gen);
            r.push_back(fixture::unit("u" + std::to_string(i), i % 3 ? Source::kOs : Source::kRct,
                                      i % 2, x + n01(gen), {x}));
        }
        auto const res = residualize(StudyData(r, {"x"}));
        double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
        for (auto const& u : res.records()) {
            sx += u.x[0];
            sy += u.y;
            sxy += u.x[0] * u.y;
            sxx += u.x[0] * u.x[0];
            syy += u.y * u.y;
        }
        double const n = 200;
        double const cov = sxy / n - sx * sy / n / n;
        double const corr = cov / std::sqrt((sxx / n - sx * sx / n / n) * (syy / n - sy * sy / n / n));
        CHECK(std::abs(corr) < 1e-8);
    }

    TEST_CASE("residualize four-point hand example")
    {
        // y on x with points (0,1), (1,3), (2,2), (3,5): slope 5.5 / 5 = 1.1, intercept 2.75 - 1.1 * 1.5 = 1.1.
        std::vector<UnitRecord> r;
        double const xs[4] = {0, 1, 2, 3};
        double const ys[4] = {1, 3, 2, 5};
        for (int i = 0; i < 4; ++i) {
            r.push_back(fixture::unit("u" + std::to_string(i), i == 0 ? Source::kRct : Source::kOs,
                                      i % 2, ys[i], {xs[i]}));
        }
        auto const res = residualize(StudyData(r, {"x"}));
        double const expect[4] = {1 - 1.1, 3 - 2.2, 2 - 3.3, 5 - 4.4};
        for (int i = 0; i < 4; ++i) {
            CHECK(res.records()[i].y == doctest::Approx(expect[i]).epsilon(1e-12));
        }
    }
}
