#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "cfuse/stat_kernel.hpp"
#include "oracles.hpp"

using namespace cfuse;

TEST_SUITE("stat_kernel")
{
    TEST_CASE("normal_cdf values")
    {
        CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
        // Bisection on the implementation itself must land on the tabulated quantile.
        double const x = oracle::bisect([](double v) { return normal_cdf(v) - 0.95; }, 0.0, 5.0);
        CHECK(x == doctest::Approx(1.6448536269514722).epsilon(1e-12));
        double const tail = normal_cdf(-38.0);
        CHECK(tail >= 0.0);
        CHECK(tail < 1e-300);
        CHECK_FALSE(std::isnan(tail));
    }

    TEST_CASE("normal_quantile values")
    {
        CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
        double const oracle_q =
            oracle::bisect([](double v) { return normal_cdf(v) - 0.975; }, 0.0, 5.0);
        CHECK(normal_quantile(0.975) == doctest::Approx(oracle_q).epsilon(1e-10));
        CHECK(normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-6));
        CHECK(normal_quantile(0.05) == doctest::Approx(-normal_quantile(0.95)).epsilon(1e-14));
        CHECK_THROWS_AS(normal_quantile(0.0), std::domain_error);
        CHECK_THROWS_AS(normal_quantile(1.0), std::domain_error);
        CHECK_THROWS_AS(normal_quantile(-0.1), std::domain_error);
    }

    TEST_CASE("chi2_4_quantile values")
    {
        auto tail = [](double p) {
            return oracle::bisect(
                [p](double x) { return std::exp(-x / 2) * (1 + x / 2) - (1 - p); }, 0.0, 100.0,
                true);
        };
        CHECK(chi2_4_quantile(0.95) == doctest::Approx(tail(0.95)).epsilon(1e-10));
        CHECK(chi2_4_quantile(0.95) == doctest::Approx(9.48773).epsilon(1e-5));
        CHECK(chi2_4_quantile(0.99) == doctest::Approx(13.2767).epsilon(1e-5));
        CHECK(chi2_4_quantile(1e-12) > 0.0);
        CHECK(chi2_4_quantile(1e-12) < 1e-4);
        CHECK_THROWS_AS(chi2_4_quantile(0.0), std::domain_error);
        CHECK_THROWS_AS(chi2_4_quantile(1.0), std::domain_error);
    }

    TEST_CASE("quantile and cdf round trip")
    {
        std::mt19937_64 gen(17);
        std::uniform_real_distribution<double> u(0.001, 0.999);
        for (int i = 0; i < 1000; ++i) {
            double const p = u(gen);
            CHECK(std::abs(normal_cdf(normal_quantile(p)) - p) < 1e-9);
            CHECK(std::abs(chi2_4_cdf(chi2_4_quantile(p)) - p) < 1e-9);
        }
    }

    TEST_CASE("fit_linear exact fit")
    {
        Eigen::MatrixXd x(5, 1);
        Eigen::VectorXd y(5);
        for (int i = 0; i < 5; ++i) {
            x(i, 0) = i;
            y(i) = 2.0 * i + 1.0;
        }
        auto const fit = fit_linear(x, y);
        CHECK(fit.coefficients(0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(fit.coefficients(1) == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(fit.residuals.cwiseAbs().maxCoeff() < 1e-12);
    }

    TEST_CASE("fit_linear against hand normal equations")
    {
        // (0,10), (1,1), (2,2): X'X = [[3,3],[3,5]], X'y = [13,5].
        Eigen::MatrixXd x(3, 1);
        x << 0, 1, 2;
        Eigen::VectorXd y(3);
        y << 10, 1, 2;
        auto const fit = fit_linear(x, y);
        auto const b = oracle::solve2(3, 3, 3, 5, 13, 5);
        CHECK(fit.coefficients(0) == doctest::Approx(b[0]).epsilon(1e-12));
        CHECK(fit.coefficients(1) == doctest::Approx(b[1]).epsilon(1e-12));
        CHECK(fit.residuals(0) == doctest::Approx(10 - b[0]).epsilon(1e-12));
    }

    TEST_CASE("fit_linear constant outcome")
    {
        Eigen::MatrixXd x(6, 2);
        x << 1, 0, 2, 1, 3, 5, 4, 2, 5, 7, 6, 1;
        Eigen::VectorXd y = Eigen::VectorXd::Constant(6, 4.5);
        auto const fit = fit_linear(x, y);
        CHECK(fit.coefficients(0) == doctest::Approx(4.5).epsilon(1e-12));
        CHECK(std::abs(fit.coefficients(1)) < 1e-12);
        CHECK(std::abs(fit.coefficients(2)) < 1e-12);
    }

    TEST_CASE("fit_linear singular design names the column")
    {
        Eigen::MatrixXd x(5, 2);
        x << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10;
        Eigen::VectorXd y(5);
        y << 1, 2, 3, 4, 6;
        try {
            (void)fit_linear(x, y);
            FAIL("expected SingularDesignError");
        } catch (SingularDesignError const& e) {
            CHECK(e.column() == 2);
        }
    }

    TEST_CASE("fit_linear residual orthogonality")
    {
        std::mt19937_64 gen(5);
        std::normal_distribution<double> n01;
        for (int rep = 0; rep < 100; ++rep) {
            int const n = 40;
            int const p = 1 + rep % 4;
            Eigen::MatrixXd x(n, p);
            Eigen::VectorXd y(n);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < p; ++j) x(i, j) = n01(gen);
                y(i) = x.row(i).sum() + n01(gen);
            }
            auto const fit = fit_linear(x, y);
            CHECK(std::abs(fit.residuals.sum()) < 1e-9);
            for (int j = 0; j < p; ++j) {
                CHECK(std::abs(x.col(j).dot(fit.residuals)) < 1e-9);
            }
        }
    }

    TEST_CASE("fit_logistic symmetric covariate")
    {
        Eigen::MatrixXd x(8, 1);
        x << 1, -1, 1, -1, 1, -1, 1, -1;
        Eigen::VectorXd y(8);
        y << 1, 1, 0, 0, 1, 1, 0, 0;
        auto const fit = fit_logistic(x, y);
        CHECK(fit.converged);
        CHECK(std::abs(fit.coefficients(1)) < 1e-6);
    }

    TEST_CASE("fit_logistic saturated binary covariate")
    {
        Eigen::MatrixXd x(20, 1);
        Eigen::VectorXd y(20);
        for (int i = 0; i < 20; ++i) {
            bool const one = i >= 10;
            x(i, 0) = one ? 1 : 0;
            int const k = i % 10;
            y(i) = one ? (k < 7 ? 1 : 0) : (k < 3 ? 1 : 0);
        }
        auto const fit = fit_logistic(x, y);
        CHECK(fit.coefficients(0) == doctest::Approx(std::log(3.0 / 7.0)).epsilon(1e-6));
        CHECK(fit.coefficients(1)
              == doctest::Approx(std::log(7.0 / 3.0) - std::log(3.0 / 7.0)).epsilon(1e-6));
    }

    TEST_CASE("fit_logistic degenerate labels")
    {
        Eigen::MatrixXd x(4, 1);
        x << 0, 1, 2, 3;
        Eigen::VectorXd y = Eigen::VectorXd::Ones(4);
        CHECK_THROWS(fit_logistic(x, y));
    }

    TEST_CASE("fit_logistic flags separation")
    {
        Eigen::MatrixXd x(6, 1);
        x << -3, -2, -1, 1, 2, 3;
        Eigen::VectorXd y(6);
        y << 0, 0, 0, 1, 1, 1;
        auto const fit = fit_logistic(x, y);
        CHECK(fit.quasi_separated);
    }

    TEST_CASE("find_root")
    {
        CHECK(find_root([](double x) { return x - 3; }, 0, 10) == doctest::Approx(3.0).epsilon(1e-9));
        double const r =
            find_root([](double x) { return std::exp(-x / 2) * (1 + x / 2) - 0.05; }, 0, 50);
        CHECK(r == doctest::Approx(9.48773).epsilon(1e-5));
        CHECK(r == doctest::Approx(chi2_4_quantile(0.95)).epsilon(1e-9));
        CHECK_THROWS_AS(find_root([](double x) { return x * x; }, -1, 1), NumericalError);
        // Bracket expansion reaches a root outside the starting interval.
        CHECK(find_root([](double x) { return x - 40; }, 0, 1) == doctest::Approx(40.0).epsilon(1e-9));
    }

    TEST_CASE("mean and variance")
    {
        CHECK(mean({1, 2, 3, 4}) == doctest::Approx(2.5));
        CHECK(sample_variance({1, 2, 3, 4}) == doctest::Approx(5.0 / 3.0));
        CHECK(sample_variance({7}) == 0.0);
    }
}
