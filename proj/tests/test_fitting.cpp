#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "atomlink/fitting.hpp"
#include "atomlink/rng.hpp"

#include <cmath>
#include <vector>

using namespace atomlink::fitting;

TEST_CASE("solve_dense inverts a known system") {
    // A = [[2,1],[1,3]], b = [5, 10] -> x = [1, 3]
    const auto x = solve_dense({2, 1, 1, 3}, {5, 10}, 2);
    CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(x[1] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("solve_dense flags singular systems") {
    CHECK_THROWS_AS(solve_dense({1, 2, 2, 4}, {1, 2}, 2), std::runtime_error);
}

TEST_CASE("exponential regression recovers its parameters") {
    // y = a exp(-b t), noiseless
    const double a_true = 2.5, b_true = 0.13;
    std::vector<double> t, y;
    for (int i = 0; i < 60; ++i) {
        t.push_back(i);
        y.push_back(a_true * std::exp(-b_true * i));
    }
    const auto residuals = [&](const std::vector<double>& p) {
        std::vector<double> r(t.size());
        for (std::size_t i = 0; i < t.size(); ++i)
            r[i] = p[0] * std::exp(-p[1] * t[i]) - y[i];
        return r;
    };
    const auto fit = levenberg_marquardt(residuals, {1.0, 0.5});
    REQUIRE(fit.converged);
    CHECK(fit.params[0] == doctest::Approx(a_true).epsilon(1e-8));
    CHECK(fit.params[1] == doctest::Approx(b_true).epsilon(1e-8));
    CHECK(fit.cost < 1e-16);
}

TEST_CASE("standard errors scale with the noise level") {
    atomlink::Rng rng(77, "fit");
    const double slope = 0.8, noise = 0.05;
    std::vector<double> t, y;
    for (int i = 0; i < 200; ++i) {
        t.push_back(i * 0.1);
        y.push_back(slope * t.back() + rng.normal(0.0, noise));
    }
    const auto residuals = [&](const std::vector<double>& p) {
        std::vector<double> r(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) r[i] = p[0] * t[i] - y[i];
        return r;
    };
    const auto fit = levenberg_marquardt(residuals, {0.0});
    REQUIRE(fit.converged);
    // analytic: se = noise / sqrt(sum t^2)
    double st2 = 0.0;
    for (double v : t) st2 += v * v;
    const double se_expected = noise / std::sqrt(st2);
    CHECK(fit.params[0] == doctest::Approx(slope).epsilon(0.01));
    CHECK(fit.std_errors[0] == doctest::Approx(se_expected).epsilon(0.35));
}

TEST_CASE("non-convergence carries a diagnostic") {
    // pathological flat-then-cliff cost surface with an absurd iteration cap
    const auto residuals = [](const std::vector<double>& p) {
        return std::vector<double>{std::atan(p[0]) - 10.0};
    };
    FitOptions opt;
    opt.max_iterations = 3;
    opt.relative_cost_tol = 1e-30;
    const auto fit = levenberg_marquardt(residuals, {0.0}, opt);
    CHECK(!fit.converged);
    CHECK(!fit.diagnostic.empty());
    CHECK(fit.diagnostic.find("cost") != std::string::npos);
}
