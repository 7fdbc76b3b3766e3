#include <cmath>
#include <vector>

#include "doctest.h"

#include "ibn/errors.hpp"
#include "ibn/numerics.hpp"

using namespace ibn;

TEST_SUITE("numerics") {

TEST_CASE("adaptive quadrature reproduces analytic integrals") {
    const double cubic = integrate_adaptive([](double x) { return x * x * x; }, 0.0, 2.0,
                                            1e-10, 1e-12);
    CHECK(cubic == doctest::Approx(4.0).epsilon(1e-9));

    const double sine = integrate_adaptive([](double x) { return std::sin(x); }, 0.0,
                                           std::acos(-1.0), 1e-10, 1e-12);
    CHECK(sine == doctest::Approx(2.0).epsilon(1e-9));

    // Standard logistic density integrates to 1 over a wide window.
    auto logistic_pdf = [](double x) {
        const double e = std::exp(-std::abs(x));
        return e / ((1.0 + e) * (1.0 + e));
    };
    const double mass = integrate_adaptive(logistic_pdf, -40.0, 40.0, 1e-9, 1e-12);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("adaptive quadrature rejects empty intervals") {
    CHECK_THROWS_AS(integrate_adaptive([](double) { return 1.0; }, 1.0, 1.0, 1e-6, 1e-9),
                    ParameterError);
    CHECK_THROWS_AS(integrate_adaptive([](double) { return 1.0; }, 2.0, 1.0, 1e-6, 1e-9),
                    ParameterError);
}

TEST_CASE("ols_fit recovers exact lines and refuses degenerate input") {
    // Noiseless power law y = x^-0.5 in log space.
    std::vector<double> x, y;
    for (double v : {10.0, 100.0, 1000.0}) {
        x.push_back(std::log(v));
        y.push_back(-0.5 * std::log(v));
    }
    const LinearFit fit = ols_fit(x, y);
    CHECK(fit.slope == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.half_width == doctest::Approx(0.0).epsilon(1e-9));

    // Constant y: slope 0 and r^2 pinned to 1 by convention.
    const LinearFit flat = ols_fit({1.0, 2.0, 3.0}, {5.0, 5.0, 5.0});
    CHECK(flat.slope == doctest::Approx(0.0));
    CHECK(flat.r_squared == doctest::Approx(1.0));

    CHECK_THROWS_AS(ols_fit({1.0, 2.0}, {1.0, 2.0}), ParameterError);
    CHECK_THROWS_AS(ols_fit({1.0, 1.0, 1.0, 2.0}, {1.0, 2.0, 3.0, 4.0}), ParameterError);
    CHECK_THROWS_AS(ols_fit({1.0, 2.0, 3.0}, {1.0, 2.0}), ParameterError);
}

TEST_CASE("ols_fit half-width matches the hand-computed slope error") {
    // x = {0,1,2}, y = {0,1,1}: slope 1/2, ss_res = 1/6, sxx = 2,
    // se = sqrt((1/6)/1/2) = sqrt(1/12), half-width = t95(df=1) * se.
    const LinearFit fit = ols_fit({0.0, 1.0, 2.0}, {0.0, 1.0, 1.0});
    CHECK(fit.slope == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(fit.half_width == doctest::Approx(12.706 * std::sqrt(1.0 / 12.0)).epsilon(1e-9));
}

TEST_CASE("nnls solves small systems") {
    // Identity system with nonnegative solution: unconstrained optimum kept.
    const std::vector<double> a = nnls({{1.0, 0.0}, {0.0, 1.0}}, {1.0, 2.0});
    REQUIRE(a.size() == 2);
    CHECK(a[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(a[1] == doctest::Approx(2.0).epsilon(1e-10));

    // Negative component clamps to zero.
    const std::vector<double> b = nnls({{1.0, 0.0}, {0.0, 1.0}}, {1.0, -1.0});
    CHECK(b[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(b[1] == doctest::Approx(0.0));

    // Overdetermined consistent system.
    const std::vector<double> c =
        nnls({{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}}, {1.0, 2.0, 3.0});
    CHECK(c[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(c[1] == doctest::Approx(2.0).epsilon(1e-10));

    // All-negative target: the zero vector is optimal.
    const std::vector<double> d = nnls({{1.0}, {2.0}}, {-1.0, -2.0});
    CHECK(d[0] == doctest::Approx(0.0));

    CHECK_THROWS_AS(nnls({}, {}), ParameterError);
}

TEST_CASE("nnls never returns negative components") {
    // A few fixed awkward systems (correlated columns, conflicting rows).
    const std::vector<std::vector<std::vector<double>>> mats = {
        {{1.0, 0.99}, {0.99, 1.0}},
        {{1.0, 2.0}, {2.0, 4.001}},
        {{1.0, -1.0}, {1.0, 1.0}, {2.0, 0.5}},
    };
    const std::vector<std::vector<double>> rhs = {
        {1.0, -1.0},
        {1.0, 1.9},
        {-0.5, 2.0, 0.3},
    };
    for (std::size_t i = 0; i < mats.size(); ++i) {
        const std::vector<double> x = nnls(mats[i], rhs[i]);
        for (double xi : x) CHECK(xi >= 0.0);
    }
}

TEST_CASE("union-find tracks connected components") {
    UnionFind uf(6);
    CHECK_FALSE(uf.same(0, 5));
    uf.unite(0, 1);
    uf.unite(1, 2);
    CHECK(uf.same(0, 2));
    CHECK_FALSE(uf.same(0, 3));
    uf.unite(4, 5);
    uf.unite(2, 4);
    CHECK(uf.same(0, 5));
    CHECK_FALSE(uf.same(3, 0));
}

TEST_CASE("median averages the middle pair") {
    CHECK(median({3.0}) == doctest::Approx(3.0));
    CHECK(median({3.0, 1.0, 2.0}) == doctest::Approx(2.0));
    CHECK(median({4.0, 1.0, 3.0, 2.0}) == doctest::Approx(2.5));
    CHECK_THROWS_AS(median({}), ParameterError);
}

}  // TEST_SUITE
