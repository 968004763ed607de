#include "finsler/model1d.hpp"

#include "catch_amalgamated.hpp"

#include <cmath>

using namespace finsler;
using Catch::Approx;

namespace {

// first positive zero of f above `lo`, by scan and bisection
template <class F>
double first_zero(F f, double lo, double step = 1e-2)
{
    double a = lo, fa = f(a);
    for (double b = lo + step;; b += step) {
        const double fb = f(b);
        if (fa * fb <= 0) {
            for (int i = 0; i < 200; ++i) {
                const double m = 0.5 * (a + b);
                (f(m) * fa <= 0 ? b : a) = m;
                if (f(m) * fa > 0) fa = f(m);
            }
            return 0.5 * (a + b);
        }
        a = b;
        fa = fb;
    }
}

// Radial solution with v(0) = -1, v'(0) = 0 at lambda = 1:
// v = -Gamma(n/2) (t/2)^(1 - n/2) J_{n/2 - 1}(t); v' vanishes at the first zero of J_{n/2}.
double radial_v(int n, double t)
{
    const double nu = 0.5 * n - 1;
    if (t == 0) return -1;
    return -std::tgamma(0.5 * n) * std::pow(0.5 * t, -nu) * std::cyl_bessel_j(nu, t);
}

double radial_b(int n)
{
    return first_zero([n](double t) { return std::cyl_bessel_j(0.5 * n, t); }, 0.5);
}

OneDModel radial(int n, double lambda, double a) { return {n, lambda, ModelKind::T_radial, a}; }

} // namespace

TEST_CASE("bessel oracle, n = 2", "[model1d]")
{
    const auto sol = solve_model(radial(2, 1, 0));
    CHECK(std::abs(sol.b - 3.831706) < 1e-6);
    CHECK(std::abs(sol.m - 0.402759) < 1e-6);
    CHECK(sol.b == Approx(radial_b(2)).epsilon(1e-11));
    CHECK(sol.m == Approx(-std::cyl_bessel_j(0.0, radial_b(2))).epsilon(1e-10));
    for (std::size_t k = 0; k < sol.t_grid.size(); ++k) {
        REQUIRE(std::abs(sol.v[k] + std::cyl_bessel_j(0.0, sol.t_grid[k])) < 1e-10);
        REQUIRE(std::abs(sol.v_prime[k] - std::cyl_bessel_j(1.0, sol.t_grid[k])) < 1e-10);
    }
}

TEST_CASE("bessel oracle, n = 3 and 5", "[model1d]")
{
    const auto s3 = solve_model(radial(3, 1, 0));
    CHECK(std::abs(s3.b - 4.493409) < 1e-6);
    CHECK(std::abs(s3.m - 0.21723) < 1e-5);
    const double tan_root = first_zero([](double x) { return std::sin(x) - x * std::cos(x); }, 3.2);
    CHECK(s3.b == Approx(tan_root).epsilon(1e-11));
    CHECK(s3.m == Approx(-std::sin(tan_root) / tan_root).epsilon(1e-10));

    const auto s5 = solve_model(radial(5, 1, 0));
    CHECK(s5.b == Approx(radial_b(5)).epsilon(1e-11));
    CHECK(s5.m == Approx(radial_v(5, radial_b(5))).epsilon(1e-10));
}

TEST_CASE("T_zero closed form", "[model1d]")
{
    for (double lambda : {1.0, 4.0, 0.3}) {
        const double r = std::sqrt(lambda);
        const auto sol = solve_model({2, lambda, ModelKind::T_zero, 0.7});
        CHECK(sol.delta == Approx(pi / r).epsilon(1e-11));
        CHECK(sol.m == Approx(1.0).epsilon(1e-11));
        for (std::size_t k = 0; k < sol.v.size(); ++k) {
            REQUIRE(std::abs(sol.v[k] + std::cos(r * sol.t_from_a[k])) < 1e-10);
            REQUIRE(std::abs(sol.v_prime[k] - r * std::sin(r * sol.t_from_a[k])) < 1e-10 * r);
        }
    }
}

TEST_CASE("delta", "[model1d]")
{
    CHECK(delta({2, 4, ModelKind::T_zero, infinite_a}) == Approx(pi / 2).epsilon(1e-15));
    CHECK(delta(radial(2, 1, 0)) == Approx(3.831706).epsilon(1e-6));
    CHECK(std::abs(delta(radial(2, 1, 100)) / pi - 1) < 0.01);
    CHECK(delta(radial(2, 1, 100)) > pi);
}

TEST_CASE("delta exceeds the flat value and m stays below 1", "[model1d][property]")
{
    for (int n : {2, 3, 5})
        for (double lambda : {1.0, 3.0})
            for (double a : {0.0, 0.1, 1.0, 10.0, 100.0}) {
                const auto sol = solve_model(radial(n, lambda, a));
                INFO("n " << n << " lambda " << lambda << " a " << a);
                REQUIRE(sol.delta > pi / std::sqrt(lambda));
                REQUIRE(sol.m < 1.0);
                REQUIRE(sol.m > -1.0);
            }
    // m -> 1, at the WKB rate: the (n-1)/t damping leaves amplitude (a/(a+delta))^((n-1)/2)
    for (double a : {100.0, 1000.0, 10000.0}) {
        const double m = solve_model(radial(2, 1, a)).m;
        CHECK(std::abs(m - std::sqrt(a / (a + pi))) < 2.0 / (a * a) + 1e-9);
    }
    CHECK(solve_model(radial(2, 1, 1e4)).m > 0.999);
}

TEST_CASE("profile invariants", "[model1d]")
{
    for (double a : {0.0, 0.5, 20.0}) {
        const double lambda = 2.5;
        const auto sol = solve_model(radial(3, lambda, a));
        CHECK(sol.v.front() == -1.0);
        CHECK(sol.v_prime.front() == 0.0);
        CHECK(std::abs(sol.v_prime.back()) <= 1e-12 * std::sqrt(lambda));
        CHECK(sol.t_grid.front() == a);
        CHECK(sol.t_grid.back() == Approx(sol.b).epsilon(1e-14));
        for (std::size_t k = 1; k + 1 < sol.v.size(); ++k) {
            REQUIRE(sol.v_prime[k] > 0);
            REQUIRE(sol.v[k] > sol.v[k - 1]);
        }
        CHECK(sol.v.back() == sol.m);
    }
}

TEST_CASE("scale covariance", "[model1d][property]")
{
    for (double a : {0.0, 0.3, 5.0}) {
        const double lambda = 7.0, r = std::sqrt(lambda);
        const auto s = solve_model(radial(2, lambda, a));
        const auto u = solve_model(radial(2, 1.0, a * r));
        CHECK(s.delta == Approx(u.delta / r).epsilon(1e-10));
        CHECK(std::abs(s.m - u.m) < 1e-10);
        REQUIRE(s.v.size() == u.v.size());
        for (std::size_t k = 0; k < s.v.size(); ++k) {
            REQUIRE(std::abs(s.v[k] - u.v[k]) < 1e-10);
            REQUIRE(std::abs(s.v_prime[k] - r * u.v_prime[k]) < 1e-10 * r);
        }
    }
}

TEST_CASE("match_model", "[model1d]")
{
    const auto inf = match_model(2, 1, 1.0);
    CHECK(inf.model.a_is_infinite());
    CHECK(inf.model.kind == ModelKind::T_zero);
    CHECK(inf.m == 1.0);

    const auto zero = match_model(2, 1, 0.402759);
    CHECK(zero.model.a < 1e-3);

    for (double lambda : {1.0, 9.0}) {
        const auto m = match_model(2, lambda, 0.7);
        CHECK_FALSE(m.clamped);
        CHECK(std::abs(solve_model(m.model).m - 0.7) <= 1e-9);
    }

    const auto clamp = match_model(2, 1, 0.2);
    CHECK(clamp.clamped);
    CHECK(clamp.model.a == 0.0);

    CHECK_THROWS_AS(match_model(2, 1, 0.0), DomainError);
    CHECK_THROWS_AS(match_model(2, 1, 1.5), DomainError);
}

TEST_CASE("v' o v^-1", "[model1d]")
{
    const auto flat = solve_model({2, 1, ModelKind::T_zero, 0.0});
    CHECK(v_prime_of_u(flat, -1.0) == 0.0);
    CHECK(v_prime_of_u(flat, flat.m) == 0.0);
    CHECK(v_prime_of_u(flat, 0.0) == Approx(1.0).epsilon(1e-9));
    for (double u = -0.99; u < 0.99; u += 0.0137)
        REQUIRE(std::abs(v_prime_of_u(flat, u) - std::sqrt(1 - u * u)) < 1e-8);

    const auto bes = solve_model(radial(2, 1, 0));
    for (double t = 0.05; t < bes.b - 0.05; t += 0.0731) {
        const double u = -std::cyl_bessel_j(0.0, t);
        REQUIRE(std::abs(v_prime_of_u(bes, u) - std::cyl_bessel_j(1.0, t)) < 1e-8);
    }
    CHECK_THROWS_AS(v_prime_of_u(bes, -1.01), DomainError);
    CHECK_THROWS_AS(v_prime_of_u(bes, 0.5), DomainError);

    const auto cmp = comparison_profile({2, 4, ModelKind::T_zero, infinite_a});
    CHECK(cmp.model.a_is_infinite());
    CHECK(v_prime_of_u(cmp, 0.0) == Approx(2.0).epsilon(1e-9));
}

TEST_CASE("model validation", "[model1d]")
{
    CHECK_THROWS_AS(solve_model(radial(0, 1, 0)), ConfigError);
    CHECK_THROWS_AS(solve_model(radial(2, 0, 0)), ConfigError);
    CHECK_THROWS_AS(solve_model(radial(2, 1, -1)), ConfigError);
    CHECK_THROWS_AS(solve_model(radial(2, 1, infinite_a)), ConfigError);
    CHECK_THROWS_AS(solve_model({2, 1, ModelKind::T_zero, infinite_a}), DomainError);
}
