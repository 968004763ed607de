// One-dimensional comparison model
//
//     v'' - T v' = -lambda v,   T(t) = -(n-1)/t  (radial)  or  T = 0,
//     v(a) = -1, v'(a) = 0,
//
// integrated up to b(a), the first zero of v' after a. The profile is solved
// once at lambda = 1 in s = sqrt(lambda) t and rescaled; internally time is
// measured from a (tau = s - a_s) so that huge a keeps full resolution of
// delta = b - a.

#pragma once

#include "finsler/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace finsler {

enum class ModelKind { T_zero, T_radial };

inline const char* to_string(ModelKind k) { return k == ModelKind::T_zero ? "T_zero" : "T_radial"; }

inline constexpr double infinite_a = std::numeric_limits<double>::infinity();

struct OneDModel {
    int n = 2;
    double lambda = 1.0;
    ModelKind kind = ModelKind::T_radial;
    double a = 0.0;  // infinite_a allowed with T_zero only

    bool a_is_infinite() const { return std::isinf(a); }
};

struct OneDSolution {
    OneDModel model;
    std::vector<double> t_grid;
    std::vector<double> t_from_a;  // t - a, exact even when a is huge
    std::vector<double> v;
    std::vector<double> v_prime;
    std::vector<double> v_second;  // from the ODE, for interpolation
    double b = 0.0;
    double delta = 0.0;
    double m = 0.0;
    long steps = 0;
};

namespace detail {

inline void validate_model(const OneDModel& model)
{
    if (model.n < 1) throw ConfigError("model dimension n must be >= 1");
    if (!(model.lambda > 0.0) || !std::isfinite(model.lambda)) throw ConfigError("model lambda must be finite and > 0");
    if (std::isnan(model.a) || model.a < 0.0) throw ConfigError("model a must be >= 0");
    if (model.a_is_infinite() && model.kind != ModelKind::T_zero)
        throw ConfigError("a = infinity requires the T_zero model");
}

// y = (v, v') at lambda = 1; time tau measured from a_s.
struct OdeState {
    double v, w;
};

class UnitOde {
public:
    UnitOde(int n, ModelKind kind, double a_s) : c_(kind == ModelKind::T_radial ? n - 1.0 : 0.0), a_s_(a_s) {}

    OdeState rhs(double tau, const OdeState& y) const
    {
        const double s = a_s_ + tau;
        const double drift = c_ == 0.0 ? 0.0 : c_ / s * y.w;
        return {y.w, -drift - y.v};
    }

    double second(double tau, const OdeState& y) const { return rhs(tau, y).w; }

    // One Dormand-Prince 5(4) step; returns the 5th-order state and the
    // embedded error estimate.
    std::pair<OdeState, double> step(double tau, const OdeState& y, double h) const
    {
        static constexpr double a21 = 1.0 / 5;
        static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
        static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
        static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                                a65 = -5103.0 / 18656;
        static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                                b6 = 11.0 / 84;
        static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                                e6 = 22.0 / 525, e7 = -1.0 / 40;
        auto add = [](const OdeState& y0, std::initializer_list<std::pair<double, OdeState>> terms, double hh) {
            OdeState r = y0;
            for (const auto& [c, k] : terms) {
                r.v += hh * c * k.v;
                r.w += hh * c * k.w;
            }
            return r;
        };
        const OdeState k1 = rhs(tau, y);
        const OdeState k2 = rhs(tau + h / 5, add(y, {{a21, k1}}, h));
        const OdeState k3 = rhs(tau + 3 * h / 10, add(y, {{a31, k1}, {a32, k2}}, h));
        const OdeState k4 = rhs(tau + 4 * h / 5, add(y, {{a41, k1}, {a42, k2}, {a43, k3}}, h));
        const OdeState k5 = rhs(tau + 8 * h / 9, add(y, {{a51, k1}, {a52, k2}, {a53, k3}, {a54, k4}}, h));
        const OdeState k6 = rhs(tau + h, add(y, {{a61, k1}, {a62, k2}, {a63, k3}, {a64, k4}, {a65, k5}}, h));
        const OdeState y5 = add(y, {{b1, k1}, {b3, k3}, {b4, k4}, {b5, k5}, {b6, k6}}, h);
        const OdeState k7 = rhs(tau + h, y5);
        const double ev = h * (e1 * k1.v + e3 * k3.v + e4 * k4.v + e5 * k5.v + e6 * k6.v + e7 * k7.v);
        const double ew = h * (e1 * k1.w + e3 * k3.w + e4 * k4.w + e5 * k5.w + e6 * k6.w + e7 * k7.w);
        constexpr double atol = 1e-14, rtol = 1e-12;
        const double sv = atol + rtol * std::max(std::abs(y.v), std::abs(y5.v));
        const double sw = atol + rtol * std::max(std::abs(y.w), std::abs(y5.w));
        const double err = std::sqrt(0.5 * ((ev / sv) * (ev / sv) + (ew / sw) * (ew / sw)));
        return {y5, err};
    }

private:
    double c_;
    double a_s_;
};

struct UnitSample {
    double tau, v, w, w2;
};

struct UnitProfile {
    std::vector<UnitSample> samples;
    double tau_b = 0.0;
    double m = 0.0;
    long steps = 0;
};

inline UnitProfile integrate_unit(int n, ModelKind kind, double a_s)
{
    UnitOde ode(n, kind, a_s);
    UnitProfile out;
    double tau = 0.0;
    OdeState y{-1.0, 0.0};
    out.samples.push_back({0.0, -1.0, 0.0, kind == ModelKind::T_radial && a_s == 0.0 ? 1.0 / n : 1.0});
    if (kind == ModelKind::T_radial && a_s == 0.0 && n > 1) {
        // Taylor start across the 1/t singularity.
        const double s = 1e-4, dn = n;
        tau = s;
        y.v = -1.0 + s * s / (2 * dn) - s * s * s * s / (8 * dn * (dn + 2));
        y.w = s / dn - s * s * s / (2 * dn * (dn + 2));
        out.samples.push_back({tau, y.v, y.w, ode.second(tau, y)});
    }

    constexpr double h_max = 0.05;
    constexpr long max_steps = 1000000;
    double h = 1e-3;
    for (;;) {
        if (out.steps > max_steps) {
            std::ostringstream msg;
            msg << "1-D model integration exceeded " << max_steps << " steps at tau = " << tau << ", h = " << h;
            throw NumericalError(msg.str());
        }
        if (h < 1e-14) {
            std::ostringstream msg;
            msg << "1-D model step size underflow at tau = " << tau << " (v = " << y.v << ", v' = " << y.w << ")";
            throw NumericalError(msg.str());
        }
        auto [y1, err] = ode.step(tau, y, h);
        ++out.steps;
        if (!(err <= 1.0)) {
            h *= std::max(0.2, 0.9 * std::pow(std::isfinite(err) ? err : 1e10, -0.2));
            continue;
        }
        if (y1.w <= 0.0) {
            // v' changes sign inside (tau, tau + h]: bisect on the step length.
            double lo = 0.0, hi = h;
            while (hi - lo > 1e-13 * std::max(1.0, tau)) {
                const double mid = 0.5 * (lo + hi);
                if (ode.step(tau, y, mid).first.w > 0.0) lo = mid;
                else hi = mid;
                if (mid == lo && mid == hi) break;
            }
            const double hb = 0.5 * (lo + hi);
            const OdeState yb = ode.step(tau, y, hb).first;
            out.tau_b = tau + hb;
            out.m = yb.v;
            out.samples.push_back({out.tau_b, yb.v, 0.0, ode.second(out.tau_b, {yb.v, 0.0})});
            return out;
        }
        tau += h;
        y = y1;
        out.samples.push_back({tau, y.v, y.w, ode.second(tau, y)});
        h = std::min(h_max, h * std::min(5.0, 0.9 * std::pow(std::max(err, 1e-10), -0.2)));
    }
}

} // namespace detail

/// Integrates the model from a to b(a). Requires finite a.
inline OneDSolution solve_model(const OneDModel& model)
{
    detail::validate_model(model);
    if (model.a_is_infinite()) throw DomainError("solve_model needs finite a; delta() handles a = infinity");
    const double root = std::sqrt(model.lambda);
    const double a_s = model.a * root;
    const auto unit = detail::integrate_unit(model.n, model.kind, a_s);

    OneDSolution sol;
    sol.model = model;
    sol.steps = unit.steps;
    sol.delta = unit.tau_b / root;
    sol.b = model.a + sol.delta;
    sol.m = unit.m;
    const std::size_t k = unit.samples.size();
    sol.t_grid.reserve(k);
    sol.t_from_a.reserve(k);
    sol.v.reserve(k);
    sol.v_prime.reserve(k);
    sol.v_second.reserve(k);
    for (const auto& s : unit.samples) {
        sol.t_grid.push_back(model.a + s.tau / root);
        sol.t_from_a.push_back(s.tau / root);
        sol.v.push_back(s.v);
        sol.v_prime.push_back(root * s.w);
        sol.v_second.push_back(model.lambda * s.w2);
    }
    return sol;
}

/// The profile used for comparisons: a = infinity means the T_zero model
/// v = -cos(sqrt(lambda) t) on [0, pi / sqrt(lambda)].
inline OneDSolution comparison_profile(const OneDModel& model)
{
    if (!model.a_is_infinite()) return solve_model(model);
    OneDModel flat = model;
    flat.kind = ModelKind::T_zero;
    flat.a = 0.0;
    OneDSolution sol = solve_model(flat);
    sol.model = model;
    return sol;
}

/// delta(a) = b(a) - a, with delta(infinity) = pi / sqrt(lambda).
inline double delta(const OneDModel& model)
{
    detail::validate_model(model);
    if (model.a_is_infinite()) return pi / std::sqrt(model.lambda);
    return solve_model(model).delta;
}

struct ModelMatch {
    OneDModel model;
    bool clamped = false;  // umax < m(0): returned a = 0
    double m = 0.0;        // m at the returned a (1 for a = infinity)
};

/// Finds the radial model whose endpoint value m(a) equals umax.
inline ModelMatch match_model(int n, double lambda, double umax)
{
    if (!(umax > 0.0) || !(umax <= 1.0)) throw DomainError("match_model needs umax in (0, 1]");
    OneDModel base{n, lambda, ModelKind::T_radial, 0.0};
    detail::validate_model(base);
    ModelMatch out;
    if (umax >= 1.0 - 1e-9) {
        out.model = {n, lambda, ModelKind::T_zero, infinite_a};
        out.m = 1.0;
        return out;
    }
    // work at lambda = 1 in a_s = a sqrt(lambda)
    auto m_of = [n](double a_s) { return detail::integrate_unit(n, ModelKind::T_radial, a_s).m; };
    const double root = std::sqrt(lambda);
    const double m0 = m_of(0.0);
    if (umax < m0) {
        out.model = base;
        out.clamped = true;
        out.m = m0;
        return out;
    }
    std::vector<std::pair<double, double>> table{{0.0, m0}};
    double prev_a = 0.0, prev_m = m0;
    for (double a_s = 1e-3; a_s <= 1e10 * 1.0001; a_s *= std::sqrt(2.0)) {
        const double m = m_of(a_s);
        table.emplace_back(a_s, m);
        if ((prev_m - umax) * (m - umax) <= 0.0) {
            double lo = prev_a, hi = a_s, mlo = prev_m;
            double mid = hi, mm = m;
            for (int it = 0; it < 200; ++it) {
                if (std::abs(mm - umax) <= 1e-10) break;
                mid = 0.5 * (lo + hi);
                mm = m_of(mid);
                if ((mlo - umax) * (mm - umax) <= 0.0) {
                    hi = mid;
                } else {
                    lo = mid;
                    mlo = mm;
                }
                if (hi - lo <= 1e-15 * hi) break;
            }
            if (std::abs(mm - umax) > 1e-9) {
                mid = std::abs(mlo - umax) < std::abs(mm - umax) ? lo : mid;
                mm = m_of(mid);
            }
            out.model = {n, lambda, ModelKind::T_radial, mid / root};
            out.m = mm;
            return out;
        }
        prev_a = a_s;
        prev_m = m;
    }
    std::ostringstream msg;
    msg << "match_model could not bracket m(a) = " << umax << "; scanned (a, m(a)):";
    for (const auto& [a, m] : table) msg << " (" << a / root << ", " << m << ")";
    throw NumericalError(msg.str());
}

/// v'(v^{-1}(u)) from the sampled profile: v is inverted on the cubic Hermite
/// interpolant of (t, v, v') and v' is read off the Hermite interpolant of
/// (t, v', v''). Exact at the samples; 0 at both endpoints.
inline double v_prime_of_u(const OneDSolution& sol, double u)
{
    const auto& v = sol.v;
    const double lo = v.front(), hi = v.back();
    const double clamp = 1e-12 * std::max(1.0, std::abs(hi - lo));
    if (u < lo - clamp || u > hi + clamp) {
        std::ostringstream msg;
        msg << "u = " << u << " outside the model range [" << lo << ", " << hi << "]";
        throw DomainError(msg.str());
    }
    if (u <= lo || u >= hi) return 0.0;
    const auto it = std::upper_bound(v.begin(), v.end(), u);
    const std::size_t k = static_cast<std::size_t>(it - v.begin()) - 1;
    if (v[k] == u) return sol.v_prime[k];
    const double h = sol.t_from_a[k + 1] - sol.t_from_a[k];
    auto hermite = [h](double y0, double y1, double d0, double d1, double x) {
        const double x2 = x * x, x3 = x2 * x;
        return (2 * x3 - 3 * x2 + 1) * y0 + (x3 - 2 * x2 + x) * h * d0 + (-2 * x3 + 3 * x2) * y1 + (x3 - x2) * h * d1;
    };
    double a = 0.0, b = 1.0;
    for (int i = 0; i < 100 && b - a > 1e-16; ++i) {
        const double mid = 0.5 * (a + b);
        if (hermite(v[k], v[k + 1], sol.v_prime[k], sol.v_prime[k + 1], mid) < u) a = mid;
        else b = mid;
    }
    const double x = 0.5 * (a + b);
    const double vp = hermite(sol.v_prime[k], sol.v_prime[k + 1], sol.v_second[k], sol.v_second[k + 1], x);
    return std::max(0.0, vp);
}

} // namespace finsler
