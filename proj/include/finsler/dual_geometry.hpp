// Dual norm F0(x) = sup <x, xi> / F(xi), F-distances, Wulff balls and the
// anisotropic Cauchy-Schwarz inequality.
//
// Families with a closed-form conjugate (euclidean, p-norm, quadratic) are
// evaluated exactly. Everything else goes through support_ascent(), a
// multistart projected gradient ascent on the unit sphere of the gauge whose
// answer carries an a-posteriori upper bound on its own error.

#pragma once

#include "finsler/norms.hpp"
#include "finsler/types.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>

namespace finsler {

struct DualEval {
    double value = 0.0;
    Vec maximizer;               // unit F-norm, attains the sup
    double certified_gap = 0.0;  // value is within this of the true sup (0 for closed forms)
};

/// A convex, even, 1-homogeneous gauge: value and gradient at xi != 0.
using GaugeEval = GaugeGrad;
using Gauge = std::function<GaugeEval(const Vec&)>;

inline constexpr std::uint64_t default_dual_seed = 0x5eedF00DULL;

/// sup_{xi != 0} <x, xi> / gauge(xi) by multistart projected ascent.
///
/// `lower` must satisfy gauge(xi) >= lower * |xi|. With h = grad gauge at
/// the returned point (gauge = 1) and x = t h + r, r orthogonal to h, every
/// xi obeys <x, xi> <= |t| gauge(xi) + |r| |xi|, so |t| + |r| / lower bounds
/// the sup from above. A sharper bound comes from n supporting planes at
/// points around the maximizer (see certify below); certified_gap is the
/// best bound minus the attained value.
inline DualEval support_ascent(const Gauge& gauge, const Vec& x, double lower,
                               std::uint64_t seed = default_dual_seed)
{
    const int n = static_cast<int>(x.size());
    DualEval out;
    auto normalize = [&](Vec v) {
        const double g = gauge(v).value;
        return Vec(v / g);
    };
    if (x.cwiseAbs().maxCoeff() == 0.0) {
        out.maximizer = normalize(Vec::Unit(n, 0));
        return out;
    }

    struct Walker {
        Vec xi;
        double value;
    };
    // One projected ascent run; returns the last iterate.
    auto climb = [&](Vec xi, int iters, double tol) {
        xi = normalize(xi);
        double val = x.dot(xi);
        double step = 1.0 / std::max(x.norm(), 1e-300);
        Vec prev_xi, prev_d;
        for (int it = 0; it < iters; ++it) {
            const GaugeEval g = gauge(xi);
            const Vec d = x - val * g.grad;  // grad of <x,xi>/gauge(xi) at gauge = 1
            const double dn2 = d.squaredNorm();
            if (std::sqrt(dn2) <= tol * x.norm()) break;
            if (it > 0) {
                const Vec s = xi - prev_xi, y = prev_d - d;
                const double sy = s.dot(y);
                if (sy > 0.0) step = s.squaredNorm() / sy;
            }
            bool accepted = false;
            for (int bt = 0; bt < 60; ++bt) {
                const Vec trial = normalize(xi + step * d);
                const double tv = x.dot(trial);
                if (tv >= val + 1e-4 * step * dn2 || (tv > val && bt > 30)) {
                    prev_xi = xi;
                    prev_d = d;
                    xi = trial;
                    val = tv;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) break;
        }
        return Walker{xi, val};
    };

    std::vector<Vec> starts;
    for (int i = 0; i < n; ++i) {
        starts.push_back(Vec::Unit(n, i));
        starts.push_back(-Vec::Unit(n, i));
    }
    Rng rng(seed);
    for (int k = 0; k < 16; ++k) starts.push_back(rng.normal_vector(n));

    Walker best{Vec(), -1.0};
    for (const Vec& s : starts) {
        Walker w = climb(s, 8, 1e-14);
        if (w.value > best.value) best = std::move(w);
    }

    // Tangent simplex directions: n points of a regular simplex in R^{n-1}.
    Mat simplex(std::max(n - 1, 1), n);
    if (n >= 2) {
        const Mat centered = Mat::Identity(n, n) - Mat::Constant(n, n, 1.0 / n);
        const Mat q = Eigen::HouseholderQR<Mat>(centered).householderQ();
        simplex = q.leftCols(n - 1).transpose() * centered;
    }

    // Upper bounds on the sup from supporting hyperplanes: gauge(xi) >= <h, xi>
    // for h = grad gauge at any point with gauge 1, so x = sum alpha_j h_j with
    // alpha >= 0 bounds the sup by sum alpha_j. One plane plus the Euclidean
    // ball gives a first-order bound; n planes around the maximizer give an
    // O(eps^2) one.
    auto certify = [&](const Walker& w) {
        const Vec h = gauge(w.xi).grad;
        const double t = x.dot(h) / h.squaredNorm();
        const double r = (x - t * h).norm();
        double bound = std::abs(t) + r / lower;
        if (n >= 2) {
            const Mat tangent = Eigen::HouseholderQR<Mat>(h).householderQ();
            const Mat U = tangent.rightCols(n - 1);
            for (double eps : {1e-7, 1e-6, 1e-5, 1e-4, 1e-3}) {
                Mat H(n, n);
                for (int j = 0; j < n; ++j) H.col(j) = gauge(normalize(w.xi + eps * w.xi.norm() * U * simplex.col(j))).grad;
                const Vec alpha = H.colPivHouseholderQr().solve(x);
                if ((H * alpha - x).norm() > 1e-12 * x.norm() || alpha.minCoeff() < 0.0) continue;
                bound = std::min(bound, alpha.sum());
            }
        }
        return std::max(0.0, bound - w.value);
    };
    double gap = certify(best);
    for (int round = 0; round < 20 && gap > 1e-13 * best.value; ++round) {
        Walker w = climb(best.xi, 200, 1e-16);
        const double g = certify(w);
        if (w.value < best.value && g >= gap) break;
        if (w.value >= best.value) best = std::move(w);
        gap = std::min(gap, certify(best));
    }

    out.value = best.value;
    out.maximizer = best.xi;
    out.certified_gap = certify(best);
    if (out.certified_gap > 1e-8 * out.value) {
        throw NumericalError("dual norm ascent did not certify: gap " +
                             format_double(out.certified_gap) + " at value " +
                             format_double(out.value));
    }
    return out;
}

inline Gauge norm_gauge(const NormSpec& spec)
{
    return [spec](const Vec& xi) { return eval_gradient(spec, xi); };
}

/// Numerical F0 regardless of family; the fallback path of dual_norm().
inline DualEval dual_norm_numeric(const NormSpec& spec, const Vec& x,
                                  std::uint64_t seed = default_dual_seed)
{
    validate(spec);
    detail::require_dim(spec, x.size());
    return support_ascent(norm_gauge(spec), x, euclidean_bounds(spec).lower, seed);
}

/// The spec of F0 when the family has a closed-form conjugate.
inline std::optional<NormSpec> dual_spec(const NormSpec& spec)
{
    switch (spec.family) {
    case NormFamily::euclidean: return spec;
    case NormFamily::p_norm: return NormSpec::p_norm(spec.p / (spec.p - 1.0), spec.n);
    case NormFamily::quadratic: return NormSpec::quadratic(spec.A.inverse());
    case NormFamily::regularized: return std::nullopt;
    }
    return std::nullopt;
}

inline DualEval dual_norm(const NormSpec& spec, const Vec& x, std::uint64_t seed = default_dual_seed)
{
    detail::require_dim(spec, x.size());
    const int n = spec.n;
    DualEval out;
    out.certified_gap = 0.0;
    switch (spec.family) {
    case NormFamily::euclidean:
        out.value = x.norm();
        out.maximizer = out.value > 0.0 ? Vec(x / out.value) : Vec(Vec::Unit(n, 0));
        return out;
    case NormFamily::p_norm: {
        const double q = spec.p / (spec.p - 1.0);
        out.value = detail::p_norm_value(x, q);
        if (out.value == 0.0) {
            out.maximizer = Vec::Unit(n, 0);
            return out;
        }
        // Hoelder equality: |xi_i|^p proportional to |x_i|^q.
        Vec xi(n);
        for (int i = 0; i < n; ++i) xi[i] = detail::sgn(x[i]) * std::pow(std::abs(x[i]) / out.value, q - 1.0);
        out.maximizer = xi / eval_norm(spec, xi);
        return out;
    }
    case NormFamily::quadratic: {
        const Vec y = spec.A.ldlt().solve(x);
        out.value = std::sqrt(std::max(0.0, x.dot(y)));
        out.maximizer = out.value > 0.0 ? Vec(y / out.value) : Vec(Vec::Unit(n, 0) / eval_norm(spec, Vec::Unit(n, 0)));
        return out;
    }
    case NormFamily::regularized: return dual_norm_numeric(spec, x, seed);
    }
    return out;
}

/// F0 as a gauge, with the dual maximizer as its gradient.
inline Gauge dual_gauge(const NormSpec& spec, std::uint64_t seed = default_dual_seed)
{
    if (auto ds = dual_spec(spec)) return norm_gauge(*ds);
    return [spec, seed](const Vec& xi) {
        DualEval d = dual_norm(spec, xi, seed);
        return GaugeEval{d.value, d.maximizer};
    };
}

/// (F0)0(x), computed numerically from F0; equals F(x) for a norm.
inline DualEval bidual_norm(const NormSpec& spec, const Vec& x, std::uint64_t seed = default_dual_seed)
{
    // F0(eta) >= |eta| / C whenever F(xi) <= C |xi|.
    const double lower = 1.0 / euclidean_bounds(spec).upper;
    return support_ascent(dual_gauge(spec, seed), x, lower, seed);
}

/// d_F(x1, x2) = F0(x2 - x1).
inline double f_distance(const NormSpec& spec, const Vec& x1, const Vec& x2)
{
    return dual_norm(spec, Vec(x2 - x1)).value;
}

/// Whether y lies in the Wulff ball {F0(. - center) <= r}.
inline bool wulff_contains(const NormSpec& spec, const Vec& center, double r, const Vec& y)
{
    if (r < 0.0) throw DomainError("Wulff ball radius must be >= 0");
    return dual_norm(spec, Vec(y - center)).value <= r;
}

/// F(xi) F0(eta) - <xi, eta>, nonnegative up to roundoff.
inline double cauchy_schwarz_gap(const NormSpec& spec, const Vec& xi, const Vec& eta)
{
    return eval_norm(spec, xi) * dual_norm(spec, eta).value - xi.dot(eta);
}

} // namespace finsler
