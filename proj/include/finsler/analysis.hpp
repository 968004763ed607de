// Pointwise identities and inequalities for Qu = a_ij(grad u) u_ij on smooth
// probes, and the PDE-level bounds evaluated on discrete eigenfunctions.

#pragma once

#include "finsler/check_report.hpp"
#include "finsler/domain.hpp"
#include "finsler/dual_geometry.hpp"
#include "finsler/eigensolver.hpp"
#include "finsler/model1d.hpp"
#include "finsler/norms.hpp"
#include "finsler/probes.hpp"
#include "finsler/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

namespace finsler {

/// Jet of u together with the norm tensors at grad u.
struct ProbePoint {
    Jet u;
    NormTensors t;
    double Qu = 0.0;   // a_ij u_ij
    double FFu = 0.0;  // F_i F_j u_ij

    ProbePoint(const NormSpec& spec, const TestFunction& f, const Vec& x, bool want_a3)
    {
        u = f.eval(x);
        if (u.grad.cwiseAbs().maxCoeff() == 0.0) throw DomainError("probe gradient vanishes at the sample point");
        t = eval_tensors(spec, u.grad, want_a3);
        Qu = (t.a.cwiseProduct(u.hess)).sum();
        FFu = t.grad.dot(u.hess * t.grad);
    }
};

struct BochnerTerms {
    double lhs = 0.0;
    double rhs = 0.0;
};

/// Both sides of the Bochner formula
///   a_ij (F^2/2(grad u))_ij = a_ij a_kl u_ik u_jl + (Qu)_k G_k - a_ijl (G(grad u))_l u_ij,
/// G = F F_xi, each assembled from exact derivatives.
inline BochnerTerms bochner_terms(const NormSpec& spec, const TestFunction& f, const Vec& x)
{
    const ProbePoint pp(spec, f, x, true);
    const Mat& a = pp.t.a;
    const Mat& U = pp.u.hess;
    const Tensor3& U3 = pp.u.third;
    const Tensor3& a3 = pp.t.a3;
    const int n = static_cast<int>(x.size());
    const Vec G = pp.t.value * pp.t.grad;

    // (F^2/2(grad u))_ij = a_kl u_ki u_lj + G_k u_kij
    Mat H = U * a * U;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) H(i, j) += G[k] * U3(k, i, j);
    BochnerTerms out;
    out.lhs = a.cwiseProduct(H).sum();

    const double quad = (a * U * a * U).trace();
    // (Qu)_k = a_ijm u_mk u_ij + a_ij u_ijk
    Vec dQ = Vec::Zero(n);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double s = a(i, j) * U3(i, j, k);
                for (int m = 0; m < n; ++m) s += a3(i, j, m) * U(m, k) * U(i, j);
                dQ[k] += s;
            }
    // (G(grad u))_l = G_m u_ml
    const Vec dG = U * G;
    double cubic = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l) cubic += a3(i, j, l) * dG[l] * U(i, j);
    out.rhs = quad + dQ.dot(G) - cubic;
    return out;
}

/// |LHS - RHS| of the Bochner formula.
inline double bochner_residual(const NormSpec& spec, const TestFunction& f, const Vec& x)
{
    const auto b = bochner_terms(spec, f, x);
    return std::abs(b.lhs - b.rhs);
}

/// max_ij |a_ijk u_k|, zero by homogeneity.
inline double homogeneity_residual(const NormSpec& spec, const TestFunction& f, const Vec& x)
{
    const ProbePoint pp(spec, f, x, true);
    return pp.t.a3.contract_last(pp.u.grad).cwiseAbs().maxCoeff();
}

struct InequalityTerms {
    double lhs = 0.0;
    double rhs = 0.0;
    double gap() const { return lhs - rhs; }
};

/// a_ij a_kl u_ik u_jl  versus  a_ij F_k F_l u_ik u_jl.
inline InequalityTerms kato_terms(const NormSpec& spec, const TestFunction& f, const Vec& x)
{
    const ProbePoint pp(spec, f, x, false);
    const Mat& a = pp.t.a;
    const Mat& U = pp.u.hess;
    const Vec UF = U * pp.t.grad;
    return {(a * U * a * U).trace(), UF.dot(a * UF)};
}

inline double kato_gap(const NormSpec& spec, const TestFunction& f, const Vec& x)
{
    return kato_terms(spec, f, x).gap();
}

/// a_ij a_kl u_ik u_jl  versus  (Qu)^2/n + n/(n-1) (Qu/n - F_i F_j u_ij)^2.
inline InequalityTerms extended_cd_terms(const NormSpec& spec, const TestFunction& f, const Vec& x)
{
    const int n = static_cast<int>(x.size());
    if (n < 2) throw DomainError("the curvature-dimension bound needs n >= 2");
    const ProbePoint pp(spec, f, x, false);
    const Mat& a = pp.t.a;
    const Mat& U = pp.u.hess;
    const double dn = n;
    const double d = pp.Qu / dn - pp.FFu;
    return {(a * U * a * U).trace(), pp.Qu * pp.Qu / dn + dn / (dn - 1.0) * d * d};
}

inline double extended_cd_gap(const NormSpec& spec, const TestFunction& f, const Vec& x)
{
    return extended_cd_terms(spec, f, x).gap();
}

struct LevelSetTerms {
    double Qu = 0.0;
    double F = 0.0;
    double H_F = 0.0;
    double FFu = 0.0;
    double residual() const { return std::abs(Qu + F * H_F - FFu); }
};

/// Qu against -F H_F(level curve) + F_i F_j u_ij at x. The level curve through
/// x is realized by its second-order jet, oriented so that its outward normal
/// is -grad u / |grad u| (u increases inward).
inline LevelSetTerms levelset_terms(const NormSpec& spec, const TestFunction& f, const Vec& x)
{
    if (x.size() != 2) throw ConfigError("level-set identity is checked on planar probes");
    if (!is_strongly_convex(spec)) throw ConfigError("level-set identity needs a strongly convex norm");
    const ProbePoint pp(spec, f, x, false);
    const Vec2 g(pp.u.grad[0], pp.u.grad[1]);
    const Mat2 U = pp.u.hess.topLeftCorner<2, 2>();
    const double gn = g.norm();
    const Vec2 nu = -g / gn;
    const Vec2 e(-nu[1], nu[0]);
    const Vec2 curv = -(e.dot(U * e)) / (gn * gn) * g;
    const auto curve = SmoothBoundaryCurve::jet(Vec2(x[0], x[1]), e, curv);
    LevelSetTerms out;
    out.Qu = pp.Qu;
    out.F = pp.t.value;
    out.FFu = pp.FFu;
    out.H_F = f_mean_curvature(curve, spec, 0.0);
    return out;
}

inline double levelset_identity_residual(const NormSpec& spec, const TestFunction& f, const Vec& x)
{
    return levelset_terms(spec, f, x).residual();
}

// ---------------------------------------------------------------------------
// Seeded sweeps
// ---------------------------------------------------------------------------

struct SweepOptions {
    int samples = 200;
    std::uint64_t seed = 20240611;
    double box_lo = 0.0;
    double box_hi = 1.0;
};

namespace detail {

/// Whether grad u is a safe evaluation point for the spec's third
/// derivatives: p-norm tensors blow up where a component vanishes.
inline bool safe_gradient(const NormSpec& spec, const Vec& g)
{
    const double gn = g.norm();
    if (!(gn > 1e-6)) return false;
    const NormSpec& base = spec.family == NormFamily::regularized ? *spec.base : spec;
    if (base.family == NormFamily::p_norm && base.p != 2.0)
        return g.cwiseAbs().minCoeff() >= 1e-3 * gn;
    return true;
}

inline std::string seed_string(std::uint64_t s)
{
    std::ostringstream os;
    os << s;
    return os.str();
}

/// Calls visit(probe, x) on `samples` random safe (probe, point) pairs,
/// cycling through the probe kinds.
template <typename Visit>
void sweep_probes(const NormSpec& spec, const SweepOptions& opt, Visit&& visit)
{
    Rng rng(opt.seed);
    const ProbeKind kinds[] = {ProbeKind::polynomial, ProbeKind::trig_product, ProbeKind::radial};
    int done = 0;
    long attempts = 0;
    while (done < opt.samples) {
        if (++attempts > 1000L * std::max(opt.samples, 1))
            throw NumericalError("probe sweep could not find safe sample points");
        const TestFunction f = random_probe(rng, spec.n, kinds[done % 3]);
        Vec x(spec.n);
        for (int i = 0; i < spec.n; ++i) x[i] = rng.uniform(opt.box_lo, opt.box_hi);
        if (!safe_gradient(spec, f.eval(x).grad)) continue;
        visit(f, x);
        ++done;
    }
}

inline CheckReport new_report(const std::string& name, const NormSpec& spec, const SweepOptions& opt, double threshold)
{
    CheckReport r;
    r.name = name;
    r.threshold = threshold;
    r.metadata["norm"] = describe(spec);
    r.metadata["seed"] = seed_string(opt.seed);
    return r;
}

} // namespace detail

/// Violation = residual / (1 + |LHS|); threshold 1e-8.
inline CheckReport bochner_sweep(const NormSpec& spec, const SweepOptions& opt = {})
{
    CheckReport r = detail::new_report("bochner", spec, opt, 1e-8);
    detail::sweep_probes(spec, opt, [&](const TestFunction& f, const Vec& x) {
        const auto b = bochner_terms(spec, f, x);
        r.record(std::abs(b.lhs - b.rhs) / (1.0 + std::abs(b.lhs)), x);
    });
    r.finalize();
    return r;
}

/// Violation = max |a_ijk u_k|; threshold 1e-10.
inline CheckReport homogeneity_sweep(const NormSpec& spec, const SweepOptions& opt = {})
{
    CheckReport r = detail::new_report("homogeneity_a3", spec, opt, 1e-10);
    detail::sweep_probes(spec, opt, [&](const TestFunction& f, const Vec& x) {
        r.record(homogeneity_residual(spec, f, x), x);
    });
    r.finalize();
    return r;
}

/// Violation = -gap / (1 + |LHS|); threshold 1e-10.
inline CheckReport kato_sweep(const NormSpec& spec, const SweepOptions& opt = {})
{
    CheckReport r = detail::new_report("kato", spec, opt, 1e-10);
    detail::sweep_probes(spec, opt, [&](const TestFunction& f, const Vec& x) {
        const auto k = kato_terms(spec, f, x);
        r.record(-k.gap() / (1.0 + std::abs(k.lhs)), x);
    });
    r.finalize();
    return r;
}

inline CheckReport extended_cd_sweep(const NormSpec& spec, const SweepOptions& opt = {})
{
    CheckReport r = detail::new_report("extended_cd", spec, opt, 1e-10);
    detail::sweep_probes(spec, opt, [&](const TestFunction& f, const Vec& x) {
        const auto k = extended_cd_terms(spec, f, x);
        r.record(-k.gap() / (1.0 + std::abs(k.lhs)), x);
    });
    r.finalize();
    return r;
}

/// F(xi) F0(eta) >= <xi, eta> on random pairs; violation = -gap / (1 + F F0).
inline CheckReport cauchy_schwarz_sweep(const NormSpec& spec, const SweepOptions& opt = {})
{
    CheckReport r = detail::new_report("cauchy_schwarz", spec, opt, 1e-10);
    Rng rng(opt.seed);
    for (int s = 0; s < opt.samples; ++s) {
        const Vec xi = rng.normal_vector(spec.n);
        // every fourth pair is (nearly) an equality case
        const Vec eta = s % 4 == 3 ? Vec(eval_gradient(spec, xi).grad * rng.uniform(0.5, 2.0))
                                   : rng.normal_vector(spec.n);
        const double scale = eval_norm(spec, xi) * dual_norm(spec, eta).value;
        const double gap = scale - xi.dot(eta);
        Vec where(2 * spec.n);
        where << xi, eta;
        r.record(-gap / (1.0 + scale), where);
    }
    r.finalize();
    return r;
}

/// Level-set identity on random probes; violation = residual / (1 + |Qu|).
inline CheckReport levelset_sweep(const NormSpec& spec, const SweepOptions& opt = {})
{
    CheckReport r = detail::new_report("levelset_identity", spec, opt, 1e-6);
    detail::sweep_probes(spec, opt, [&](const TestFunction& f, const Vec& x) {
        const auto l = levelset_terms(spec, f, x);
        r.record(l.residual() / (1.0 + std::abs(l.Qu)), x);
    });
    r.finalize();
    return r;
}

/// The full pointwise suite for one spec. The level-set identity is skipped
/// for specs that are not strongly convex.
inline std::vector<CheckReport> identity_suite(const NormSpec& spec, const SweepOptions& opt = {})
{
    std::vector<CheckReport> out;
    out.push_back(bochner_sweep(spec, opt));
    out.push_back(homogeneity_sweep(spec, opt));
    out.push_back(kato_sweep(spec, opt));
    out.push_back(extended_cd_sweep(spec, opt));
    out.push_back(cauchy_schwarz_sweep(spec, opt));
    if (is_strongly_convex(spec) && spec.n == 2) out.push_back(levelset_sweep(spec, opt));
    return out;
}

// ---------------------------------------------------------------------------
// Checks on discrete eigenfunctions
// ---------------------------------------------------------------------------

namespace detail {

inline double triangle_mean(const TriMesh& mesh, const Vec& u, int t)
{
    const auto& tri = mesh.triangles[t];
    return (u[tri[0]] + u[tri[1]] + u[tri[2]]) / 3.0;
}

inline Vec triangle_centroid(const TriMesh& mesh, int t)
{
    const auto& tri = mesh.triangles[t];
    const Vec2 c = (mesh.nodes[tri[0]] + mesh.nodes[tri[1]] + mesh.nodes[tri[2]]) / 3.0;
    return Vec(c);
}

inline void require_nodal(const TriMesh& mesh, const EigenResult& eig)
{
    if (eig.nodal_values.size() != mesh.node_count())
        throw DomainError("eigenfunction does not live on the given mesh");
    if (!(eig.lambda > 0.0)) throw DomainError("eigenvalue must be > 0");
}

} // namespace detail

/// F(grad u|_T) - v'(v^{-1}(mean_T u)) over triangles, relative to max v'.
/// Needs a Neumann eigenfunction with min u = -1 and a profile whose range
/// covers [min u, max u].
inline CheckReport gradient_comparison_check(const TriMesh& mesh, const NormSpec& spec, const EigenResult& eig,
                                             const OneDSolution& sol, double threshold = 0.05)
{
    detail::require_nodal(mesh, eig);
    if (eig.bc != BoundaryCondition::neumann) throw DomainError("gradient comparison needs a Neumann eigenfunction");
    const Vec& u = eig.nodal_values;
    const double umin = u.minCoeff(), umax = u.maxCoeff();
    if (std::abs(umin + 1.0) > 1e-12) throw DomainError("gradient comparison needs min u = -1");
    const double lo = sol.v.front(), hi = sol.v.back();
    if (umin < lo - 1e-9 || umax > hi + 1e-9) {
        std::ostringstream msg;
        msg << "eigenfunction range [" << umin << ", " << umax << "] not covered by the model range [" << lo << ", "
            << hi << "]";
        throw DomainError(msg.str());
    }
    const double vmax = *std::max_element(sol.v_prime.begin(), sol.v_prime.end());
    if (!(vmax > 0.0)) throw DomainError("model profile has no positive slope");

    CheckReport r;
    r.name = "gradient_comparison";
    r.threshold = threshold;
    r.metadata["norm"] = describe(spec);
    r.metadata["model_kind"] = to_string(sol.model.kind);
    r.values["lambda"] = eig.lambda;
    r.values["model_a"] = sol.model.a;
    r.values["model_m"] = sol.m;
    r.values["u_max"] = umax;
    r.values["max_v_prime"] = vmax;
    P1Space space(mesh);
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const double ubar = std::clamp(detail::triangle_mean(mesh, u, t), lo, hi);
        const double F = std::sqrt(norm_squared_2d(spec, space.element_gradient(t, u)));
        r.record((F - v_prime_of_u(sol, ubar)) / vmax, detail::triangle_centroid(mesh, t));
    }
    r.finalize();
    return r;
}

/// F^2(grad u|_T) + lambda mean_T(u)^2 - lambda max|u|^2 after rescaling to
/// max|u| = 1; threshold is `rel_threshold` * lambda.
inline CheckReport neumann_gradient_bound_check(const TriMesh& mesh, const NormSpec& spec, const EigenResult& eig,
                                                double rel_threshold = 0.05)
{
    detail::require_nodal(mesh, eig);
    const double scale = eig.nodal_values.cwiseAbs().maxCoeff();
    CheckReport r;
    r.name = "neumann_gradient_bound";
    r.threshold = rel_threshold * eig.lambda;
    r.metadata["norm"] = describe(spec);
    r.values["lambda"] = eig.lambda;
    if (!(scale > 0.0)) {
        r.finalize();
        return r;
    }
    const Vec u = eig.nodal_values / scale;
    P1Space space(mesh);
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const double ubar = detail::triangle_mean(mesh, u, t);
        const double P = norm_squared_2d(spec, space.element_gradient(t, u)) + eig.lambda * ubar * ubar;
        r.record(P - eig.lambda, detail::triangle_centroid(mesh, t));
    }
    r.finalize();
    return r;
}

/// F^2(grad u|_T) / ((alpha+1)^2 - (alpha+mean_T u)^2) - lambda after rescaling
/// to sup u = 1 (small negative values clipped to 0).
inline CheckReport dirichlet_gradient_bound_check(const TriMesh& mesh, const NormSpec& spec, const EigenResult& eig,
                                                  double alpha, double rel_threshold = 0.05)
{
    detail::require_nodal(mesh, eig);
    if (!(alpha > 0.0)) throw DomainError("alpha must be > 0");
    CheckReport r;
    r.name = "dirichlet_gradient_bound";
    r.threshold = rel_threshold * eig.lambda;
    r.metadata["norm"] = describe(spec);
    r.values["lambda"] = eig.lambda;
    r.values["alpha"] = alpha;
    const double top = eig.nodal_values.maxCoeff();
    if (!(top > 0.0)) {
        r.finalize();
        return r;
    }
    const Vec u = eig.nodal_values / top;
    if (u.minCoeff() < -1e-8) throw DomainError("Dirichlet eigenfunction changes sign");
    P1Space space(mesh);
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const double ubar = std::clamp(detail::triangle_mean(mesh, u, t), 0.0, 1.0);
        const double den = (alpha + 1.0) * (alpha + 1.0) - (alpha + ubar) * (alpha + ubar);
        const double F2 = norm_squared_2d(spec, space.element_gradient(t, u));
        if (!(den > 0.0)) {
            // only a triangle with all three vertices at the maximum; its gradient is 0
            if (F2 > 0.0) throw NumericalError("gradient bound denominator vanished on a sloped triangle");
            r.record(-eig.lambda, detail::triangle_centroid(mesh, t));
            continue;
        }
        r.record(F2 / den - eig.lambda, detail::triangle_centroid(mesh, t));
    }
    r.finalize();
    return r;
}

enum class BoundKind { neumann_diameter, dirichlet_inradius };

inline const char* to_string(BoundKind k)
{
    return k == BoundKind::neumann_diameter ? "neumann_diameter" : "dirichlet_inradius";
}

/// ratio = lambda d_F^2 / pi^2  or  lambda 4 i_F^2 / pi^2; pass iff ratio >= 1 - 1e-9.
inline CheckReport poincare_bound_report(double lambda, double geom, BoundKind kind)
{
    if (!(lambda > 0.0) || !(geom > 0.0) || !std::isfinite(lambda) || !std::isfinite(geom))
        throw DomainError("poincare bound needs lambda > 0 and geometry > 0");
    const double ratio = kind == BoundKind::neumann_diameter ? lambda * geom * geom / (pi * pi)
                                                             : lambda * 4.0 * geom * geom / (pi * pi);
    CheckReport r;
    r.name = kind == BoundKind::neumann_diameter ? "theorem_neumann" : "theorem_dirichlet";
    r.threshold = 1e-9;
    r.metadata["kind"] = to_string(kind);
    r.values["lambda"] = lambda;
    r.values[kind == BoundKind::neumann_diameter ? "d_F" : "i_F"] = geom;
    r.values["ratio"] = ratio;
    r.record(1.0 - ratio, Vec());
    r.finalize();
    return r;
}

} // namespace finsler
