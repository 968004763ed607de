// First Dirichlet and Neumann eigenvalues of the Finsler-Laplacian
// Qu = div(F(grad u) F_xi(grad u)) on a triangulated convex polygon.
//
// The Rayleigh quotient  R(u) = int F^2(grad u) / int u^2  is minimized over
// continuous piecewise-linear functions (zero on the boundary, or with zero
// mean). Element gradients are constant, so both integrals are exact, and the
// returned lambda is the quotient of an admissible function: an upper bound on
// the continuum eigenvalue up to roundoff.

#pragma once

#include "finsler/domain.hpp"
#include "finsler/norms.hpp"
#include "finsler/types.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace finsler {

enum class BoundaryCondition { dirichlet, neumann };

inline const char* to_string(BoundaryCondition bc)
{
    return bc == BoundaryCondition::dirichlet ? "dirichlet" : "neumann";
}

struct SolverOptions {
    long max_iters = 200000;
    double grad_tol = 1e-8;
    int restarts = 4;
    std::uint64_t seed = 7;
    std::vector<double> eps_schedule;  // decreasing; empty = solve with the spec directly
};

struct EigenProblem {
    TriMesh mesh;
    NormSpec spec;
    BoundaryCondition bc = BoundaryCondition::neumann;
    SolverOptions solver;
};

struct TracePoint {
    double quotient = 0.0;
    double grad_norm = 0.0;
    int stage = 0;
};

struct EigenResult {
    double lambda = 0.0;  // energy / mass of nodal_values, exactly as computed
    Vec nodal_values;     // normalized: min = -1 (neumann) or max = 1 (dirichlet)
    double energy = 0.0;
    double mass = 0.0;
    double mean = 0.0;  // int u
    std::vector<TracePoint> trace;
    bool converged = false;
    long iterations = 0;
    double final_grad_norm = 0.0;
    double zero_gradient_area = 0.0;  // measure of elements with grad u = 0
    BoundaryCondition bc = BoundaryCondition::neumann;
};

/// Per-element data of the P1 space: areas and shape-function gradients.
class P1Space {
public:
    explicit P1Space(const TriMesh& mesh) : mesh_(&mesh)
    {
        const int T = mesh.triangle_count();
        area_.resize(T);
        grads_.resize(T);
        for (int t = 0; t < T; ++t) {
            const auto& tri = mesh.triangles[t];
            const Vec2& p0 = mesh.nodes[tri[0]];
            const Vec2& p1 = mesh.nodes[tri[1]];
            const Vec2& p2 = mesh.nodes[tri[2]];
            const double twice = cross(p1 - p0, p2 - p0);
            if (!(twice > 0.0)) throw ConfigError("degenerate or inverted triangle in mesh");
            area_[t] = 0.5 * twice;
            // grad phi_i = rot(opposite edge) / (2|T|)
            auto g = [twice](const Vec2& a, const Vec2& b) -> Vec2 { return Vec2(a[1] - b[1], b[0] - a[0]) / twice; };
            grads_[t] = {g(p1, p2), g(p2, p0), g(p0, p1)};
        }
        weight_ = Vec::Zero(mesh.node_count());
        for (int t = 0; t < T; ++t)
            for (int k = 0; k < 3; ++k) weight_[mesh.triangles[t][k]] += area_[t] / 3.0;
        total_area_ = weight_.sum();
    }

    const TriMesh& mesh() const { return *mesh_; }
    double area(int t) const { return area_[t]; }
    double total_area() const { return total_area_; }
    /// int phi_i, so that int u = weight . u
    const Vec& weight() const { return weight_; }

    const Vec2& shape_gradient(int t, int k) const { return grads_[t][k]; }

    Vec2 element_gradient(int t, const Vec& u) const
    {
        const auto& tri = mesh_->triangles[t];
        const auto& g = grads_[t];
        return u[tri[0]] * g[0] + u[tri[1]] * g[1] + u[tri[2]] * g[2];
    }

    /// sum_T |T| F^2(grad u|_T)
    double energy(const NormSpec& spec, const Vec& u) const
    {
        double e = 0.0;
        for (int t = 0; t < static_cast<int>(area_.size()); ++t)
            e += area_[t] * norm_squared_2d(spec, element_gradient(t, u));
        return e;
    }

    /// Energy and its exact nodal gradient 2 |T| (F F_xi)(grad u) . grad phi_i.
    double energy_and_gradient(const NormSpec& spec, const Vec& u, Vec& grad) const
    {
        grad.setZero(u.size());
        double e = 0.0;
        double f2;
        Vec2 g;
        for (int t = 0; t < static_cast<int>(area_.size()); ++t) {
            half_square_2d(spec, element_gradient(t, u), f2, g);
            e += area_[t] * f2;
            const auto& tri = mesh_->triangles[t];
            const auto& sg = grads_[t];
            const double w = 2.0 * area_[t];
            for (int k = 0; k < 3; ++k) grad[tri[k]] += w * g.dot(sg[k]);
        }
        return e;
    }

    /// int u^2 with the exact element mass matrix |T|/12 (s^2 + sum u_i^2).
    double mass(const Vec& u) const
    {
        double m = 0.0;
        for (int t = 0; t < static_cast<int>(area_.size()); ++t) {
            const auto& tri = mesh_->triangles[t];
            const double a = u[tri[0]], b = u[tri[1]], c = u[tri[2]];
            const double s = a + b + c;
            m += area_[t] / 12.0 * (s * s + a * a + b * b + c * c);
        }
        return m;
    }

    /// d/du int u^2 = 2 M u.
    void mass_gradient(const Vec& u, Vec& out) const
    {
        out.setZero(u.size());
        for (int t = 0; t < static_cast<int>(area_.size()); ++t) {
            const auto& tri = mesh_->triangles[t];
            const double s = u[tri[0]] + u[tri[1]] + u[tri[2]];
            const double w = area_[t] / 6.0;
            for (int k = 0; k < 3; ++k) out[tri[k]] += w * (s + u[tri[k]]);
        }
    }

    double mean(const Vec& u) const { return weight_.dot(u); }

private:
    const TriMesh* mesh_;
    std::vector<double> area_;
    std::vector<std::array<Vec2, 3>> grads_;
    Vec weight_;
    double total_area_ = 0.0;
};

struct EnergyGradient {
    double energy = 0.0;
    Vec grad;
};

/// Exact energy int F^2(grad u) of a nodal vector and its derivative.
inline EnergyGradient energy_and_gradient(const TriMesh& mesh, const NormSpec& spec, const Vec& nodal)
{
    P1Space space(mesh);
    EnergyGradient out;
    out.energy = space.energy_and_gradient(spec, nodal, out.grad);
    return out;
}

struct MassIntegrals {
    double mass = 0.0;  // int u^2
    double mean = 0.0;  // int u
};

inline MassIntegrals mass_integrals(const TriMesh& mesh, const Vec& nodal)
{
    P1Space space(mesh);
    return {space.mass(nodal), space.mean(nodal)};
}

namespace detail {
// Projected-gradient descent on the Rayleigh quotient, one norm at a time.
//
// Directions are gradients in the H^1 inner product <u, v>_P = u^T (K + M) v,
// K the euclidean stiffness matrix: the step then sees a mesh-independent
// condition number and thin elements stop dictating the iteration count. The
// constraints are imposed P-orthogonally, so every direction is admissible.
class QuotientDescent {
public:
    QuotientDescent(const P1Space& space, BoundaryCondition bc) : space_(space), bc_(bc)
    {
        const TriMesh& mesh = space.mesh();
        const int N = mesh.node_count();
        std::vector<Eigen::Triplet<double>> entries;
        entries.reserve(static_cast<std::size_t>(mesh.triangle_count()) * 9 + N);
        for (int t = 0; t < mesh.triangle_count(); ++t) {
            const auto& tri = mesh.triangles[t];
            const double A = space.area(t);
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    if (bc_ == BoundaryCondition::dirichlet && (mesh.on_boundary[tri[i]] || mesh.on_boundary[tri[j]]))
                        continue;
                    const double k = A * space.shape_gradient(t, i).dot(space.shape_gradient(t, j));
                    const double m = A / 12.0 * (i == j ? 2.0 : 1.0);
                    entries.emplace_back(tri[i], tri[j], k + m);
                }
            }
        }
        if (bc_ == BoundaryCondition::dirichlet)
            for (int i : mesh.boundary_nodes) entries.emplace_back(i, i, 1.0);
        metric_.resize(N, N);
        metric_.setFromTriplets(entries.begin(), entries.end());
        factor_.compute(metric_);
        if (factor_.info() != Eigen::Success) throw NumericalError("metric factorization failed");
        if (bc_ == BoundaryCondition::neumann) {
            metric_weight_ = factor_.solve(space.weight());
            weight_dot_ = space.weight().dot(metric_weight_);
        }
    }

    /// Puts u on the admissible set: boundary zeros, or zero mean.
    void impose(Vec& u) const
    {
        if (bc_ == BoundaryCondition::dirichlet) {
            for (int i : space_.mesh().boundary_nodes) u[i] = 0.0;
        } else {
            u.array() -= space_.mean(u) / space_.total_area();
        }
    }

    /// P^{-1} g restricted to the tangent space of the constraints.
    Vec direction(Vec g) const
    {
        if (bc_ == BoundaryCondition::dirichlet)
            for (int i : space_.mesh().boundary_nodes) g[i] = 0.0;
        Vec p = factor_.solve(g);
        if (bc_ == BoundaryCondition::neumann) p -= (space_.weight().dot(p) / weight_dot_) * metric_weight_;
        return p;
    }

    struct Outcome {
        Vec u;
        double quotient;
        double grad_norm;
        bool converged;
        long iterations;
    };

    Outcome run(const NormSpec& spec, Vec u, const SolverOptions& opt, int stage, std::vector<TracePoint>& trace) const
    {
        impose(u);
        const double m0 = space_.mass(u);
        if (!(m0 > 0.0)) throw NumericalError("initial iterate has zero mass");
        u /= std::sqrt(m0);

        constexpr double eps = std::numeric_limits<double>::epsilon();
        Vec gE, gM, g, p, trial, trial_gE, prev_u, prev_g;
        double R = space_.energy_and_gradient(spec, u, gE);
        double gnorm = 0.0;
        double step = 1.0;
        bool converged = false;
        double floor_best = std::numeric_limits<double>::infinity();
        long floor_since = 0;
        long it = 0;
        for (;; ++it) {
            // grad R = gE - R gM at unit mass
            space_.mass_gradient(u, gM);
            g = gE - R * gM;
            p = direction(g);
            const double gp = std::max(0.0, g.dot(p));
            gnorm = std::sqrt(gp);
            trace.push_back({R, gnorm, stage});
            if (gnorm <= opt.grad_tol) {
                converged = true;
                break;
            }
            if (it >= opt.max_iters) break;

            if (it == 0) {
                step = 1.0 / std::max(R, 1.0);
            } else {
                const Vec s = u - prev_u;
                const double sy = s.dot(g - prev_g);
                if (sy > 0.0) step = s.dot(metric_ * s) / sy;
            }

            bool accepted = false;
            bool floor = false;
            double M_t = 1.0, E_t = 0.0;
            for (int bt = 0; bt < 60; ++bt) {
                trial = u - step * p;
                impose(trial);  // removes drift only; p is already admissible
                M_t = space_.mass(trial);
                E_t = space_.energy_and_gradient(spec, trial, trial_gE);
                const double R_t = E_t / M_t;
                const double predicted = 1e-4 * step * gp;
                floor = predicted < 64.0 * eps * R;
                // Below the roundoff floor of R a sufficient decrease cannot be
                // observed; a plain decrease is accepted there instead.
                if (R_t <= R - predicted || (floor && R_t < R)) {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) {
                // no representable decrease left: stationary at working precision
                converged = floor;
                break;
            }
            if (floor) {
                // tiny decreases at the floor can go on forever without
                // improving the gradient; stop once it has not improved for a while
                if (gnorm < floor_best) {
                    floor_best = gnorm;
                    floor_since = it;
                } else if (it - floor_since > 200) {
                    converged = true;
                    break;
                }
            }
            prev_u = u;
            prev_g = g;
            const double inv = 1.0 / std::sqrt(M_t);
            u = trial * inv;
            gE = trial_gE * inv;
            R = E_t / M_t;
        }
        return {std::move(u), R, gnorm, converged, it};
    }

private:
    const P1Space& space_;
    BoundaryCondition bc_;
    Eigen::SparseMatrix<double> metric_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor_;
    Vec metric_weight_;
    double weight_dot_ = 1.0;
};

inline void check_problem(const EigenProblem& problem)
{
    validate(problem.spec);
    if (problem.spec.n != 2) throw ConfigError("eigen solves are planar: the norm must act on R^2");
    if (!(problem.solver.grad_tol > 0.0)) throw ConfigError("grad_tol must be > 0");
    if (problem.solver.restarts < 1) throw ConfigError("restarts must be >= 1");
    if (problem.solver.max_iters < 0) throw ConfigError("max_iters must be >= 0");
    for (std::size_t i = 0; i < problem.solver.eps_schedule.size(); ++i) {
        if (!(problem.solver.eps_schedule[i] > 0.0)) throw ConfigError("eps_schedule entries must be > 0");
        if (i > 0 && !(problem.solver.eps_schedule[i] < problem.solver.eps_schedule[i - 1]))
            throw ConfigError("eps_schedule must be strictly decreasing");
    }
    const auto& mesh = problem.mesh;
    const int interior = mesh.node_count() - static_cast<int>(mesh.boundary_nodes.size());
    if (problem.bc == BoundaryCondition::dirichlet && interior < 1)
        throw ConfigError("Dirichlet problem needs at least one interior node");
    if (problem.bc == BoundaryCondition::neumann && mesh.node_count() < 3)
        throw ConfigError("Neumann problem needs at least 2 degrees of freedom after the mean constraint");
}

inline Vec random_start(const P1Space& space, BoundaryCondition bc, Rng& rng)
{
    const auto& nodes = space.mesh().nodes;
    Vec u(static_cast<int>(nodes.size()));
    if (bc == BoundaryCondition::dirichlet) {
        for (int i = 0; i < u.size(); ++i) u[i] = 0.5 + rng.uniform();
    } else {
        const double a = rng.normal(), b = rng.normal();
        for (int i = 0; i < u.size(); ++i) u[i] = a * nodes[i][0] + b * nodes[i][1] + 0.25 * rng.uniform(-1.0, 1.0);
    }
    return u;
}

} // namespace detail

/// Rescales u per the downstream convention (neumann: min u = -1 with
/// max u <= 1; dirichlet: max u = 1) and fills energy, mass, mean, lambda.
inline void finalize_result(const P1Space& space, const NormSpec& spec, EigenResult& r)
{
    Vec& u = r.nodal_values;
    const double lo = u.minCoeff(), hi = u.maxCoeff();
    if (r.bc == BoundaryCondition::neumann) {
        if (hi > -lo) u = -u;
        const double mn = u.minCoeff();
        if (mn < 0.0) u /= -mn;
    } else {
        if (-lo > hi) u = -u;
        const double mx = u.maxCoeff();
        if (mx > 0.0) u /= mx;
    }
    r.energy = space.energy(spec, u);
    r.mass = space.mass(u);
    r.mean = space.mean(u);
    r.lambda = r.energy / r.mass;

    double gmax = 0.0;
    std::vector<double> gn(space.mesh().triangle_count());
    for (int t = 0; t < space.mesh().triangle_count(); ++t) gmax = std::max(gmax, gn[t] = space.element_gradient(t, u).norm());
    r.zero_gradient_area = 0.0;
    for (int t = 0; t < space.mesh().triangle_count(); ++t)
        if (gn[t] <= 1e-12 * gmax) r.zero_gradient_area += space.area(t);
}

/// Minimizes the Rayleigh quotient from a given admissible start.
inline EigenResult solve_from(const EigenProblem& problem, const P1Space& space, Vec start)
{
    detail::QuotientDescent descent(space, problem.bc);
    std::vector<NormSpec> stages;
    for (double eps : problem.solver.eps_schedule) stages.push_back(regularize(problem.spec, eps));
    stages.push_back(problem.spec);

    EigenResult r;
    r.bc = problem.bc;
    Vec u = std::move(start);
    for (std::size_t s = 0; s < stages.size(); ++s) {
        auto out = descent.run(stages[s], std::move(u), problem.solver, static_cast<int>(s), r.trace);
        u = std::move(out.u);
        r.iterations += out.iterations;
        r.converged = out.converged;
        r.final_grad_norm = out.grad_norm;
    }
    r.nodal_values = std::move(u);
    finalize_result(space, problem.spec, r);
    return r;
}

/// Best of `restarts` seeded random starts.
inline EigenResult solve_first_eigen(const EigenProblem& problem)
{
    detail::check_problem(problem);
    P1Space space(problem.mesh);
    std::optional<EigenResult> best;
    for (int k = 0; k < problem.solver.restarts; ++k) {
        Rng rng(problem.solver.seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(k));
        EigenResult r = solve_from(problem, space, detail::random_start(space, problem.bc, rng));
        if (!best || r.lambda < best->lambda) best = std::move(r);
    }
    return std::move(*best);
}

struct LevelResult {
    int level = 0;
    int nodes = 0;
    int triangles = 0;
    EigenResult result;
};

struct RefinementStudy {
    std::vector<LevelResult> levels;
    // lambda_k + (lambda_k - lambda_{k-1}) / 3 from the last two levels,
    // assuming O(h^2) convergence. Informational only.
    std::optional<double> richardson;
};

/// Solves on problem.mesh refined to each of `levels` (absolute refinement
/// levels, increasing), warm-starting each level from the previous one by
/// exact prolongation; restarts are spent on the first level only.
inline RefinementStudy refine_and_solve(const EigenProblem& problem, const std::vector<int>& levels)
{
    if (levels.empty()) throw ConfigError("refinement study needs at least one level");
    for (std::size_t i = 1; i < levels.size(); ++i)
        if (levels[i] <= levels[i - 1]) throw ConfigError("refinement levels must be strictly increasing");
    if (levels.front() < problem.mesh.refinement_level)
        throw ConfigError("refinement level below the base mesh level");
    if (levels.back() > 10) throw ConfigError("refinement levels must lie in [0, 10]");

    RefinementStudy study;
    TriMesh mesh = problem.mesh;
    std::optional<Vec> warm;
    for (int level : levels) {
        while (mesh.refinement_level < level) {
            mesh = refine(mesh);
            if (warm) warm = prolongate(mesh, *warm);
        }
        EigenProblem stage = problem;
        stage.mesh = mesh;
        LevelResult lr;
        lr.level = level;
        lr.nodes = mesh.node_count();
        lr.triangles = mesh.triangle_count();
        if (!warm) {
            lr.result = solve_first_eigen(stage);
        } else {
            detail::check_problem(stage);
            P1Space space(stage.mesh);
            lr.result = solve_from(stage, space, *warm);
        }
        warm = lr.result.nodal_values;
        study.levels.push_back(std::move(lr));
    }
    if (study.levels.size() >= 2) {
        const double a = study.levels[study.levels.size() - 2].result.lambda;
        const double b = study.levels.back().result.lambda;
        study.richardson = b + (b - a) / 3.0;
    }
    return study;
}

} // namespace finsler
