#include "finsler/eigensolver.hpp"

#include "catch_amalgamated.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace finsler;
using Catch::Approx;

namespace {

constexpr double pi2 = pi * pi;

// Exact discrete eigenvalues for quadratic norms (F^2 = xi^T A xi), from
// dense P1 matrices assembled here independently of the library.
double dense_first_eigenvalue(const TriMesh& mesh, const Mat& A, BoundaryCondition bc)
{
    const int N = mesh.node_count();
    Mat K = Mat::Zero(N, N), M = Mat::Zero(N, N);
    for (const auto& T : mesh.triangles) {
        Eigen::Matrix<double, 3, 3> P;
        for (int k = 0; k < 3; ++k) P.row(k) << 1.0, mesh.nodes[T[k]][0], mesh.nodes[T[k]][1];
        const double area = 0.5 * P.determinant();
        const Eigen::Matrix<double, 3, 3> C = P.inverse();  // columns: coefficients of the hat functions
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                const Eigen::Vector2d gi = C.block<2, 1>(1, i), gj = C.block<2, 1>(1, j);
                K(T[i], T[j]) += area * gi.dot(A * gj);
                M(T[i], T[j]) += area / 12.0 * (i == j ? 2.0 : 1.0);
            }
    }
    std::vector<int> dofs;
    for (int i = 0; i < N; ++i)
        if (bc == BoundaryCondition::neumann || !mesh.on_boundary[i]) dofs.push_back(i);
    const int n = static_cast<int>(dofs.size());
    Mat Kr(n, n), Mr(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            Kr(a, b) = K(dofs[a], dofs[b]);
            Mr(a, b) = M(dofs[a], dofs[b]);
        }
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(Kr, Mr);
    return es.eigenvalues()[bc == BoundaryCondition::neumann ? 1 : 0];
}

// Degree-5 seven point rule on the reference triangle (weights sum to 1).
double quadrature_mass(const TriMesh& mesh, const Vec& u, double* mean)
{
    const double a1 = 0.059715871789770, b1 = 0.470142064105115, w1 = 0.132394152788506;
    const double a2 = 0.797426985353087, b2 = 0.101286507323456, w2 = 0.125939180544827;
    const std::vector<std::array<double, 4>> rule{
        {1.0 / 3, 1.0 / 3, 1.0 / 3, 0.225}, {a1, b1, b1, w1}, {b1, a1, b1, w1}, {b1, b1, a1, w1},
        {a2, b2, b2, w2},                   {b2, a2, b2, w2}, {b2, b2, a2, w2}};
    double m = 0, s = 0;
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto& T = mesh.triangles[t];
        const double area = mesh.signed_area(t);
        for (const auto& q : rule) {
            const double v = q[0] * u[T[0]] + q[1] * u[T[1]] + q[2] * u[T[2]];
            m += area * q[3] * v * v;
            s += area * q[3] * v;
        }
    }
    *mean = s;
    return m;
}

EigenProblem problem(const ConvexPolygon& poly, int level, const NormSpec& spec, BoundaryCondition bc)
{
    EigenProblem p;
    p.mesh = triangulate(poly, level);
    p.spec = spec;
    p.bc = bc;
    return p;
}

Vec nodal(const TriMesh& mesh, double (*f)(double, double))
{
    Vec u(mesh.node_count());
    for (int i = 0; i < mesh.node_count(); ++i) u[i] = f(mesh.nodes[i][0], mesh.nodes[i][1]);
    return u;
}

} // namespace

TEST_CASE("energy closed forms", "[eigen]")
{
    const TriMesh m0 = triangulate(ConvexPolygon::unit_square(), 0);
    const auto e = NormSpec::euclidean();
    const auto c = energy_and_gradient(m0, e, Vec::Constant(m0.node_count(), 3.0));
    CHECK(c.energy == 0.0);
    CHECK(c.grad.cwiseAbs().maxCoeff() == 0.0);
    const Vec x = nodal(m0, [](double x, double) { return x; });
    CHECK(energy_and_gradient(m0, e, x).energy == Approx(1.0).epsilon(1e-14));
    // F(1, 0) = 2 for A = diag(4, 1)
    Mat A = Mat::Zero(2, 2);
    A(0, 0) = 4;
    A(1, 1) = 1;
    CHECK(energy_and_gradient(m0, NormSpec::quadratic(A), x).energy == Approx(4.0).epsilon(1e-14));
}

TEST_CASE("energy gradient matches finite differences", "[eigen]")
{
    Rng rng(31);
    const TriMesh mesh = triangulate(random_convex_polygon(rng, 8), 2);
    for (const auto& spec : {NormSpec::p_norm(4), NormSpec::p_norm(1.5), regularize(NormSpec::p_norm(3), 0.1)}) {
        Vec u(mesh.node_count());
        for (int i = 0; i < u.size(); ++i) u[i] = rng.normal();
        const auto eg = energy_and_gradient(mesh, spec, u);
        const double h = 1e-6;
        for (int i = 0; i < u.size(); i += 7) {
            Vec p = u, m = u;
            p[i] += h;
            m[i] -= h;
            const double fd =
                (energy_and_gradient(mesh, spec, p).energy - energy_and_gradient(mesh, spec, m).energy) / (2 * h);
            REQUIRE(std::abs(eg.grad[i] - fd) <= 1e-6 * (std::abs(fd) + eg.grad.cwiseAbs().maxCoeff() * 1e-3));
        }
    }
}

TEST_CASE("mass integrals", "[eigen]")
{
    const TriMesh mesh = triangulate(ConvexPolygon::unit_square(), 2);
    const auto one = mass_integrals(mesh, Vec::Ones(mesh.node_count()));
    CHECK(one.mass == Approx(1.0).epsilon(1e-14));
    CHECK(one.mean == Approx(1.0).epsilon(1e-14));
    const auto x = mass_integrals(mesh, nodal(mesh, [](double x, double) { return x; }));
    CHECK(x.mass == Approx(1.0 / 3).epsilon(1e-14));
    CHECK(x.mean == Approx(0.5).epsilon(1e-14));

    Rng rng(32);
    const TriMesh rm = triangulate(random_convex_polygon(rng, 11), 2);
    for (int k = 0; k < 5; ++k) {
        Vec u(rm.node_count());
        for (int i = 0; i < u.size(); ++i) u[i] = rng.normal();
        double qmean = 0;
        const double qmass = quadrature_mass(rm, u, &qmean);
        const auto mi = mass_integrals(rm, u);
        REQUIRE(mi.mass == Approx(qmass).epsilon(1e-12));
        REQUIRE(std::abs(mi.mean - qmean) <= 1e-12 * (1 + std::abs(qmean)));
    }
}

TEST_CASE("degenerate meshes and bad options are rejected", "[eigen]")
{
    TriMesh bad = triangulate(ConvexPolygon::unit_square(), 0);
    std::swap(bad.triangles[0][0], bad.triangles[0][1]);
    CHECK_THROWS_AS(P1Space(bad), ConfigError);

    auto p = problem(ConvexPolygon::unit_square(), 1, NormSpec::euclidean(), BoundaryCondition::neumann);
    p.solver.eps_schedule = {1e-2, 1e-1};
    CHECK_THROWS_AS(solve_first_eigen(p), ConfigError);
    p.solver.eps_schedule = {};
    p.solver.restarts = 0;
    CHECK_THROWS_AS(solve_first_eigen(p), ConfigError);
    p.solver.restarts = 1;
    p.spec = NormSpec::euclidean(3);
    CHECK_THROWS_AS(solve_first_eigen(p), ConfigError);
    auto d = problem(ConvexPolygon::unit_square(), 0, NormSpec::euclidean(), BoundaryCondition::dirichlet);
    CHECK_NOTHROW(solve_first_eigen(d));  // the fan center is interior
    d.mesh.on_boundary.assign(d.mesh.node_count(), 1);
    d.mesh.boundary_nodes = {0, 1, 2, 3, 4};
    CHECK_THROWS_AS(solve_first_eigen(d), ConfigError);
}

TEST_CASE("solver reaches the exact discrete eigenvalue", "[eigen]")
{
    Rng rng(33);
    Mat A(2, 2);
    A << 2.0, 0.5, 0.5, 1.0;
    const std::vector<ConvexPolygon> polys{ConvexPolygon::unit_square(), random_convex_polygon(rng, 9),
                                           ConvexPolygon::regular(6)};
    for (const auto& poly : polys) {
        for (const Mat& Q : {Mat(Mat::Identity(2, 2)), A}) {
            const NormSpec spec = Q.isIdentity() ? NormSpec::euclidean() : NormSpec::quadratic(Q);
            for (auto bc : {BoundaryCondition::neumann, BoundaryCondition::dirichlet}) {
                auto p = problem(poly, 3, spec, bc);
                const EigenResult r = solve_first_eigen(p);
                const double exact = dense_first_eigenvalue(p.mesh, Q, bc);
                INFO(describe(spec) << " " << to_string(bc));
                REQUIRE(r.converged);
                REQUIRE(r.lambda == Approx(exact).epsilon(1e-9));
                REQUIRE(r.lambda >= exact * (1 - 1e-12));
            }
        }
    }
}

TEST_CASE("unit square calibration", "[eigen][slow]")
{
    for (auto bc : {BoundaryCondition::neumann, BoundaryCondition::dirichlet}) {
        const double exact = bc == BoundaryCondition::neumann ? pi2 : 2 * pi2;
        const auto study = refine_and_solve(problem(ConvexPolygon::unit_square(), 3, NormSpec::euclidean(), bc), {3, 4, 5, 6});
        REQUIRE(study.levels.size() == 4);
        for (std::size_t k = 0; k < study.levels.size(); ++k) {
            const auto& r = study.levels[k].result;
            REQUIRE(r.converged);
            REQUIRE(r.lambda >= exact);
            if (k > 0) REQUIRE(r.lambda <= study.levels[k - 1].result.lambda + 1e-10);
        }
        CHECK(study.levels.back().result.lambda <= 1.01 * exact);
        REQUIRE(study.richardson.has_value());
        CHECK(std::abs(*study.richardson - exact) < std::abs(study.levels.back().result.lambda - exact));
    }
    const auto rect = solve_first_eigen(
        problem(ConvexPolygon::rectangle(1, 0.1), 6, NormSpec::euclidean(), BoundaryCondition::neumann));
    CHECK(rect.lambda >= pi2);
    CHECK(rect.lambda <= 1.02 * pi2);
}

TEST_CASE("eigenfunction normalization and structure", "[eigen]")
{
    Rng rng(34);
    const auto poly = random_convex_polygon(rng, 10);
    for (const auto& spec : {NormSpec::euclidean(), NormSpec::p_norm(4)}) {
        const auto n = solve_first_eigen(problem(poly, 4, spec, BoundaryCondition::neumann));
        const double scale = std::sqrt(poly.area() * n.mass);
        CHECK(n.nodal_values.minCoeff() == -1.0);
        CHECK(n.nodal_values.maxCoeff() <= 1.0);
        CHECK(n.nodal_values.maxCoeff() > 0.0);  // changes sign
        CHECK(std::abs(n.mean) <= 1e-12 * scale);
        CHECK(n.lambda == Approx(n.energy / n.mass).epsilon(1e-15));

        auto pd = problem(poly, 4, spec, BoundaryCondition::dirichlet);
        const auto d = solve_first_eigen(pd);
        CHECK(d.nodal_values.maxCoeff() == 1.0);
        CHECK(d.nodal_values.minCoeff() >= -1e-8);
        for (int i : pd.mesh.boundary_nodes) REQUIRE(d.nodal_values[i] == 0.0);
        CHECK(d.zero_gradient_area == 0.0);
    }
}

TEST_CASE("quotient trace is nonincreasing within each stage", "[eigen]")
{
    auto p = problem(ConvexPolygon::regular(5), 4, NormSpec::p_norm(3), BoundaryCondition::neumann);
    p.solver.eps_schedule = {1e-1, 1e-2};
    p.solver.restarts = 1;
    const auto r = solve_first_eigen(p);
    REQUIRE(r.trace.size() > 3);
    for (std::size_t k = 1; k < r.trace.size(); ++k)
        if (r.trace[k].stage == r.trace[k - 1].stage) REQUIRE(r.trace[k].quotient <= r.trace[k - 1].quotient);
    CHECK(r.trace.back().stage == 2);
}

TEST_CASE("dilation covariance", "[eigen]")
{
    Rng rng(35);
    const auto poly = random_convex_polygon(rng, 8);
    for (auto bc : {BoundaryCondition::neumann, BoundaryCondition::dirichlet}) {
        const auto a = solve_first_eigen(problem(poly, 4, NormSpec::p_norm(4), bc));
        const auto b = solve_first_eigen(problem(poly.scaled(2), 4, NormSpec::p_norm(4), bc));
        CHECK(b.lambda == Approx(a.lambda / 4).epsilon(1e-8));
    }
}

TEST_CASE("reflection symmetry on the unit square", "[eigen]")
{
    auto p = problem(ConvexPolygon::unit_square(), 5, NormSpec::euclidean(), BoundaryCondition::neumann);
    const auto a = solve_first_eigen(p);
    for (auto& x : p.mesh.nodes) x[0] = 1 - x[0];
    for (auto& T : p.mesh.triangles) std::swap(T[1], T[2]);
    const auto b = solve_first_eigen(p);
    CHECK(std::abs(a.lambda - b.lambda) <= 1e-10 * a.lambda);
}

TEST_CASE("results are deterministic", "[eigen]")
{
    auto p = problem(ConvexPolygon::regular(7), 4, NormSpec::p_norm(3), BoundaryCondition::neumann);
    const auto a = solve_first_eigen(p);
    const auto b = solve_first_eigen(p);
    CHECK(a.lambda == b.lambda);
    CHECK(a.nodal_values == b.nodal_values);
}
