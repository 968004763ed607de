// Convex polygonal domains: validation, anisotropic diameter d_F, inscribed
// Wulff radius i_F, uniform triangulations, and F-mean curvature of smooth
// planar curves.

#pragma once

#include "finsler/check_report.hpp"
#include "finsler/dual_geometry.hpp"
#include "finsler/norms.hpp"
#include "finsler/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <utility>
#include <vector>

namespace finsler {

inline double cross(const Vec2& a, const Vec2& b) { return a[0] * b[1] - a[1] * b[0]; }

/// A half-plane {x : <normal, x> <= offset} with unit outward normal.
struct Facet {
    Vec2 normal;
    double offset = 0.0;
};

class ConvexPolygon {
public:
    ConvexPolygon() = default;

    /// Vertices in counter-clockwise order; throws ConfigError naming the
    /// offending vertex triple when the sequence is not strictly convex.
    explicit ConvexPolygon(std::vector<Vec2> vertices) : vertices_(std::move(vertices))
    {
        const int V = static_cast<int>(vertices_.size());
        if (V < 3) throw ConfigError("polygon needs at least 3 vertices");
        for (const Vec2& v : vertices_)
            if (!v.allFinite()) throw ConfigError("polygon vertex is not finite");
        scale_ = 0.0;
        for (int i = 0; i < V; ++i)
            for (int j = i + 1; j < V; ++j) scale_ = std::max(scale_, (vertices_[i] - vertices_[j]).norm());
        if (!(scale_ > 0.0)) throw ConfigError("polygon is degenerate");
        for (int i = 0; i < V; ++i)
            for (int j = i + 1; j < V; ++j)
                if ((vertices_[i] - vertices_[j]).norm() <= 1e-12 * scale_) {
                    std::ostringstream os;
                    os << "polygon has duplicate vertices " << i << " and " << j;
                    throw ConfigError(os.str());
                }
        for (int i = 0; i < V; ++i) {
            const int prev = (i + V - 1) % V, next = (i + 1) % V;
            const double c = cross(vertices_[i] - vertices_[prev], vertices_[next] - vertices_[i]);
            if (!(c > 1e-12 * scale_ * scale_)) {
                std::ostringstream os;
                os << "polygon is not strictly convex and counter-clockwise at vertex triple (" << prev
                   << ", " << i << ", " << next << ")";
                throw ConfigError(os.str());
            }
        }
        // Locally convex turns can still wind around twice.
        double turning = 0.0;
        for (int i = 0; i < V; ++i) {
            const Vec2 e0 = vertices_[(i + 1) % V] - vertices_[i];
            const Vec2 e1 = vertices_[(i + 2) % V] - vertices_[(i + 1) % V];
            turning += std::atan2(cross(e0, e1), e0.dot(e1));
        }
        if (std::abs(turning - 2.0 * pi) > 1e-6) throw ConfigError("polygon boundary winds more than once");

        for (int i = 0; i < V; ++i) {
            const Vec2 e = vertices_[(i + 1) % V] - vertices_[i];
            Facet f;
            f.normal = Vec2(e[1], -e[0]).normalized();
            f.offset = f.normal.dot(vertices_[i]);
            facets_.push_back(f);
        }
    }

    const std::vector<Vec2>& vertices() const { return vertices_; }
    const std::vector<Facet>& facets() const { return facets_; }
    int size() const { return static_cast<int>(vertices_.size()); }
    /// Euclidean diameter, the length scale for tolerances.
    double scale() const { return scale_; }

    double area() const
    {
        double a = 0.0;
        for (int i = 0; i < size(); ++i) a += cross(vertices_[i], vertices_[(i + 1) % size()]);
        return 0.5 * a;
    }

    Vec2 centroid() const
    {
        Vec2 c = Vec2::Zero();
        double a = 0.0;
        for (int i = 0; i < size(); ++i) {
            const Vec2& p = vertices_[i];
            const Vec2& q = vertices_[(i + 1) % size()];
            const double w = cross(p, q);
            a += w;
            c += w * (p + q);
        }
        return c / (3.0 * a);
    }

    bool contains(const Vec2& x, double tol = 0.0) const
    {
        for (const Facet& f : facets_)
            if (f.normal.dot(x) > f.offset + tol) return false;
        return true;
    }

    ConvexPolygon scaled(double t) const
    {
        std::vector<Vec2> v;
        for (const Vec2& p : vertices_) v.push_back(t * p);
        return ConvexPolygon(std::move(v));
    }

    static ConvexPolygon rectangle(double w, double h)
    {
        return ConvexPolygon({Vec2(0, 0), Vec2(w, 0), Vec2(w, h), Vec2(0, h)});
    }
    static ConvexPolygon unit_square() { return rectangle(1.0, 1.0); }
    /// Regular polygon inscribed in the circle of radius `radius` at the origin.
    static ConvexPolygon regular(int sides, double radius = 1.0)
    {
        std::vector<Vec2> v;
        for (int k = 0; k < sides; ++k) {
            const double t = 2.0 * pi * k / sides;
            v.emplace_back(radius * std::cos(t), radius * std::sin(t));
        }
        return ConvexPolygon(std::move(v));
    }

private:
    std::vector<Vec2> vertices_;
    std::vector<Facet> facets_;
    double scale_ = 0.0;
};

/// Convex hull (counter-clockwise) of `points` uniform random points in the
/// unit square, with nearly collinear hull vertices dropped.
inline ConvexPolygon random_convex_polygon(Rng& rng, int points)
{
    for (int attempt = 0; attempt < 100; ++attempt) {
        std::vector<Vec2> pts;
        for (int i = 0; i < points; ++i) {
            const double x = rng.uniform();
            const double y = rng.uniform();
            pts.emplace_back(x, y);
        }
        std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
            return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]);
        });
        // Andrew's monotone chain with a collinearity margin.
        const double tol = 1e-6;
        std::vector<Vec2> hull;
        auto build = [&](auto first, auto last) {
            const std::size_t floor = hull.size();
            for (auto it = first; it != last; ++it) {
                while (hull.size() >= floor + 2 &&
                       cross(hull[hull.size() - 1] - hull[hull.size() - 2], *it - hull[hull.size() - 1]) <= tol)
                    hull.pop_back();
                hull.push_back(*it);
            }
            hull.pop_back();
        };
        build(pts.begin(), pts.end());
        build(pts.rbegin(), pts.rend());
        if (hull.size() < 3) continue;
        try {
            return ConvexPolygon(hull);
        } catch (const ConfigError&) {
            continue;
        }
    }
    throw NumericalError("could not generate a random convex polygon");
}

// ---------------------------------------------------------------------------
// Anisotropic geometry of the polygon
// ---------------------------------------------------------------------------

/// d_F = max over vertex pairs of F0(v_j - v_i). F0 is convex, so the sup
/// over the closed polygon is attained at extreme points.
inline double diameter(const ConvexPolygon& poly, const NormSpec& spec)
{
    if (spec.n != 2) throw ConfigError("polygon geometry needs a norm on R^2");
    double d = 0.0;
    const auto& v = poly.vertices();
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = i + 1; j < v.size(); ++j)
            d = std::max(d, dual_norm(spec, Vec(v[j] - v[i])).value);
    return d;
}

struct InscribedBall {
    double radius = 0.0;
    Vec2 center = Vec2::Zero();
    double duality_gap = 0.0;
    bool unique_center = true;
};

/// Largest Wulff ball {F0(y - x) <= r} inside the polygon.
///
/// The ball lies in {<n, y> <= b} iff <n, x> + r F(n) <= b, since the sup of
/// <n, .> over the unit Wulff ball is F(n). Maximizing r under those facet
/// constraints is a 3-variable LP, solved by vertex enumeration with a dual
/// certificate: at the reported vertex, multipliers y >= 0 on its active
/// constraints satisfy sum y_k (n_k, F(n_k)) = (0, 0, 1) and sum y_k b_k = r.
inline InscribedBall inscribed_wulff_radius(const ConvexPolygon& poly, const NormSpec& spec)
{
    if (spec.n != 2) throw ConfigError("polygon geometry needs a norm on R^2");
    const auto& facets = poly.facets();
    const int m = static_cast<int>(facets.size());
    std::vector<Eigen::Vector3d> rows(m);
    std::vector<double> rhs(m);
    for (int k = 0; k < m; ++k) {
        rows[k] = Eigen::Vector3d(facets[k].normal[0], facets[k].normal[1], eval_norm(spec, Vec(facets[k].normal)));
        rhs[k] = facets[k].offset;
    }
    const double s = poly.scale();
    const double feas_tol = 1e-12 * s;

    struct Candidate {
        Eigen::Vector3d z;
        double gap;
        bool dual_ok;
    };
    std::vector<Candidate> optimal;
    double best_r = -1.0;
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
            for (int k = j + 1; k < m; ++k) {
                Eigen::Matrix3d B;
                B.row(0) = rows[i];
                B.row(1) = rows[j];
                B.row(2) = rows[k];
                if (std::abs(B.determinant()) < 1e-13) continue;
                Eigen::PartialPivLU<Eigen::Matrix3d> lu(B);
                const Eigen::Vector3d z = lu.solve(Eigen::Vector3d(rhs[i], rhs[j], rhs[k]));
                if (z[2] < best_r - feas_tol) continue;
                bool feasible = z[2] >= 0.0;
                for (int q = 0; q < m && feasible; ++q)
                    if (rows[q].dot(z) > rhs[q] + feas_tol) feasible = false;
                if (!feasible) continue;
                const Eigen::Vector3d y = B.transpose().partialPivLu().solve(Eigen::Vector3d(0, 0, 1));
                const bool dual_ok = y.minCoeff() >= -1e-12;
                const double gap = std::abs(y[0] * rhs[i] + y[1] * rhs[j] + y[2] * rhs[k] - z[2]);
                if (z[2] > best_r + feas_tol) {
                    optimal.clear();
                    best_r = z[2];
                }
                optimal.push_back({z, gap, dual_ok});
                best_r = std::max(best_r, z[2]);
            }
    if (optimal.empty()) throw NumericalError("inscribed radius LP found no feasible vertex");

    InscribedBall out;
    const Candidate* chosen = nullptr;
    for (const Candidate& c : optimal)
        if (c.dual_ok && (!chosen || c.gap < chosen->gap)) chosen = &c;
    if (!chosen) throw NumericalError("inscribed radius LP: no dual-feasible optimal vertex");
    out.radius = chosen->z[2];
    out.center = Vec2(chosen->z[0], chosen->z[1]);
    out.duality_gap = chosen->gap;
    for (const Candidate& c : optimal)
        if ((Vec2(c.z[0], c.z[1]) - out.center).norm() > 1e-9 * s) out.unique_center = false;
    return out;
}

// ---------------------------------------------------------------------------
// Triangulation
// ---------------------------------------------------------------------------

struct TriMesh {
    std::vector<Vec2> nodes;
    std::vector<std::array<int, 3>> triangles;  // counter-clockwise
    std::vector<int> boundary_nodes;            // sorted
    std::vector<char> on_boundary;              // per node
    int refinement_level = 0;
    // For nodes created by the last refinement: the edge they bisect.
    // parents[i - first_new_node] for i >= first_new_node.
    std::vector<std::array<int, 2>> parents;
    int first_new_node = 0;

    int node_count() const { return static_cast<int>(nodes.size()); }
    int triangle_count() const { return static_cast<int>(triangles.size()); }

    double signed_area(int t) const
    {
        const auto& T = triangles[t];
        return 0.5 * cross(nodes[T[1]] - nodes[T[0]], nodes[T[2]] - nodes[T[0]]);
    }

    double area() const
    {
        double a = 0.0;
        for (int t = 0; t < triangle_count(); ++t) a += signed_area(t);
        return a;
    }
};

namespace detail {

inline void mark_boundary(TriMesh& mesh)
{
    std::map<std::pair<int, int>, int> edge_use;
    for (const auto& T : mesh.triangles)
        for (int e = 0; e < 3; ++e) {
            const int a = T[e], b = T[(e + 1) % 3];
            ++edge_use[{std::min(a, b), std::max(a, b)}];
        }
    mesh.on_boundary.assign(mesh.nodes.size(), 0);
    for (const auto& [edge, count] : edge_use)
        if (count == 1) mesh.on_boundary[edge.first] = mesh.on_boundary[edge.second] = 1;
    mesh.boundary_nodes.clear();
    for (int i = 0; i < mesh.node_count(); ++i)
        if (mesh.on_boundary[i]) mesh.boundary_nodes.push_back(i);
}

} // namespace detail

/// Splits every triangle into four through its edge midpoints. Existing nodes
/// keep their indices; midpoints are appended and their parents recorded.
inline TriMesh refine(const TriMesh& coarse)
{
    TriMesh fine;
    fine.nodes = coarse.nodes;
    fine.first_new_node = coarse.node_count();
    fine.refinement_level = coarse.refinement_level + 1;
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
        const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
        auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        const int id = static_cast<int>(fine.nodes.size());
        fine.nodes.push_back(0.5 * (coarse.nodes[a] + coarse.nodes[b]));
        fine.parents.push_back({key.first, key.second});
        midpoint.emplace(key, id);
        return id;
    };
    fine.triangles.reserve(coarse.triangles.size() * 4);
    for (const auto& T : coarse.triangles) {
        const int m01 = mid(T[0], T[1]), m12 = mid(T[1], T[2]), m20 = mid(T[2], T[0]);
        fine.triangles.push_back({T[0], m01, m20});
        fine.triangles.push_back({m01, T[1], m12});
        fine.triangles.push_back({m20, m12, T[2]});
        fine.triangles.push_back({m01, m12, m20});
    }
    detail::mark_boundary(fine);
    return fine;
}

/// Fan from the area centroid, then `levels` rounds of quadrisection.
inline TriMesh triangulate(const ConvexPolygon& poly, int levels)
{
    if (levels < 0 || levels > 10) throw ConfigError("triangulation levels must lie in [0, 10]");
    TriMesh mesh;
    mesh.nodes = poly.vertices();
    const int V = poly.size();
    mesh.nodes.push_back(poly.centroid());
    for (int i = 0; i < V; ++i) mesh.triangles.push_back({i, (i + 1) % V, V});
    detail::mark_boundary(mesh);
    for (int l = 0; l < levels; ++l) mesh = refine(mesh);
    return mesh;
}

/// Nodal prolongation from `coarse` to refine(coarse): the same piecewise
/// linear function on the finer mesh.
inline Vec prolongate(const TriMesh& fine, const Vec& coarse_values)
{
    Vec out(fine.node_count());
    out.head(fine.first_new_node) = coarse_values.head(fine.first_new_node);
    for (std::size_t k = 0; k < fine.parents.size(); ++k) {
        const auto& par = fine.parents[k];
        out[fine.first_new_node + static_cast<int>(k)] = 0.5 * (coarse_values[par[0]] + coarse_values[par[1]]);
    }
    return out;
}

/// Plain-text mesh dump:
///   # finsler mesh v1
///   nodes <N>
///   <x> <y> <on_boundary 0|1>        (N rows, 0-based ids in row order)
///   triangles <T>
///   <i> <j> <k>                      (T rows, counter-clockwise)
inline void write_mesh(std::ostream& os, const TriMesh& mesh)
{
    os << "# finsler mesh v1\n";
    os << "nodes " << mesh.node_count() << "\n";
    os << std::setprecision(17);
    for (int i = 0; i < mesh.node_count(); ++i)
        os << mesh.nodes[i][0] << " " << mesh.nodes[i][1] << " " << int(mesh.on_boundary[i]) << "\n";
    os << "triangles " << mesh.triangle_count() << "\n";
    for (const auto& T : mesh.triangles) os << T[0] << " " << T[1] << " " << T[2] << "\n";
}

// ---------------------------------------------------------------------------
// Smooth curves and F-mean curvature
// ---------------------------------------------------------------------------

/// Position and first two parameter derivatives of a planar curve.
struct CurvePoint {
    Vec2 pos;
    Vec2 d1;
    Vec2 d2;
};

/// A counter-clockwise planar curve given by an exact parameterization,
/// together with a sample grid over its parameter range.
class SmoothBoundaryCurve {
public:
    using Param = std::function<CurvePoint(double)>;

    SmoothBoundaryCurve(Param param, double s_begin, double s_end, int samples, bool closed)
        : param_(std::move(param)), closed_(closed)
    {
        if (samples < 1) throw ConfigError("curve needs at least one sample");
        const int denom = closed ? samples : std::max(samples - 1, 1);
        for (int i = 0; i < samples; ++i) s_.push_back(s_begin + (s_end - s_begin) * i / denom);
        for (double s : s_)
            if (param_(s).d1.norm() == 0.0) throw ConfigError("curve has a vanishing tangent");
        if (closed && samples >= 2) {
            for (std::size_t i = 0; i < s_.size(); ++i) {
                const Vec2 t0 = param_(s_[i]).d1;
                const Vec2 t1 = param_(s_[(i + 1) % s_.size()]).d1;
                if (std::abs(std::atan2(cross(t0, t1), t0.dot(t1))) >= 0.1)
                    throw ConfigError("curve samples too sparse: tangent turns >= 0.1 rad between samples");
            }
        }
    }

    CurvePoint at(double s) const { return param_(s); }
    const std::vector<double>& samples() const { return s_; }
    bool closed() const { return closed_; }

    /// Circle of radius R about `center`.
    static SmoothBoundaryCurve circle(double R, Vec2 center = Vec2::Zero(), int samples = 256)
    {
        return SmoothBoundaryCurve(
            [R, center](double s) {
                return CurvePoint{center + R * Vec2(std::cos(s), std::sin(s)), R * Vec2(-std::sin(s), std::cos(s)),
                                  -R * Vec2(std::cos(s), std::sin(s))};
            },
            0.0, 2.0 * pi, samples, true);
    }

    /// (a cos s, b sin s)
    static SmoothBoundaryCurve ellipse(double a, double b, int samples = 256)
    {
        Mat2 S;
        S << a, 0, 0, b;
        return linear_circle(S, 1.0, samples);
    }

    /// r S (cos s, sin s) for det S > 0; with S = A^{1/2} this is the
    /// Wulff circle of radius r of the quadratic norm sqrt(xi^T A xi).
    static SmoothBoundaryCurve linear_circle(const Mat2& S, double r, int samples = 256)
    {
        if (!(S.determinant() > 0.0)) throw ConfigError("linear_circle needs an orientation-preserving map");
        return SmoothBoundaryCurve(
            [S, r](double s) {
                const Vec2 c(std::cos(s), std::sin(s)), dc(-std::sin(s), std::cos(s));
                return CurvePoint{r * S * c, r * S * dc, -r * S * c};
            },
            0.0, 2.0 * pi, samples, true);
    }

    /// Second-order jet through a point: the parabola pos + s d1 + s^2 d2 / 2.
    static SmoothBoundaryCurve jet(const Vec2& pos, const Vec2& d1, const Vec2& d2)
    {
        return SmoothBoundaryCurve(
            [pos, d1, d2](double s) { return CurvePoint{pos + s * d1 + 0.5 * s * s * d2, d1 + s * d2, d2}; }, 0.0,
            0.0, 1, false);
    }

private:
    Param param_;
    bool closed_ = true;
    std::vector<double> s_;
};

/// Outward unit normal (tangent rotated clockwise) and its parameter
/// derivative at a curve point.
inline std::pair<Vec2, Vec2> outward_normal_and_derivative(const CurvePoint& c)
{
    const double len = c.d1.norm();
    const Vec2 e = c.d1 / len;
    const Vec2 de = (c.d2 - c.d2.dot(e) * e) / len;
    return {Vec2(e[1], -e[0]), Vec2(de[1], -de[0])};
}

/// H_F = g^{11} <F_xixi(nu) d nu, e_1> in the coordinate frame e_1 = gamma'.
/// Reduces to the signed curvature for the Euclidean norm.
inline double f_mean_curvature(const SmoothBoundaryCurve& curve, const NormSpec& spec, double s)
{
    if (spec.n != 2) throw ConfigError("F-mean curvature of planar curves needs a norm on R^2");
    if (!is_strongly_convex(spec))
        throw ConfigError("F-mean curvature needs a strongly convex norm; wrap the spec in regularize()");
    const CurvePoint c = curve.at(s);
    const auto [nu, dnu] = outward_normal_and_derivative(c);
    const NormTensors t = eval_tensors(spec, Vec(nu), false);
    const Mat Fxx = f_hessian(t);
    const double h = (Fxx * Vec(dnu)).dot(Vec(c.d1));
    return h / c.d1.squaredNorm();
}

/// min H_F over the curve's sample grid; passes when H_F >= -1e-8 everywhere.
inline CheckReport f_mean_convexity_check(const SmoothBoundaryCurve& curve, const NormSpec& spec)
{
    CheckReport r;
    r.name = "f_mean_convexity";
    r.threshold = 1e-8;
    r.metadata["norm"] = describe(spec);
    double min_h = std::numeric_limits<double>::infinity();
    for (double s : curve.samples()) {
        const double h = f_mean_curvature(curve, spec, s);
        min_h = std::min(min_h, h);
        r.record(-h, Vec(curve.at(s).pos));
    }
    r.values["min_H_F"] = min_h;
    r.finalize();
    return r;
}

} // namespace finsler
