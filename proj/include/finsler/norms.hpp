// Anisotropic norms F on R^n and the derived tensors of G = F^2 / 2.
//
// A norm is described by a NormSpec from a closed family (euclidean, p-norm,
// quadratic form, or the strongly convex regularization sqrt(F^2 + eps|x|^2)
// of another spec). Every derivative is written out by hand per family, so
// identity checks downstream see exact tensors, never finite differences.
//
// Notation used in the code:
//   value = F(xi)
//   grad  = F_xi(xi)                   (0-homogeneous)
//   a     = D^2 G(xi) = F_i F_j + F F_ij
//   a3    = D^3 G(xi)                  (-1-homogeneous)
//
// Adding a family means adding a case to eval_norm, eval_tensors,
// half_square_2d and euclidean_bounds; nothing else switches on the family.

#pragma once

#include "finsler/types.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace finsler {

enum class NormFamily { euclidean, p_norm, quadratic, regularized };

inline const char* to_string(NormFamily f)
{
    switch (f) {
    case NormFamily::euclidean: return "euclidean";
    case NormFamily::p_norm: return "pnorm";
    case NormFamily::quadratic: return "quadratic";
    case NormFamily::regularized: return "regularized";
    }
    return "?";
}

struct NormSpec {
    NormFamily family = NormFamily::euclidean;
    int n = 2;
    double p = 2.0;                        // p_norm
    Mat A;                                 // quadratic
    std::shared_ptr<const NormSpec> base;  // regularized
    double eps = 0.0;                      // regularized

    static NormSpec euclidean(int n = 2);
    static NormSpec p_norm(double p, int n = 2);
    static NormSpec quadratic(const Mat& A);
};

/// Dense symmetric 3-tensor with (i, j, k) indexing.
class Tensor3 {
public:
    Tensor3() = default;
    explicit Tensor3(int n) : n_(n), data_(static_cast<std::size_t>(n * n * n), 0.0) {}

    int dim() const { return n_; }
    double& operator()(int i, int j, int k) { return data_[index(i, j, k)]; }
    double operator()(int i, int j, int k) const { return data_[index(i, j, k)]; }

    /// T_ijk v_k
    Mat contract_last(const Vec& v) const
    {
        Mat out = Mat::Zero(n_, n_);
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j)
                for (int k = 0; k < n_; ++k) out(i, j) += (*this)(i, j, k) * v[k];
        return out;
    }

    double max_abs() const
    {
        double m = 0.0;
        for (double x : data_) m = std::max(m, std::abs(x));
        return m;
    }

private:
    std::size_t index(int i, int j, int k) const
    {
        return static_cast<std::size_t>((i * n_ + j) * n_ + k);
    }

    int n_ = 0;
    std::vector<double> data_;
};

struct GaugeGrad {
    double value = 0.0;
    Vec grad;
};

struct NormTensors {
    double value = 0.0;
    Vec grad;
    Mat a;
    Tensor3 a3;  // empty unless requested
    bool has_a3 = false;
};

namespace detail {

inline double sgn(double x) { return (x > 0.0) - (x < 0.0); }

inline bool is_symmetric(const Mat& A)
{
    const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
    return (A - A.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

inline void require_dim(const NormSpec& spec, Eigen::Index size)
{
    if (size != spec.n) {
        std::ostringstream os;
        os << "vector of dimension " << size << " passed to a norm on R^" << spec.n;
        throw DomainError(os.str());
    }
}

} // namespace detail

/// Throws ConfigError when the spec violates its family's invariants.
inline void validate(const NormSpec& spec)
{
    if (spec.n < 1) throw ConfigError("norm dimension must be >= 1");
    switch (spec.family) {
    case NormFamily::euclidean: break;
    case NormFamily::p_norm:
        if (!(spec.p > 1.0) || !std::isfinite(spec.p))
            throw ConfigError("p-norm requires finite p > 1, got p = " + format_double(spec.p));
        break;
    case NormFamily::quadratic: {
        if (spec.A.rows() != spec.n || spec.A.cols() != spec.n)
            throw ConfigError("quadratic norm matrix must be n x n");
        if (!spec.A.allFinite() || !detail::is_symmetric(spec.A))
            throw ConfigError("quadratic norm matrix must be symmetric");
        Eigen::SelfAdjointEigenSolver<Mat> es(spec.A, Eigen::EigenvaluesOnly);
        if (!(es.eigenvalues().minCoeff() > 0.0))
            throw ConfigError("quadratic norm matrix must be positive definite");
        break;
    }
    case NormFamily::regularized:
        if (!spec.base) throw ConfigError("regularized norm is missing its base");
        if (!(spec.eps > 0.0) || !std::isfinite(spec.eps))
            throw ConfigError("regularization eps must be > 0");
        if (spec.base->n != spec.n) throw ConfigError("regularized norm dimension mismatch");
        validate(*spec.base);
        break;
    }
}

inline NormSpec NormSpec::euclidean(int n)
{
    NormSpec s;
    s.family = NormFamily::euclidean;
    s.n = n;
    validate(s);
    return s;
}

inline NormSpec NormSpec::p_norm(double p, int n)
{
    NormSpec s;
    s.family = NormFamily::p_norm;
    s.n = n;
    s.p = p;
    validate(s);
    return s;
}

inline NormSpec NormSpec::quadratic(const Mat& A)
{
    NormSpec s;
    s.family = NormFamily::quadratic;
    s.n = static_cast<int>(A.rows());
    s.A = A;
    validate(s);
    return s;
}

/// sqrt(F^2 + eps |xi|^2); strongly convex for every eps > 0.
inline NormSpec regularize(const NormSpec& spec, double eps)
{
    if (!(eps > 0.0)) throw ConfigError("regularization eps must be > 0");
    NormSpec s;
    s.family = NormFamily::regularized;
    s.n = spec.n;
    s.base = std::make_shared<const NormSpec>(spec);
    s.eps = eps;
    validate(s);
    return s;
}

/// True when D^2(F^2) is positive definite away from the origin.
inline bool is_strongly_convex(const NormSpec& spec)
{
    switch (spec.family) {
    case NormFamily::euclidean:
    case NormFamily::quadratic:
    case NormFamily::regularized: return true;
    case NormFamily::p_norm: return spec.p == 2.0 || spec.n == 1;
    }
    return false;
}

/// Constants c, C with c|xi| <= F(xi) <= C|xi|.
struct EuclideanBounds {
    double lower = 1.0;
    double upper = 1.0;
};

inline EuclideanBounds euclidean_bounds(const NormSpec& spec)
{
    switch (spec.family) {
    case NormFamily::euclidean: return {1.0, 1.0};
    case NormFamily::p_norm: {
        const double r = std::pow(static_cast<double>(spec.n), 1.0 / spec.p - 0.5);
        return spec.p >= 2.0 ? EuclideanBounds{r, 1.0} : EuclideanBounds{1.0, r};
    }
    case NormFamily::quadratic: {
        Eigen::SelfAdjointEigenSolver<Mat> es(spec.A, Eigen::EigenvaluesOnly);
        return {std::sqrt(es.eigenvalues().minCoeff()), std::sqrt(es.eigenvalues().maxCoeff())};
    }
    case NormFamily::regularized: {
        const auto b = euclidean_bounds(*spec.base);
        return {std::sqrt(b.lower * b.lower + spec.eps), std::sqrt(b.upper * b.upper + spec.eps)};
    }
    }
    return {};
}

namespace detail {

inline double p_norm_value(const Vec& xi, double p)
{
    const double m = xi.cwiseAbs().maxCoeff();
    if (m == 0.0) return 0.0;
    double s = 0.0;
    for (Eigen::Index i = 0; i < xi.size(); ++i) s += std::pow(std::abs(xi[i]) / m, p);
    return m * std::pow(s, 1.0 / p);
}

inline NormTensors p_norm_tensors(const NormSpec& spec, const Vec& xi, bool want_a3)
{
    const int n = spec.n;
    const double p = spec.p;
    const bool euclid = (p == 2.0);
    for (int i = 0; i < n; ++i) {
        if (xi[i] != 0.0) continue;
        if (p < 2.0)
            throw SingularityError("p-norm with p < 2 has unbounded second derivatives at a "
                                   "point with a zero coordinate; wrap the spec in regularize()");
        if (want_a3 && !euclid && p <= 3.0)
            throw SingularityError("p-norm with 2 < p <= 3 has no third derivatives at a point "
                                   "with a zero coordinate");
    }

    NormTensors t;
    t.value = p_norm_value(xi, p);
    const Vec eta = xi / t.value;
    Vec w(n), z(n), y(n);
    for (int i = 0; i < n; ++i) {
        const double e = std::abs(eta[i]);
        w[i] = sgn(eta[i]) * std::pow(e, p - 1.0);
        z[i] = euclid ? 1.0 : std::pow(e, p - 2.0);
        y[i] = (euclid || e == 0.0) ? 0.0 : sgn(eta[i]) * std::pow(e, p - 3.0);
    }
    t.grad = w;
    t.a = (2.0 - p) * w * w.transpose();
    for (int i = 0; i < n; ++i) t.a(i, i) += (p - 1.0) * z[i];

    if (want_a3) {
        t.a3 = Tensor3(n);
        t.has_a3 = true;
        const double c1 = (2.0 - p) * (2.0 - 2.0 * p);
        const double c2 = (2.0 - p) * (p - 1.0);
        const double c3 = (p - 1.0) * (p - 2.0);
        const double inv = 1.0 / t.value;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    double v = c1 * w[i] * w[j] * w[k];
                    if (i == k) v += c2 * z[i] * w[j];
                    if (j == k) v += c2 * z[j] * w[i];
                    if (i == j) v += c2 * z[i] * w[k];
                    if (i == j && j == k) v += c3 * y[i];
                    t.a3(i, j, k) = inv * v;
                }
    }
    return t;
}

} // namespace detail

/// F(xi); F(0) = 0.
inline double eval_norm(const NormSpec& spec, const Vec& xi)
{
    detail::require_dim(spec, xi.size());
    switch (spec.family) {
    case NormFamily::euclidean: return xi.norm();
    case NormFamily::p_norm: return detail::p_norm_value(xi, spec.p);
    case NormFamily::quadratic: return std::sqrt(std::max(0.0, xi.dot(spec.A * xi)));
    case NormFamily::regularized: {
        const double b = eval_norm(*spec.base, xi);
        return std::sqrt(b * b + spec.eps * xi.squaredNorm());
    }
    }
    return 0.0;
}

/// F, F_xi, a and optionally a3 at xi != 0.
inline NormTensors eval_tensors(const NormSpec& spec, const Vec& xi, bool want_a3 = false)
{
    detail::require_dim(spec, xi.size());
    if (xi.cwiseAbs().maxCoeff() == 0.0) throw DomainError("tensors undefined at origin");
    const int n = spec.n;
    NormTensors t;
    switch (spec.family) {
    case NormFamily::euclidean:
        t.value = xi.norm();
        t.grad = xi / t.value;
        t.a = Mat::Identity(n, n);
        break;
    case NormFamily::p_norm: return detail::p_norm_tensors(spec, xi, want_a3);
    case NormFamily::quadratic: {
        const Vec Ax = spec.A * xi;
        t.value = std::sqrt(xi.dot(Ax));
        t.grad = Ax / t.value;
        t.a = spec.A;
        break;
    }
    case NormFamily::regularized: {
        NormTensors b = eval_tensors(*spec.base, xi, want_a3);
        t.value = std::sqrt(b.value * b.value + spec.eps * xi.squaredNorm());
        t.grad = (b.value * b.grad + spec.eps * xi) / t.value;
        t.a = b.a + spec.eps * Mat::Identity(n, n);
        if (want_a3) {
            t.a3 = std::move(b.a3);
            t.has_a3 = true;
        }
        return t;
    }
    }
    if (want_a3) {
        t.a3 = Tensor3(n);
        t.has_a3 = true;
    }
    return t;
}

/// F and F_xi at xi != 0. Unlike eval_tensors this never needs second
/// derivatives, so it is defined for every p > 1 at every xi != 0.
inline GaugeGrad eval_gradient(const NormSpec& spec, const Vec& xi)
{
    detail::require_dim(spec, xi.size());
    if (xi.cwiseAbs().maxCoeff() == 0.0) throw DomainError("gradient undefined at origin");
    switch (spec.family) {
    case NormFamily::euclidean: {
        const double f = xi.norm();
        return {f, xi / f};
    }
    case NormFamily::p_norm: {
        const double f = detail::p_norm_value(xi, spec.p);
        Vec g(spec.n);
        for (int i = 0; i < spec.n; ++i)
            g[i] = detail::sgn(xi[i]) * std::pow(std::abs(xi[i]) / f, spec.p - 1.0);
        return {f, g};
    }
    case NormFamily::quadratic: {
        const Vec Ax = spec.A * xi;
        const double f = std::sqrt(xi.dot(Ax));
        return {f, Ax / f};
    }
    case NormFamily::regularized: {
        const GaugeGrad b = eval_gradient(*spec.base, xi);
        const double f = std::sqrt(b.value * b.value + spec.eps * xi.squaredNorm());
        return {f, (b.value * b.grad + spec.eps * xi) / f};
    }
    }
    return {};
}

/// F_ij = (a_ij - F_i F_j) / F, the Hessian of F itself.
inline Mat f_hessian(const NormTensors& t)
{
    return (t.a - t.grad * t.grad.transpose()) / t.value;
}

/// F^2(xi) and D(F^2/2)(xi) = F F_xi for planar xi, extended by 0 at the
/// origin. Allocation-free; this is the eigensolver's inner kernel.
inline void half_square_2d(const NormSpec& spec, const Vec2& xi, double& f2, Vec2& g)
{
    switch (spec.family) {
    case NormFamily::euclidean:
        g = xi;
        f2 = xi.squaredNorm();
        return;
    case NormFamily::quadratic:
        g[0] = spec.A(0, 0) * xi[0] + spec.A(0, 1) * xi[1];
        g[1] = spec.A(1, 0) * xi[0] + spec.A(1, 1) * xi[1];
        f2 = xi.dot(g);
        return;
    case NormFamily::p_norm: {
        const double m = std::max(std::abs(xi[0]), std::abs(xi[1]));
        if (m == 0.0) {
            f2 = 0.0;
            g.setZero();
            return;
        }
        const double p = spec.p;
        const double e0 = std::abs(xi[0]) / m, e1 = std::abs(xi[1]) / m;
        const double pw0 = std::pow(e0, p), pw1 = std::pow(e1, p);
        const double s = pw0 + pw1;
        const double F = m * std::pow(s, 1.0 / p);
        // F F_i = F * sgn(xi_i) |xi_i / F|^(p-1) = m * sgn * e_i^(p-1) * s^(2/p - 1)
        const double scale = m * std::pow(s, 2.0 / p - 1.0);
        g[0] = e0 == 0.0 ? 0.0 : detail::sgn(xi[0]) * scale * pw0 / e0;
        g[1] = e1 == 0.0 ? 0.0 : detail::sgn(xi[1]) * scale * pw1 / e1;
        f2 = F * F;
        return;
    }
    case NormFamily::regularized:
        half_square_2d(*spec.base, xi, f2, g);
        f2 += spec.eps * xi.squaredNorm();
        g += spec.eps * xi;
        return;
    }
}

/// F^2(xi) for planar xi without the gradient.
inline double norm_squared_2d(const NormSpec& spec, const Vec2& xi)
{
    switch (spec.family) {
    case NormFamily::euclidean: return xi.squaredNorm();
    case NormFamily::quadratic:
        return spec.A(0, 0) * xi[0] * xi[0] + 2.0 * spec.A(0, 1) * xi[0] * xi[1] +
               spec.A(1, 1) * xi[1] * xi[1];
    case NormFamily::p_norm: {
        const double m = std::max(std::abs(xi[0]), std::abs(xi[1]));
        if (m == 0.0) return 0.0;
        const double s = std::pow(std::abs(xi[0]) / m, spec.p) + std::pow(std::abs(xi[1]) / m, spec.p);
        const double F = m * std::pow(s, 1.0 / spec.p);
        return F * F;
    }
    case NormFamily::regularized:
        return norm_squared_2d(*spec.base, xi) + spec.eps * xi.squaredNorm();
    }
    return 0.0;
}

/// Short human-readable description, e.g. "pnorm(p=4)".
inline std::string describe(const NormSpec& spec)
{
    std::ostringstream os;
    switch (spec.family) {
    case NormFamily::euclidean: os << "euclidean"; break;
    case NormFamily::p_norm: os << "pnorm(p=" << format_double(spec.p) << ")"; break;
    case NormFamily::quadratic:
        os << "quadratic(A=[";
        for (int i = 0; i < spec.A.rows(); ++i) {
            os << (i ? ";" : "");
            for (int j = 0; j < spec.A.cols(); ++j) os << (j ? "," : "") << format_double(spec.A(i, j));
        }
        os << "])";
        break;
    case NormFamily::regularized: os << "regularized(" << describe(*spec.base) << ",eps=" << format_double(spec.eps) << ")"; break;
    }
    return os.str();
}

} // namespace finsler
