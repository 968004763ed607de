// Smooth probe functions with closed-form derivatives up to third order.

#pragma once

#include "finsler/norms.hpp"
#include "finsler/types.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace finsler {

/// u and its partial derivatives at one point.
struct Jet {
    double value = 0.0;
    Vec grad;
    Mat hess;
    Tensor3 third;
};

enum class ProbeKind { polynomial, trig_product, radial };

inline const char* to_string(ProbeKind k)
{
    switch (k) {
    case ProbeKind::polynomial: return "polynomial";
    case ProbeKind::trig_product: return "trig_product";
    case ProbeKind::radial: return "radial";
    }
    return "?";
}

struct Monomial {
    double coef = 0.0;
    std::vector<int> powers;
};

class TestFunction {
public:
    /// sum_m coef_m x^{powers_m}; total degree <= 4.
    static TestFunction polynomial(int n, std::vector<Monomial> terms)
    {
        TestFunction f(ProbeKind::polynomial, n);
        for (const auto& t : terms) {
            if (static_cast<int>(t.powers.size()) != n) throw ConfigError("monomial has wrong number of exponents");
            int deg = 0;
            for (int p : t.powers) {
                if (p < 0) throw ConfigError("negative monomial exponent");
                deg += p;
            }
            if (deg > 4) throw ConfigError("probe polynomials have degree <= 4");
        }
        f.terms_ = std::move(terms);
        return f;
    }

    /// amp * prod_i sin(k_i x_i + phase_i)
    static TestFunction trig_product(double amp, Vec k, Vec phase)
    {
        if (k.size() != phase.size()) throw ConfigError("trig probe: k and phase differ in length");
        TestFunction f(ProbeKind::trig_product, static_cast<int>(k.size()));
        f.amp_ = amp;
        f.k_ = std::move(k);
        f.phase_ = std::move(phase);
        return f;
    }

    /// g(r) with r = sqrt((x-c)^T B (x-c)) and g(r) = sum_m g_m r^m (m <= 4).
    static TestFunction radial(Vec center, Mat B, std::vector<double> g)
    {
        if (B.rows() != center.size() || B.cols() != center.size()) throw ConfigError("radial probe: B has wrong shape");
        if (g.size() > 5) throw ConfigError("radial probe profile has degree <= 4");
        Eigen::LLT<Mat> llt(B);
        if (llt.info() != Eigen::Success) throw ConfigError("radial probe: B must be positive definite");
        TestFunction f(ProbeKind::radial, static_cast<int>(center.size()));
        f.center_ = std::move(center);
        f.B_ = std::move(B);
        f.g_ = std::move(g);
        return f;
    }

    ProbeKind kind() const { return kind_; }
    int dim() const { return n_; }

    Jet eval(const Vec& x) const
    {
        if (x.size() != n_) throw ConfigError("probe evaluated at a point of the wrong dimension");
        switch (kind_) {
        case ProbeKind::polynomial: return eval_polynomial(x);
        case ProbeKind::trig_product: return eval_trig(x);
        case ProbeKind::radial: return eval_radial(x);
        }
        return {};
    }

    std::string describe() const { return to_string(kind_); }

private:
    TestFunction(ProbeKind kind, int n) : kind_(kind), n_(n) {}

    Jet blank() const
    {
        Jet j;
        j.grad = Vec::Zero(n_);
        j.hess = Mat::Zero(n_, n_);
        j.third = Tensor3(n_);
        return j;
    }

    // d^r/dx^r of x^p
    static double power_derivative(double x, int p, int r)
    {
        if (r > p) return 0.0;
        double c = 1.0;
        for (int i = 0; i < r; ++i) c *= p - i;
        return c * std::pow(x, p - r);
    }

    Jet eval_polynomial(const Vec& x) const
    {
        Jet j = blank();
        std::vector<int> order(n_);
        auto term_derivative = [&](const Monomial& m, const std::vector<int>& ord) {
            double v = m.coef;
            for (int i = 0; i < n_ && v != 0.0; ++i) v *= power_derivative(x[i], m.powers[i], ord[i]);
            return v;
        };
        for (const auto& m : terms_) {
            std::fill(order.begin(), order.end(), 0);
            j.value += term_derivative(m, order);
            for (int a = 0; a < n_; ++a) {
                ++order[a];
                j.grad[a] += term_derivative(m, order);
                for (int b = 0; b < n_; ++b) {
                    ++order[b];
                    j.hess(a, b) += term_derivative(m, order);
                    for (int c = 0; c < n_; ++c) {
                        ++order[c];
                        j.third(a, b, c) += term_derivative(m, order);
                        --order[c];
                    }
                    --order[b];
                }
                --order[a];
            }
        }
        return j;
    }

    Jet eval_trig(const Vec& x) const
    {
        // r-th derivative of sin(theta) is sin(theta + r pi/2)
        auto factor = [&](int i, int r) {
            return std::pow(k_[i], r) * std::sin(k_[i] * x[i] + phase_[i] + r * pi / 2);
        };
        auto product = [&](const std::vector<int>& ord) {
            double v = amp_;
            for (int i = 0; i < n_; ++i) v *= factor(i, ord[i]);
            return v;
        };
        Jet j = blank();
        std::vector<int> order(n_, 0);
        j.value = product(order);
        for (int a = 0; a < n_; ++a) {
            ++order[a];
            j.grad[a] = product(order);
            for (int b = 0; b < n_; ++b) {
                ++order[b];
                j.hess(a, b) = product(order);
                for (int c = 0; c < n_; ++c) {
                    ++order[c];
                    j.third(a, b, c) = product(order);
                    --order[c];
                }
                --order[b];
            }
            --order[a];
        }
        return j;
    }

    Jet eval_radial(const Vec& x) const
    {
        const Vec y = x - center_;
        const Vec By = B_ * y;
        const double r = std::sqrt(std::max(0.0, y.dot(By)));
        if (!(r > 0.0)) throw DomainError("radial probe is not smooth at its center");
        double g0 = 0, g1 = 0, g2 = 0, g3 = 0;
        for (std::size_t m = 0; m < g_.size(); ++m) {
            const int p = static_cast<int>(m);
            g0 += g_[m] * power_derivative(r, p, 0);
            g1 += g_[m] * power_derivative(r, p, 1);
            g2 += g_[m] * power_derivative(r, p, 2);
            g3 += g_[m] * power_derivative(r, p, 3);
        }
        const Vec ri = By / r;
        const Mat rij = (B_ - ri * ri.transpose()) / r;
        Jet j = blank();
        j.value = g0;
        j.grad = g1 * ri;
        j.hess = g2 * ri * ri.transpose() + g1 * rij;
        for (int a = 0; a < n_; ++a)
            for (int b = 0; b < n_; ++b)
                for (int c = 0; c < n_; ++c) {
                    const double rijk = -(rij(a, c) * ri[b] + rij(b, c) * ri[a] + rij(a, b) * ri[c]) / r;
                    j.third(a, b, c) = g3 * ri[a] * ri[b] * ri[c] +
                                       g2 * (rij(a, c) * ri[b] + ri[a] * rij(b, c) + rij(a, b) * ri[c]) + g1 * rijk;
                }
        return j;
    }

    ProbeKind kind_;
    int n_;
    std::vector<Monomial> terms_;
    double amp_ = 1.0;
    Vec k_, phase_;
    Vec center_;
    Mat B_;
    std::vector<double> g_;
};

/// Random probe of the given kind: cubic polynomials, trig products with
/// frequencies in [0.5, 2], or radial profiles of degree <= 3 about a random
/// center with a random SPD B.
inline TestFunction random_probe(Rng& rng, int n, ProbeKind kind)
{
    switch (kind) {
    case ProbeKind::polynomial: {
        std::vector<Monomial> terms;
        // every exponent vector of total degree 1..3
        std::vector<int> pw(n, 0);
        auto rec = [&](auto&& self, int i, int left) -> void {
            if (i == n) {
                const int deg = 3 - left;
                if (deg >= 1) terms.push_back({rng.uniform(-1.0, 1.0), pw});
                return;
            }
            for (int e = 0; e <= left; ++e) {
                pw[i] = e;
                self(self, i + 1, left - e);
            }
            pw[i] = 0;
        };
        rec(rec, 0, 3);
        return TestFunction::polynomial(n, std::move(terms));
    }
    case ProbeKind::trig_product: {
        Vec k(n), ph(n);
        for (int i = 0; i < n; ++i) {
            k[i] = rng.uniform(0.5, 2.0);
            ph[i] = rng.uniform(0.0, 2.0 * pi);
        }
        return TestFunction::trig_product(rng.uniform(0.5, 2.0), k, ph);
    }
    case ProbeKind::radial: {
        Vec c(n);
        for (int i = 0; i < n; ++i) c[i] = rng.uniform(-2.0, -1.0);
        Mat G(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) G(i, j) = rng.uniform(-1.0, 1.0);
        const Mat B = G * G.transpose() + 0.5 * Mat::Identity(n, n);
        return TestFunction::radial(c, B, {rng.uniform(-1.0, 1.0), rng.uniform(0.5, 1.5), rng.uniform(-0.5, 0.5),
                                           rng.uniform(-0.2, 0.2)});
    }
    }
    throw ConfigError("unknown probe kind");
}

} // namespace finsler
