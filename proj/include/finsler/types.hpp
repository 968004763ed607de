// Common vocabulary for the finsler headers: vector aliases, the error
// hierarchy and a portable seeded random source.

#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace finsler {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double x)
{
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline constexpr double pi = 3.14159265358979323846;

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: bad norm parameters, invalid polygons, bad solver options.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input outside an operation's mathematical domain (e.g. tensors at the origin).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Derivatives that do not exist at the requested point.
class SingularityError : public DomainError {
public:
    using DomainError::DomainError;
};

/// An iterative or integration routine that failed to deliver.
class NumericalError : public Error {
public:
    using Error::Error;
};

// std::uniform_real_distribution is implementation defined; this one is not,
// which keeps corpus output byte-identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * pi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * pi * u2);
    }

    Vec normal_vector(int n)
    {
        Vec v(n);
        for (int i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace finsler
