#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace setcov {

inline constexpr double pi = std::numbers::pi;

/// Error categories surfaced by the library.  The CLI maps them to exit codes.
enum class errc {
    invalid_argument,     // bad numeric input, violated precondition
    unsupported,          // shape/kernel pair outside the exact vocabulary
    dimension_mismatch,   //
    not_regularly_varying,// downstream op fed a rejected regular-variation fit
    quadrature_failure,   // adaptive refinement did not converge
    config_error,         // malformed config document
    refusal               // structured refusal (e.g. Berry q=1 limit request)
};

class error : public std::runtime_error {
public:
    error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    errc code() const noexcept { return code_; }
private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw error(code, what); }

inline void require(bool cond, errc code, const std::string& what) {
    if (!cond) fail(code, what);
}

/// Surface measure of the unit sphere S^{d-1}; omega(1) == 2 by the
/// one-dimensional convention (two signed directions).
inline double sphere_surface(int d) {
    require(d >= 1, errc::invalid_argument, "sphere_surface: d must be >= 1");
    return 2.0 * std::pow(pi, 0.5 * d) / std::tgamma(0.5 * d);
}

/// Volume of the unit ball in R^d.
inline double unit_ball_volume(int d) {
    require(d >= 1, errc::invalid_argument, "unit_ball_volume: d must be >= 1");
    return std::pow(pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

/// Compensated accumulator for long oscillatory sums.
class kahan_sum {
public:
    void add(double x) {
        double y = x - c_;
        double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }
private:
    double s_ = 0.0, c_ = 0.0;
};

/// Deterministic pairwise reduction; result depends only on element order.
inline double pairwise_sum(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
    const std::size_t n = hi - lo;
    if (n <= 8) {
        kahan_sum s;
        for (std::size_t i = lo; i < hi; ++i) s.add(v[i]);
        return s.value();
    }
    const std::size_t mid = lo + n / 2;
    return pairwise_sum(v, lo, mid) + pairwise_sum(v, mid, hi);
}

inline double pairwise_sum(const std::vector<double>& v) {
    return pairwise_sum(v, 0, v.size());
}

inline bool nearly_equal(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

} // namespace setcov
