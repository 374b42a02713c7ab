#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "setcov/common.hpp"

namespace setcov {

struct quad_result {
    double value = 0.0;
    double error = 0.0; // estimate, not a rigorous bound
};

namespace detail {

// Gauss-Legendre abscissae/weights on [-1,1].
struct gl_rule {
    const double* x;
    const double* w;
    int n;
};

inline const gl_rule& gl4() {
    static const double x[] = {-0.8611363115940526, -0.3399810435848563,
                               0.3399810435848563, 0.8611363115940526};
    static const double w[] = {0.3478548451374538, 0.6521451548625461,
                               0.6521451548625461, 0.3478548451374538};
    static const gl_rule r{x, w, 4};
    return r;
}

inline const gl_rule& gl8() {
    static const double x[] = {-0.9602898564975363, -0.7966664774136267,
                               -0.5255324099163290, -0.1834346424956498,
                               0.1834346424956498,  0.5255324099163290,
                               0.7966664774136267,  0.9602898564975363};
    static const double w[] = {0.1012285362903763, 0.2223810344533745,
                               0.3137066458778873, 0.3626837833783620,
                               0.3626837833783620, 0.3137066458778873,
                               0.2223810344533745, 0.1012285362903763};
    static const gl_rule r{x, w, 8};
    return r;
}

inline const gl_rule& gl16() {
    static const double x[] = {
        -0.9894009349916499, -0.9445750230732326, -0.8656312023878318,
        -0.7554044083550030, -0.6178762444026438, -0.4580167776572274,
        -0.2816035507792589, -0.0950125098376374, 0.0950125098376374,
        0.2816035507792589,  0.4580167776572274,  0.6178762444026438,
        0.7554044083550030,  0.8656312023878318,  0.9445750230732326,
        0.9894009349916499};
    static const double w[] = {
        0.0271524594117541, 0.0622535239386479, 0.0951585116824928,
        0.1246289712555339, 0.1495959888165767, 0.1691565193950025,
        0.1826034150449236, 0.1894506104550685, 0.1894506104550685,
        0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
        0.1246289712555339, 0.0951585116824928, 0.0622535239386479,
        0.0271524594117541};
    static const gl_rule r{x, w, 16};
    return r;
}

} // namespace detail

/// One Gauss-Legendre panel of f over [a,b].
template <class F>
double gl_panel(F&& f, double a, double b, const detail::gl_rule& rule = detail::gl16()) {
    const double hw = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    kahan_sum s;
    for (int i = 0; i < rule.n; ++i) s.add(rule.w[i] * f(mid + hw * rule.x[i]));
    return hw * s.value();
}

namespace detail {

template <class F>
quad_result adaptive_gl_rec(F& f, double a, double b, double coarse, double tol, double floor_,
                            int depth, int max_depth) {
    const double mid = 0.5 * (a + b);
    const double left = gl_panel(f, a, mid);
    const double right = gl_panel(f, mid, b);
    const double fine = left + right;
    const double delta = std::abs(fine - coarse);
    const double accept = std::max(tol, floor_);
    if (delta <= accept || depth >= max_depth) {
        if (delta > accept)
            fail(errc::quadrature_failure,
                 "adaptive quadrature did not converge on [" + std::to_string(a) + "," +
                     std::to_string(b) + "]: last estimates " + std::to_string(coarse) + ", " +
                     std::to_string(fine));
        return {fine, delta};
    }
    auto l = adaptive_gl_rec(f, a, mid, left, 0.5 * tol, floor_, depth + 1, max_depth);
    auto r = adaptive_gl_rec(f, mid, b, right, 0.5 * tol, floor_, depth + 1, max_depth);
    return {l.value + r.value, l.error + r.error};
}

} // namespace detail

/// Adaptive panel Gauss-Legendre for smooth or mildly singular integrands.
/// Refinement stops at a machine-precision floor scaled to the whole panel,
/// so tolerance halving cannot recurse past what doubles can resolve.
template <class F>
quad_result adaptive_integrate(F&& f, double a, double b, double abs_tol = 1e-11,
                               double rel_tol = 1e-11, int max_depth = 44) {
    if (a == b) return {0.0, 0.0};
    const double coarse = gl_panel(f, a, b);
    const double tol = std::max(abs_tol, rel_tol * std::abs(coarse));
    const double floor_ = 4e-15 * std::abs(coarse) + 1e-300;
    return detail::adaptive_gl_rec(f, a, b, coarse, tol, floor_, 0, max_depth);
}

/// Composite integration over panels aligned to half-periods of an oscillatory
/// integrand (period 2*pi in the integration variable).  Accumulation is
/// compensated; the error estimate compares embedded 8- and 16-node rules.
template <class F>
quad_result oscillatory_integrate(F&& f, double a, double b, double half_period = pi) {
    if (b <= a) return {0.0, 0.0};
    // Align boundaries with the global lattice k*half_period so that prefix
    // accumulation over subranges reproduces the same panels.
    const long k0 = static_cast<long>(std::floor(a / half_period));
    const long k1 = static_cast<long>(std::ceil(b / half_period));
    kahan_sum val;
    double err = 0.0;
    for (long k = k0; k < k1; ++k) {
        const double pa = std::max(a, k * half_period);
        const double pb = std::min(b, (k + 1) * half_period);
        if (pb <= pa) continue;
        const double fine = gl_panel(f, pa, pb, detail::gl16());
        const double coarse = gl_panel(f, pa, pb, detail::gl8());
        val.add(fine);
        err += std::abs(fine - coarse);
    }
    return {val.value(), err};
}

/// Streaming prefix integral x -> int_0^x f(r) dr for an increasing sequence
/// of targets.  Oscillatory mode keeps panels on the fixed half-period
/// lattice, so the result for a given x does not depend on the visit order.
class prefix_integrator {
public:
    prefix_integrator(std::function<double(double)> f, bool oscillatory,
                      double half_period = pi, double abs_tol = 1e-12)
        : f_(std::move(f)), oscillatory_(oscillatory), half_period_(half_period),
          abs_tol_(abs_tol) {}

    /// Prefix value at x; x must be >= the previous target.
    double advance_to(double x) {
        require(x >= cur_ - 1e-15 * std::max(1.0, std::abs(cur_)), errc::invalid_argument,
                "prefix_integrator: targets must be nondecreasing");
        if (x <= cur_) return acc_.value();
        quad_result q;
        if (oscillatory_) {
            q = oscillatory_integrate(f_, cur_, x, half_period_);
        } else {
            q = adaptive_integrate(f_, cur_, x, abs_tol_, 1e-12);
        }
        acc_.add(q.value);
        err_ += q.error;
        cur_ = x;
        return acc_.value();
    }

    double current() const { return acc_.value(); }
    double error() const { return err_; }

private:
    std::function<double(double)> f_;
    bool oscillatory_;
    double half_period_;
    double abs_tol_;
    double cur_ = 0.0;
    kahan_sum acc_;
    double err_ = 0.0;
};

} // namespace setcov
