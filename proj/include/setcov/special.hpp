#pragma once

#include <cmath>

#include "setcov/common.hpp"

namespace setcov {

namespace detail {

// Ascending series sum_k (-1)^k (x^2/4)^k / (k! (k+nu)!), nu in {0,1}.
// Compensated summation keeps the cancellation error near machine level up to
// the series/asymptotic switch point.
inline double bessel_series(double x, int nu) {
    const double q = 0.25 * x * x;
    double term = (nu == 0) ? 1.0 : 0.5 * x;
    kahan_sum s;
    s.add(term);
    for (int k = 1; k < 80; ++k) {
        term *= -q / (static_cast<double>(k) * (k + nu));
        s.add(term);
        if (std::abs(term) < 1e-20 * (1.0 + std::abs(s.value()))) break;
    }
    return s.value();
}

// Hankel asymptotic expansion: J_nu(x) ~ sqrt(2/(pi x)) (P cos w - Q sin w),
// w = x - nu pi/2 - pi/4, with the usual (nu,m) coefficients.
inline double bessel_hankel(double x, int nu) {
    const double mu = 4.0 * nu * nu;
    double a = 1.0; // (nu,m), m = 0
    double p = 1.0, q = 0.0;
    double xm = 1.0;
    for (int m = 1; m <= 11; ++m) {
        a *= (mu - (2.0 * m - 1.0) * (2.0 * m - 1.0)) / (8.0 * m);
        xm *= x;
        const double term = a / xm;
        const int k = m / 2;
        if (m % 2 == 1) {
            q += (k % 2 == 0) ? term : -term;
        } else {
            p += (k % 2 == 0) ? term : -term;
        }
    }
    const double w = x - 0.5 * nu * pi - 0.25 * pi;
    return std::sqrt(2.0 / (pi * x)) * (p * std::cos(w) - q * std::sin(w));
}

} // namespace detail

/// Bessel function of the first kind, order 0.  Even extension in x.
/// Absolute error <= 1e-10 on [0, 1e5].
inline double bessel_j0(double x) {
    x = std::abs(x);
    return x < 16.0 ? detail::bessel_series(x, 0) : detail::bessel_hankel(x, 0);
}

/// Bessel function of the first kind, order 1 (odd extension).
inline double bessel_j1(double x) {
    const double ax = std::abs(x);
    const double v = ax < 16.0 ? detail::bessel_series(ax, 1) : detail::bessel_hankel(ax, 1);
    return x < 0.0 ? -v : v;
}

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

} // namespace setcov
