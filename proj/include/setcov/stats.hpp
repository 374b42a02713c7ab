#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "setcov/common.hpp"
#include "setcov/special.hpp"

namespace setcov {

struct moments {
    std::size_t n = 0;
    double mean = 0.0;
    double var = 0.0;      // unbiased
    double skewness = 0.0; // standardized third moment
    double ex_kurtosis = 0.0;
    double stderr_mean = 0.0;
};

inline moments compute_moments(const std::vector<double>& x) {
    moments m;
    m.n = x.size();
    if (m.n == 0) return m;
    kahan_sum s;
    for (double v : x) s.add(v);
    m.mean = s.value() / m.n;
    kahan_sum s2, s3, s4;
    for (double v : x) {
        const double d = v - m.mean;
        s2.add(d * d);
        s3.add(d * d * d);
        s4.add(d * d * d * d);
    }
    if (m.n > 1) m.var = s2.value() / (m.n - 1);
    const double sd2 = s2.value() / m.n;
    const double sd = std::sqrt(sd2);
    if (sd > 0.0) {
        m.skewness = (s3.value() / m.n) / (sd2 * sd);
        m.ex_kurtosis = (s4.value() / m.n) / (sd2 * sd2) - 3.0;
    }
    m.stderr_mean = m.n > 1 ? std::sqrt(m.var / m.n) : 0.0;
    return m;
}

inline double sample_covariance(const std::vector<double>& x, const std::vector<double>& y) {
    require(x.size() == y.size() && x.size() > 1, errc::invalid_argument,
            "sample_covariance: size mismatch");
    const double mx = compute_moments(x).mean;
    const double my = compute_moments(y).mean;
    kahan_sum s;
    for (std::size_t i = 0; i < x.size(); ++i) s.add((x[i] - mx) * (y[i] - my));
    return s.value() / (x.size() - 1);
}

inline double sample_correlation(const std::vector<double>& x, const std::vector<double>& y) {
    const double c = sample_covariance(x, y);
    const double vx = compute_moments(x).var;
    const double vy = compute_moments(y).var;
    require(vx > 0.0 && vy > 0.0, errc::invalid_argument, "sample_correlation: zero variance");
    return c / std::sqrt(vx * vy);
}

/// One-sample Kolmogorov-Smirnov distance of `x`, standardized in place by
/// its own mean/sd, against the standard normal CDF.
inline double ks_distance_normal(std::vector<double> x) {
    require(x.size() >= 2, errc::invalid_argument, "ks_distance_normal: need >= 2 samples");
    const moments m = compute_moments(x);
    const double sd = std::sqrt(m.var);
    require(sd > 0.0, errc::invalid_argument, "ks_distance_normal: zero variance");
    for (double& v : x) v = (v - m.mean) / sd;
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = normal_cdf(x[i]);
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
    }
    return d;
}

} // namespace setcov
