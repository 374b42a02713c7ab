#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "setcov/common.hpp"
#include "setcov/special.hpp"

namespace setcov {

/// Radial covariance kernel k(r) with optional closed-form prefix integral
/// int_0^x k(r) r^{d-1} dr.  `oscillatory` routes quadrature to half-period
/// panels; `known_alpha(d)` is the regular-variation index of w_t when the
/// model pins it.
struct radial_kernel {
    std::string name = "custom";
    std::function<double(double)> k;
    double k0 = 1.0;
    bool oscillatory = false;
    std::function<std::optional<double>(int)> known_alpha = [](int) {
        return std::optional<double>{};
    };
    std::function<double(int, double)> prefix; // may be empty
    std::vector<int> prefix_dims;

    bool has_prefix(int d) const {
        return prefix && std::find(prefix_dims.begin(), prefix_dims.end(), d) != prefix_dims.end();
    }
    double operator()(double r) const { return k(r); }
};

/// Correlation of unit increments of fractional Brownian motion,
/// C(z) = (|1+z|^{2H} + |1-z|^{2H} - 2|z|^{2H}) / 2, H in (0, 1/2].
inline double fgn_correlation(double H, double z) {
    require(H > 0.0 && H <= 0.5, errc::invalid_argument, "fgn_correlation: H must be in (0,1/2]");
    z = std::abs(z);
    const double e = 2.0 * H;
    return 0.5 * (std::pow(1.0 + z, e) + std::pow(std::abs(1.0 - z), e) - 2.0 * std::pow(z, e));
}

inline radial_kernel make_fgn_kernel(double H) {
    require(H > 0.0 && H <= 0.5, errc::invalid_argument, "fgn kernel: H must be in (0,1/2]");
    radial_kernel ker;
    ker.name = "fgn:H=" + std::to_string(H);
    ker.k = [H](double r) { return fgn_correlation(H, r); };
    ker.k0 = 1.0;
    ker.known_alpha = [H](int d) {
        return d == 1 ? std::optional<double>(2.0 * H - 1.0) : std::nullopt;
    };
    // int_0^x C = ((1+x)^p - sgn(1-x)|1-x|^p - 2x^p) / (2p), p = 2H+1
    ker.prefix = [H](int, double x) {
        const double p = 2.0 * H + 1.0;
        const double sgn = x <= 1.0 ? 1.0 : -1.0;
        return (std::pow(1.0 + x, p) - sgn * std::pow(std::abs(1.0 - x), p) -
                2.0 * std::pow(x, p)) /
               (2.0 * p);
    };
    ker.prefix_dims = {1};
    return ker;
}

inline radial_kernel make_gaussian_kernel(double s = 1.0) {
    require(s > 0.0, errc::invalid_argument, "gaussian kernel: scale must be positive");
    radial_kernel ker;
    ker.name = "gaussian:s=" + std::to_string(s);
    ker.k = [s](double r) { return std::exp(-0.5 * r * r / (s * s)); };
    ker.k0 = 1.0;
    ker.known_alpha = [](int) { return std::optional<double>(0.0); };
    ker.prefix = [s](int d, double x) {
        const double g1 = s * std::sqrt(0.5 * pi) * std::erf(x / (s * std::sqrt(2.0)));
        switch (d) {
        case 1:
            return g1;
        case 2:
            return s * s * (1.0 - std::exp(-0.5 * x * x / (s * s)));
        case 3:
            return s * s * (g1 - x * std::exp(-0.5 * x * x / (s * s)));
        default:
            fail(errc::unsupported, "gaussian prefix: d > 3");
        }
    };
    ker.prefix_dims = {1, 2, 3};
    return ker;
}

/// Long-memory correlation (1+r^2)^{-beta/2}; regularly varying with index
/// -beta, so w_t has index d - beta.
inline radial_kernel make_power_kernel(double beta) {
    require(beta > 0.0, errc::invalid_argument, "power kernel: beta must be positive");
    radial_kernel ker;
    ker.name = "power:beta=" + std::to_string(beta);
    ker.k = [beta](double r) { return std::pow(1.0 + r * r, -0.5 * beta); };
    ker.k0 = 1.0;
    ker.known_alpha = [beta](int d) {
        const double a = d - beta;
        return a > -1.0 && a <= d ? std::optional<double>(a) : std::nullopt;
    };
    return ker;
}

/// Berry random-wave covariance J_0(r) (d = 2).
inline radial_kernel make_berry_kernel() {
    radial_kernel ker;
    ker.name = "berry_j0";
    ker.k = [](double r) { return bessel_j0(r); };
    ker.k0 = 1.0;
    ker.oscillatory = true;
    // int_0^x J_0(r) r dr = x J_1(x)
    ker.prefix = [](int, double x) { return x * bessel_j1(x); };
    ker.prefix_dims = {2};
    return ker;
}

inline radial_kernel make_constant_kernel(double c) {
    radial_kernel ker;
    ker.name = "constant:c=" + std::to_string(c);
    ker.k = [c](double) { return c; };
    ker.k0 = c;
    ker.known_alpha = [c](int d) {
        return c > 0.0 ? std::optional<double>(static_cast<double>(d)) : std::nullopt;
    };
    ker.prefix = [c](int d, double x) { return c * std::pow(x, d) / d; };
    ker.prefix_dims = {1, 2, 3};
    return ker;
}

/// Kernel interpolated linearly from a CSV table of (r, k(r)) rows.
/// Evaluation beyond the tabulated range is an explicit error.
inline radial_kernel make_table_kernel(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), errc::config_error, "table kernel: cannot open " + path);
    std::vector<double> rs, ks;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double r, v;
        if (ss >> r >> v) {
            rs.push_back(r);
            ks.push_back(v);
        }
    }
    require(rs.size() >= 2, errc::config_error, "table kernel: need >= 2 rows");
    for (std::size_t i = 1; i < rs.size(); ++i)
        require(rs[i] > rs[i - 1], errc::config_error, "table kernel: r column must increase");
    require(rs.front() <= 0.0 || rs.front() < 1e-12, errc::config_error,
            "table kernel: table must start at r = 0");
    radial_kernel ker;
    ker.name = "table:" + path;
    ker.k0 = ks.front();
    ker.k = [rs, ks](double r) {
        require(r <= rs.back() * (1.0 + 1e-12), errc::invalid_argument,
                "table kernel: evaluation beyond tabulated range (extrapolation refused)");
        auto it = std::upper_bound(rs.begin(), rs.end(), r);
        if (it == rs.begin()) return ks.front();
        if (it == rs.end()) return ks.back();
        const std::size_t i = static_cast<std::size_t>(it - rs.begin());
        const double w = (r - rs[i - 1]) / (rs[i] - rs[i - 1]);
        return (1.0 - w) * ks[i - 1] + w * ks[i];
    };
    return ker;
}

/// Parse "name" or "name:key=value" kernel specs:
/// fgn:H=0.3, gaussian:s=1, power:beta=0.7, berry_j0, constant:c=1, table:PATH.
inline radial_kernel parse_kernel(const std::string& spec) {
    const auto colon = spec.find(':');
    const std::string head = spec.substr(0, colon);
    const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
    auto param = [&](const std::string& key) {
        const std::string prefix = key + "=";
        require(rest.rfind(prefix, 0) == 0, errc::config_error,
                "kernel spec '" + spec + "' expects '" + key + "=<value>'");
        return std::stod(rest.substr(prefix.size()));
    };
    if (head == "fgn") return make_fgn_kernel(param("H"));
    if (head == "gaussian") return make_gaussian_kernel(param("s"));
    if (head == "power") return make_power_kernel(param("beta"));
    if (head == "berry_j0") return make_berry_kernel();
    if (head == "constant") return make_constant_kernel(param("c"));
    if (head == "table") return make_table_kernel(rest);
    fail(errc::config_error, "unknown kernel spec: " + spec);
}

} // namespace setcov
