#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "setcov/common.hpp"
#include "setcov/geometry.hpp"
#include "setcov/kernels.hpp"
#include "setcov/quadrature.hpp"
#include "setcov/regvar.hpp"

namespace setcov {

enum class limit_method { closed_form, quadrature, riesz_mc };

struct limit_cov_result {
    double value = 0.0;
    double alpha = 0.0;
    double error_estimate = 0.0;
    limit_method method = limit_method::quadrature;
};

/// Interval pair closed form: (s^{a+1} + r^{a+1} - |r-s|^{a+1}) / (2(a+1)),
/// the fractional-Brownian-motion covariance shape.
inline double limit_cov_interval(double s, double r, double alpha) {
    require(s > 0.0 && r > 0.0, errc::invalid_argument, "limit_cov_interval: s, r > 0");
    require(alpha > -1.0, errc::invalid_argument, "limit_cov_interval: alpha > -1");
    const double a1 = alpha + 1.0;
    return (std::pow(s, a1) + std::pow(r, a1) - std::pow(std::abs(r - s), a1)) / (2.0 * a1);
}

/// alpha = 0 closed form: Vol(D cap L).
inline limit_cov_result limit_cov_alpha0(const compact_set& D, const compact_set& L,
                                         std::size_t mc_n = 1000000, std::uint64_t seed = 1) {
    const point z(D.dim, 0.0);
    const auto e = covariogram_auto(D, L, z, mc_n, seed);
    return {e.value, 0.0, 3.0 * e.stderr_,
            e.stderr_ == 0.0 ? limit_method::closed_form : limit_method::riesz_mc};
}

struct riesz_estimate {
    double value = 0.0;
    double stderr_ = 0.0;
};

/// Riesz-energy form of the limit for alpha in (0, d]:
/// (alpha/omega_{d-1}) Vol(D) Vol(L) E|X - Y|^{alpha-d}, X~U(D), Y~U(L).
inline riesz_estimate limit_cov_riesz(const compact_set& D, const compact_set& L, double alpha,
                                      std::size_t n = 1000000, std::uint64_t seed = 7) {
    require(D.dim == L.dim, errc::dimension_mismatch, "limit_cov_riesz: dimension mismatch");
    const int d = D.dim;
    require(alpha > 0.0 && alpha <= d, errc::invalid_argument,
            "limit_cov_riesz: alpha in (0, d] required");
    require(n >= 10000, errc::invalid_argument, "limit_cov_riesz: n >= 1e4 required");
    const double expo = alpha - d;
    const std::size_t chunks = 64;
    const std::size_t per = n / chunks;
    kahan_sum s1, s2;
    std::size_t total = 0;
    for (std::size_t c = 0; c < chunks; ++c) {
        counter_rng rng(seed, c);
        for (std::size_t i = 0; i < per; ++i) {
            const point x = sample_uniform(D, rng);
            const point y = sample_uniform(L, rng);
            double r2 = 0.0;
            for (int j = 0; j < d; ++j) r2 += (x[j] - y[j]) * (x[j] - y[j]);
            const double v = expo == 0.0 ? 1.0 : std::pow(r2, 0.5 * expo);
            s1.add(v);
            s2.add(v * v);
            ++total;
        }
    }
    const double mean = s1.value() / total;
    const double var = std::max(0.0, s2.value() / total - mean * mean);
    const double scale_ = alpha / sphere_surface(d) * volume(D) * volume(L);
    return {scale_ * mean, scale_ * std::sqrt(var / total)};
}

namespace detail {

// int_{l0}^{l1} (c0 + m (l - l0)) l^alpha dl, alpha > -1.
inline double linear_power_segment(double l0, double l1, double c0, double m, double alpha) {
    const double a1 = alpha + 1.0, a2 = alpha + 2.0;
    const double p1 = (std::pow(l1, a1) - std::pow(l0, a1)) / a1;
    const double p2 = (std::pow(l1, a2) - std::pow(l0, a2)) / a2;
    return (c0 - m * l0) * p1 + m * p2;
}

// integral of the piecewise-linear interpolant of (ls, phi) against l^alpha,
// restricted to the index subset `keep` (ascending, includes ends)
inline double interpolant_power_integral(const std::vector<double>& ls,
                                         const std::vector<double>& phi,
                                         const std::vector<std::size_t>& keep, double alpha) {
    kahan_sum s;
    for (std::size_t k = 0; k + 1 < keep.size(); ++k) {
        const std::size_t i = keep[k], j = keep[k + 1];
        const double l0 = ls[i], l1 = ls[j];
        if (l1 <= l0) continue;
        const double m = (phi[j] - phi[i]) / (l1 - l0);
        s.add(linear_power_segment(l0, l1, phi[i], m, alpha));
    }
    return s.value();
}

} // namespace detail

/// The theorem's limit, evaluated from a sampled covariogram profile:
/// (1/omega_{d-1}) int_{S^{d-1}} dtheta int_0^inf (-d/dl g(l theta)) l^alpha dl.
/// The derivative samples are integrated exactly against l^alpha segment by
/// segment, which absorbs the l^alpha singularity for alpha in (-1,0).
inline limit_cov_result limit_cov(const compact_set& D, const compact_set& L, double alpha,
                                  const covariogram_profile& profile) {
    const int d = D.dim;
    require(alpha > -1.0 && alpha <= static_cast<double>(d), errc::invalid_argument,
            "limit_cov: alpha in (-1, d] required");
    require(profile.ls.back() >= profile.h * (1.0 - 1e-9), errc::invalid_argument,
            "limit_cov: profile does not cover [0, h(D-L)]");
    const std::size_t m = profile.ls.size();
    std::vector<std::size_t> all(m), coarse;
    for (std::size_t i = 0; i < m; ++i) all[i] = i;
    for (std::size_t i = 0; i < m; i += 2) coarse.push_back(i);
    if (coarse.back() != m - 1) coarse.push_back(m - 1);

    kahan_sum fine_sum, coarse_sum;
    double var_sum = 0.0;
    for (std::size_t ti = 0; ti < profile.thetas.size(); ++ti) {
        fine_sum.add(detail::interpolant_power_integral(profile.ls, profile.derivs[ti], all, alpha));
        coarse_sum.add(
            detail::interpolant_power_integral(profile.ls, profile.derivs[ti], coarse, alpha));
        if (profile.method == profile_method::monte_carlo) {
            // hat-function weights against l^alpha propagate the node stderr
            for (std::size_t i = 0; i < m; ++i) {
                double w = 0.0;
                if (i > 0) {
                    const double dl = profile.ls[i] - profile.ls[i - 1];
                    if (dl > 0) w += detail::linear_power_segment(profile.ls[i - 1], profile.ls[i],
                                                                  0.0, 1.0 / dl, alpha);
                }
                if (i + 1 < m) {
                    const double dl = profile.ls[i + 1] - profile.ls[i];
                    if (dl > 0) w += detail::linear_power_segment(profile.ls[i], profile.ls[i + 1],
                                                                  1.0, -1.0 / dl, alpha);
                }
                const double sig = w * profile.stderrs[ti][i];
                var_sum += sig * sig;
            }
        }
    }
    const double n_theta = static_cast<double>(profile.thetas.size());
    limit_cov_result res;
    res.alpha = alpha;
    res.value = fine_sum.value() / n_theta;
    res.method = limit_method::quadrature;
    res.error_estimate = std::abs(fine_sum.value() - coarse_sum.value()) / n_theta +
                         2.0 * std::sqrt(var_sum) / n_theta;
    return res;
}

/// Convenience overload: builds the profile (exact when the pair supports it).
inline limit_cov_result limit_cov(const compact_set& D, const compact_set& L, double alpha,
                                  std::size_t n_l = 384, int n_theta = 64,
                                  std::size_t mc_n = 200000, std::uint64_t seed = 1) {
    const bool exact = has_exact_covariogram(D, L);
    const auto profile =
        radial_profile(D, L, direction_grid(D.dim, n_theta), n_l,
                       exact ? profile_method::exact : profile_method::monte_carlo, mc_n, seed);
    return limit_cov(D, L, alpha, profile);
}

// ---------------------------------------------------------------------------
// finite-t normalized covariance (the proof identity)

struct finite_t_options {
    std::size_t n_l = 384;
    int n_theta = 64;
    std::optional<profile_method> method; // default: exact when available
    std::size_t mc_n = 200000;
    std::uint64_t seed = 1;
};

struct finite_t_result {
    double value = 0.0;
    double error_estimate = 0.0;
    double w_t = 0.0;
};

/// Cov( int_{tD} A, int_{tL} A ) / (t^d w_t) computed exactly through the
/// polar identity: w_t^{-1} omega_{d-1} int_0^h phibar(l) W(tl) dl with
/// phibar the theta-averaged -dg/dl and W(x) = int_0^x k(r) r^{d-1} dr.
/// W is reused across the l grid through one ascending prefix sweep;
/// oscillatory kernels get half-period subpanels.
inline finite_t_result normalized_cov_finite_t(const radial_kernel& ker, int d,
                                               const compact_set& D, const compact_set& L,
                                               double t, finite_t_options opt = {}) {
    require(t > 0.0, errc::invalid_argument, "normalized_cov_finite_t: t > 0");
    require(D.dim == d && L.dim == d, errc::dimension_mismatch,
            "normalized_cov_finite_t: set dimension mismatch");
    const bool exact = opt.method ? (*opt.method == profile_method::exact)
                                  : has_exact_covariogram(D, L);
    if (exact)
        require(has_exact_covariogram(D, L), errc::unsupported,
                "normalized_cov_finite_t: exact profile requested for unsupported pair");
    const auto profile =
        radial_profile(D, L, direction_grid(d, opt.n_theta), opt.n_l,
                       exact ? profile_method::exact : profile_method::monte_carlo, opt.mc_n,
                       opt.seed);

    const std::size_t m = profile.ls.size();
    const double n_theta = static_cast<double>(profile.thetas.size());
    std::vector<double> phibar(m, 0.0), sigbar(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0, v = 0.0;
        for (std::size_t ti = 0; ti < profile.thetas.size(); ++ti) {
            s += profile.derivs[ti][i];
            v += profile.stderrs[ti][i] * profile.stderrs[ti][i];
        }
        phibar[i] = s / n_theta;
        sigbar[i] = std::sqrt(v) / n_theta;
    }

    // subpanel node layout: per subpanel the sorted union of GL4 and GL2 nodes
    static const double loc[6] = {-0.8611363115940526, -0.5773502691896257,
                                  -0.3399810435848563, 0.3399810435848563,
                                  0.5773502691896257,  0.8611363115940526};
    static const double w4[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                 0.3478548451374538};
    static const int i4[4] = {0, 2, 3, 5};
    static const int i2[2] = {1, 4};

    struct subpanel {
        double a, b;
        std::size_t seg;
        std::size_t node_base;
    };
    std::vector<subpanel> panels;
    std::vector<double> nodes_l;
    for (std::size_t i = 0; i + 1 < m; ++i) {
        const double a = profile.ls[i], b = profile.ls[i + 1];
        if (b <= a) continue;
        std::size_t nsub = 2;
        if (ker.oscillatory) {
            const double span = t * (b - a);
            nsub = std::min<std::size_t>(
                200000, std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(span / pi))));
        }
        for (std::size_t s = 0; s < nsub; ++s) {
            const double pa = a + (b - a) * static_cast<double>(s) / nsub;
            const double pb = a + (b - a) * static_cast<double>(s + 1) / nsub;
            panels.push_back({pa, pb, i, nodes_l.size()});
            const double mid = 0.5 * (pa + pb), hw = 0.5 * (pb - pa);
            for (double x : loc) nodes_l.push_back(mid + hw * x);
        }
    }

    // one ascending prefix sweep over t*l nodes plus t itself
    std::vector<double> W(nodes_l.size(), 0.0);
    double W_t = 0.0;
    if (ker.has_prefix(d)) {
        for (std::size_t j = 0; j < nodes_l.size(); ++j) W[j] = ker.prefix(d, t * nodes_l[j]);
        W_t = ker.prefix(d, t);
    } else {
        prefix_integrator pre([&, d](double r) { return ker.k(r) * std::pow(r, d - 1); },
                              ker.oscillatory);
        std::size_t j = 0;
        bool t_done = false;
        while (j < nodes_l.size()) {
            const double x = t * nodes_l[j];
            if (!t_done && t <= x) {
                W_t = pre.advance_to(t);
                t_done = true;
            }
            W[j] = pre.advance_to(x);
            ++j;
        }
        if (!t_done) W_t = pre.advance_to(t);
    }

    const double omega = sphere_surface(d);
    const double wt = omega * W_t;
    require(std::abs(wt) > 1e-12 * std::abs(ker.k0) * std::pow(t, d), errc::invalid_argument,
            "normalized_cov_finite_t: w_t nearly cancels; normalization unstable");

    auto phi_at = [&](std::size_t seg, double l) {
        const double a = profile.ls[seg], b = profile.ls[seg + 1];
        const double w = (l - a) / (b - a);
        return (1.0 - w) * phibar[seg] + w * phibar[seg + 1];
    };
    kahan_sum integral;
    double quad_err = 0.0;
    for (const auto& p : panels) {
        const double hw = 0.5 * (p.b - p.a);
        double g4 = 0.0;
        for (int q = 0; q < 4; ++q) {
            const std::size_t j = p.node_base + i4[q];
            g4 += w4[q] * phi_at(p.seg, nodes_l[j]) * W[j];
        }
        double g2 = 0.0;
        for (int q = 0; q < 2; ++q) {
            const std::size_t j = p.node_base + i2[q];
            g2 += phi_at(p.seg, nodes_l[j]) * W[j];
        }
        integral.add(hw * g4);
        quad_err += hw * std::abs(g4 - g2);
    }

    // stderr of the theta-averaged derivative, propagated with trapezoid hats
    double var_sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        if (sigbar[i] == 0.0) continue;
        const double left = i > 0 ? profile.ls[i] - profile.ls[i - 1] : 0.0;
        const double right = i + 1 < m ? profile.ls[i + 1] - profile.ls[i] : 0.0;
        const double w = 0.5 * (left + right) * std::abs(W_t); // |W(tl)| <= ~|W_t| heuristic scale
        var_sum += (w * sigbar[i]) * (w * sigbar[i]);
    }

    finite_t_result res;
    res.w_t = wt;
    res.value = omega * integral.value() / wt;
    res.error_estimate = (omega * quad_err + 2.0 * omega * std::sqrt(var_sum)) / std::abs(wt);
    return res;
}

/// Case-2 entry point for non-radial kernels: D and L must be concentric
/// balls; K is reduced to its angular average and the radial path is reused
/// with a single direction (the profile is rotation invariant).
inline finite_t_result
normalized_cov_finite_t_general(const std::function<double(const std::vector<double>&)>& K, int d,
                                const compact_set& D, const compact_set& L, double t,
                                finite_t_options opt = {}, int n_theta_avg = 64) {
    require(d == 2, errc::unsupported, "general-kernel finite-t covariance: d = 2 only");
    require(D.kind == shape_kind::ball && L.kind == shape_kind::ball, errc::unsupported,
            "non-radial kernels require concentric balls (Case 2 geometry)");
    for (int i = 0; i < d; ++i)
        require(std::abs(D.center[i] - L.center[i]) <= 1e-12, errc::unsupported,
                "non-radial kernels require concentric balls (Case 2 geometry)");
    std::vector<std::vector<double>> dirs;
    for (int k = 0; k < n_theta_avg; ++k) {
        const double a = 2.0 * pi * k / n_theta_avg;
        dirs.push_back({std::cos(a), std::sin(a)});
    }
    radial_kernel kbar;
    kbar.name = "theta_avg";
    kbar.k = [K, dirs](double r) {
        kahan_sum s;
        std::vector<double> x(2);
        for (const auto& th : dirs) {
            x[0] = r * th[0];
            x[1] = r * th[1];
            s.add(K(x));
        }
        return s.value() / static_cast<double>(dirs.size());
    };
    kbar.k0 = kbar.k(0.0);
    opt.n_theta = 1; // profile of concentric balls is theta independent
    return normalized_cov_finite_t(kbar, d, D, L, t, opt);
}

} // namespace setcov
