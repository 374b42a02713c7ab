#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "setcov/common.hpp"
#include "setcov/kernels.hpp"
#include "setcov/quadrature.hpp"

namespace setcov {

/// Probabilists' Hermite polynomial H_q(x); E[H_q H_r] = q! delta_qr under
/// the standard Gaussian measure.
inline double hermite_eval(int q, double x) {
    require(q >= 0, errc::invalid_argument, "hermite_eval: q >= 0");
    if (q == 0) return 1.0;
    double hm = 1.0, h = x;
    for (int k = 1; k < q; ++k) {
        const double hp = x * h - k * hm;
        hm = h;
        h = hp;
    }
    return h;
}

struct gauss_hermite_rule {
    std::vector<double> x; // nodes
    std::vector<double> w; // weights w.r.t. the standard Gaussian measure; sum() == 1
};

namespace detail {

/// Eigenvalues and first eigenvector components of a symmetric tridiagonal
/// matrix (implicit-shift QL), the Golub-Welsch workhorse.
inline void tridiag_ql(std::vector<double>& d, std::vector<double>& e, std::vector<double>& z) {
    const int n = static_cast<int>(d.size());
    e.resize(n, 0.0);
    for (int l = 0; l < n; ++l) {
        int iter = 0;
        int m;
        do {
            for (m = l; m < n - 1; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= 1e-15 * dd) break;
            }
            if (m != l) {
                require(iter++ < 64, errc::quadrature_failure, "tridiag_ql: no convergence");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
                double s = 1.0, c = 1.0, p = 0.0;
                for (int i = m - 1; i >= l; --i) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    f = z[i + 1];
                    z[i + 1] = s * z[i] + c * f;
                    z[i] = c * z[i] - s * f;
                }
                if (r == 0.0 && m - 1 >= l) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
}

} // namespace detail

/// Gauss-Hermite rule for the probabilists' weight, computed by Golub-Welsch
/// and cached per order.
inline const gauss_hermite_rule& gauss_hermite(int order) {
    require(order >= 2 && order <= 512, errc::invalid_argument,
            "gauss_hermite: order in [2,512]");
    static std::map<int, gauss_hermite_rule> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(order);
    if (it != cache.end()) return it->second;

    std::vector<double> d(order, 0.0), e(order, 0.0), z(order, 0.0);
    for (int i = 0; i + 1 < order; ++i) e[i] = std::sqrt(static_cast<double>(i + 1));
    z[0] = 1.0;
    detail::tridiag_ql(d, e, z);

    std::vector<int> idx(order);
    for (int i = 0; i < order; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int i, int j) { return d[i] < d[j]; });
    gauss_hermite_rule rule;
    rule.x.resize(order);
    rule.w.resize(order);
    for (int i = 0; i < order; ++i) {
        rule.x[i] = d[idx[i]];
        rule.w[i] = z[idx[i]] * z[idx[i]];
    }
    return cache.emplace(order, std::move(rule)).first->second;
}

/// Truncated Hermite expansion of a centered square-integrable transform.
struct hermite_expansion {
    std::vector<double> a; // a[q], q = 0..q_max; a[0] forced to 0
    int q_max = 0;
    int rank = 0;            // min q >= 1 with |a_q| above the rank tolerance
    double l2_norm2 = 0.0;   // E[phi^2] under the Gaussian measure
    double tail_bound = 0.0; // l2_norm2 - sum_{q<=q_max} q! a_q^2 (clamped at 0)
    double parseval_defect = 0.0;
    bool parseval_warning = false;

    double coeff(int q) const {
        return (q >= 0 && q <= q_max) ? a[static_cast<std::size_t>(q)] : 0.0;
    }
    double coeff_mass() const { // sum q! a_q^2 over kept terms
        double s = 0.0, fact = 1.0;
        for (int q = 1; q <= q_max; ++q) {
            fact *= q;
            s += fact * a[q] * a[q];
        }
        return s;
    }
};

/// Expansion coefficients a_q = E[phi H_q]/q! by Gauss-Hermite quadrature.
/// phi is centered by subtracting its quadrature mean before projecting.
inline hermite_expansion hermite_coeffs(const std::function<double(double)>& phi, int q_max = 16,
                                        int order = 0, double tail_tolerance = 1e-8) {
    require(q_max >= 1, errc::invalid_argument, "hermite_coeffs: q_max >= 1");
    if (order == 0) order = std::max(4 * q_max, 40);
    require(order >= 4 * q_max, errc::invalid_argument, "hermite_coeffs: order >= 4*q_max");
    const auto& rule = gauss_hermite(order);
    const int n = static_cast<int>(rule.x.size());

    std::vector<double> fx(n);
    kahan_sum mean;
    for (int i = 0; i < n; ++i) {
        fx[i] = phi(rule.x[i]);
        mean.add(rule.w[i] * fx[i]);
    }
    for (int i = 0; i < n; ++i) fx[i] -= mean.value();

    hermite_expansion exp;
    exp.q_max = q_max;
    exp.a.assign(q_max + 1, 0.0);
    double fact = 1.0;
    for (int q = 1; q <= q_max; ++q) {
        fact *= q;
        kahan_sum s;
        for (int i = 0; i < n; ++i) s.add(rule.w[i] * fx[i] * hermite_eval(q, rule.x[i]));
        exp.a[q] = s.value() / fact;
    }
    kahan_sum l2;
    for (int i = 0; i < n; ++i) l2.add(rule.w[i] * fx[i] * fx[i]);
    exp.l2_norm2 = l2.value();
    exp.parseval_defect = exp.l2_norm2 - exp.coeff_mass();
    exp.tail_bound = std::max(exp.parseval_defect, 0.0);
    exp.parseval_warning = exp.parseval_defect > tail_tolerance * std::max(exp.l2_norm2, 1.0);

    const double rank_tol = 1e-10 * std::sqrt(std::max(exp.l2_norm2, 0.0));
    exp.rank = 0;
    for (int q = 1; q <= q_max; ++q) {
        if (std::abs(exp.a[q]) > rank_tol) {
            exp.rank = q;
            break;
        }
    }
    require(exp.rank >= 1, errc::invalid_argument,
            "hermite_coeffs: phi is numerically constant (no nonzero coefficient)");
    for (int q = 1; q < exp.rank; ++q) exp.a[q] = 0.0;
    return exp;
}

/// Expansion with exactly the given coefficients (no quadrature).
inline hermite_expansion expansion_from_coeffs(const std::map<int, double>& coeffs,
                                               int q_max = 16) {
    hermite_expansion exp;
    for (const auto& [q, _] : coeffs) {
        require(q >= 1, errc::invalid_argument, "coefficients start at q = 1");
        q_max = std::max(q_max, q);
    }
    exp.q_max = q_max;
    exp.a.assign(q_max + 1, 0.0);
    for (const auto& [q, v] : coeffs) exp.a[q] = v;
    exp.l2_norm2 = exp.coeff_mass();
    exp.rank = 0;
    for (int q = 1; q <= q_max; ++q)
        if (exp.a[q] != 0.0) {
            exp.rank = q;
            break;
        }
    require(exp.rank >= 1, errc::invalid_argument, "need at least one nonzero coefficient");
    return exp;
}

struct composed_value {
    double value = 0.0;
    double tail_bound = 0.0;
};

/// K(z) = sum_{q=R}^{q_max} q! a_q^2 C(z)^q with tail bound
/// |C|^{q_max+1} * l2_norm2.
inline composed_value composed_covariance(const hermite_expansion& exp, double c) {
    require(std::abs(c) <= 1.0 + 1e-12, errc::invalid_argument,
            "composed_covariance: |C(z)| must be <= 1");
    c = std::clamp(c, -1.0, 1.0);
    double fact = 1.0, cq = 1.0;
    kahan_sum s;
    for (int q = 1; q <= exp.q_max; ++q) {
        fact *= q;
        cq *= c;
        if (exp.a[q] != 0.0) s.add(fact * exp.a[q] * exp.a[q] * cq);
    }
    return {s.value(), std::pow(std::abs(c), exp.q_max + 1) * exp.l2_norm2};
}

/// w_{q,t} = q! * omega_{d-1} * int_0^t C(r)^q r^{d-1} dr.
inline quad_result wq(const radial_kernel& base_corr, int d, int q, double t) {
    require(q >= 1, errc::invalid_argument, "wq: q >= 1");
    require(t >= 0.0, errc::invalid_argument, "wq: t >= 0");
    double fact = 1.0;
    for (int i = 2; i <= q; ++i) fact *= i;
    const double scale_ = fact * sphere_surface(d);
    if (q == 1 && base_corr.has_prefix(d)) return {scale_ * base_corr.prefix(d, t), 0.0};
    auto f = [&](double r) { return std::pow(base_corr.k(r), q) * std::pow(r, d - 1); };
    const quad_result qr = base_corr.oscillatory
                               ? oscillatory_integrate(f, 0.0, t)
                               : adaptive_integrate(f, 0.0, t, 1e-12, 1e-11);
    return {scale_ * qr.value, scale_ * qr.error};
}

/// w_{q,t} on an ascending t grid via one quadrature sweep.
inline std::vector<double> wq_sweep(const radial_kernel& base_corr, int d, int q,
                                    const std::vector<double>& ts) {
    double fact = 1.0;
    for (int i = 2; i <= q; ++i) fact *= i;
    const double scale_ = fact * sphere_surface(d);
    prefix_integrator pre(
        [&, q, d](double r) { return std::pow(base_corr.k(r), q) * std::pow(r, d - 1); },
        base_corr.oscillatory);
    std::vector<double> out;
    out.reserve(ts.size());
    for (double t : ts) out.push_back(scale_ * pre.advance_to(t));
    return out;
}

struct wt_bounds {
    double value = 0.0;
    double tail_abs = 0.0; // bound on the dropped q > q_max contribution
};

/// w_t = sum_{q=R}^{q_max} a_q^2 w_{q,t} plus a tail interval obtained from
/// the |C|^{q_max+1} envelope.
inline wt_bounds wt_composed(const hermite_expansion& exp, const radial_kernel& base_corr, int d,
                             double t) {
    kahan_sum s;
    for (int q = exp.rank; q <= exp.q_max; ++q) {
        if (exp.a[q] == 0.0) continue;
        s.add(exp.a[q] * exp.a[q] * wq(base_corr, d, q, t).value);
    }
    double tail = 0.0;
    if (exp.tail_bound > 0.0) {
        auto f = [&](double r) {
            return std::pow(std::abs(base_corr.k(r)), exp.q_max + 1) * std::pow(r, d - 1);
        };
        const quad_result env = base_corr.oscillatory
                                    ? oscillatory_integrate(f, 0.0, t)
                                    : adaptive_integrate(f, 0.0, t, 1e-12, 1e-10);
        tail = exp.tail_bound * sphere_surface(d) * env.value;
    }
    return {s.value(), tail};
}

/// Radial kernel K(r) = sum q! a_q^2 C(r)^q for a composed model.
inline radial_kernel make_composed_kernel(const hermite_expansion& exp,
                                          const radial_kernel& base_corr) {
    radial_kernel ker;
    ker.name = "hermite(" + base_corr.name + ",R=" + std::to_string(exp.rank) + ")";
    ker.k = [exp, base = base_corr.k](double r) {
        return composed_covariance(exp, base(r)).value;
    };
    ker.k0 = exp.coeff_mass();
    ker.oscillatory = base_corr.oscillatory;
    const int rank = exp.rank;
    if (base_corr.name == "berry_j0") {
        // rates: w_{2,t} ~ c t, w_{4,t} ~ c log t, w_{q,t} ~ c for q=3, q>=5;
        // rank 1 dominates with a non-regularly-varying term.
        if (rank >= 2)
            ker.known_alpha = [rank](int d) {
                return d == 2 ? std::optional<double>(rank == 2 ? 1.0 : 0.0) : std::nullopt;
            };
    } else {
        ker.known_alpha = [rank, base_alpha = base_corr.known_alpha](int d) -> std::optional<double> {
            // base correlation regularly varying with index -beta gives
            // K ~ C^R with index -R beta and alpha = d - R beta
            const auto ba = base_alpha(d);
            if (!ba) return std::nullopt;
            const double beta = d - *ba;
            if (beta <= 0.0) return std::nullopt;
            const double alpha = d - rank * beta;
            if (alpha <= -1.0 || alpha > d) return std::nullopt;
            return alpha;
        };
    }
    return ker;
}

/// Named nonlinear transform with its expansion: "hermite:q=N",
/// "abs_centered", "sign", "cubic".
struct phi_spec {
    std::string name;
    std::function<double(double)> fn;
    hermite_expansion expansion;
};

inline phi_spec make_phi(const std::string& spec, int q_max = 16) {
    phi_spec p;
    p.name = spec;
    if (spec.rfind("hermite:q=", 0) == 0) {
        const int q = std::stoi(spec.substr(10));
        require(q >= 1 && q <= 30, errc::config_error, "phi hermite:q out of range");
        p.fn = [q](double x) { return hermite_eval(q, x); };
        p.expansion = expansion_from_coeffs({{q, 1.0}}, std::max(q_max, q));
        return p;
    }
    if (spec == "abs_centered") {
        const double c = std::sqrt(2.0 / pi);
        p.fn = [c](double x) { return std::abs(x) - c; };
        p.expansion = hermite_coeffs(p.fn, q_max, 200);
        return p;
    }
    if (spec == "sign") {
        p.fn = [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); };
        p.expansion = hermite_coeffs(p.fn, q_max, 200);
        return p;
    }
    if (spec == "cubic") {
        p.fn = [](double x) { return x * x * x; };
        p.expansion = hermite_coeffs(p.fn, q_max, 200);
        return p;
    }
    fail(errc::config_error, "unknown phi spec: " + spec);
}

inline phi_spec make_phi_from_coeffs(const std::map<int, double>& coeffs, int q_max = 16) {
    phi_spec p;
    p.name = "coeffs";
    p.expansion = expansion_from_coeffs(coeffs, q_max);
    const auto exp = p.expansion;
    p.fn = [exp](double x) {
        double s = 0.0;
        for (int q = 1; q <= exp.q_max; ++q)
            if (exp.a[q] != 0.0) s += exp.a[q] * hermite_eval(q, x);
        return s;
    };
    return p;
}

} // namespace setcov
