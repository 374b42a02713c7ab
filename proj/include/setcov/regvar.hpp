#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "setcov/common.hpp"
#include "setcov/kernels.hpp"
#include "setcov/quadrature.hpp"
#include "setcov/rng.hpp"

namespace setcov {

/// w_t = int_{|z|<=t} K(z) dz = omega_{d-1} int_0^t k(r) r^{d-1} dr for a
/// radial kernel.  Uses the kernel's closed-form prefix when it has one,
/// half-period panels for oscillatory kernels, adaptive panels otherwise.
inline quad_result wt_radial(const radial_kernel& ker, int d, double t) {
    require(t >= 0.0, errc::invalid_argument, "wt_radial: t >= 0");
    const double omega = sphere_surface(d);
    if (ker.has_prefix(d)) return {omega * ker.prefix(d, t), 0.0};
    auto f = [&](double r) { return ker.k(r) * std::pow(r, d - 1); };
    const quad_result q = ker.oscillatory ? oscillatory_integrate(f, 0.0, t)
                                          : adaptive_integrate(f, 0.0, t, 1e-12, 1e-11);
    return {omega * q.value, omega * q.error};
}

/// w_t on an ascending grid of t values, one quadrature sweep.
inline std::vector<double> wt_radial_sweep(const radial_kernel& ker, int d,
                                           const std::vector<double>& ts) {
    const double omega = sphere_surface(d);
    std::vector<double> out;
    out.reserve(ts.size());
    if (ker.has_prefix(d)) {
        for (double t : ts) out.push_back(omega * ker.prefix(d, t));
        return out;
    }
    prefix_integrator pre([&, d](double r) { return ker.k(r) * std::pow(r, d - 1); },
                          ker.oscillatory);
    for (double t : ts) out.push_back(omega * pre.advance_to(t));
    return out;
}

struct wt_mc_estimate {
    double value = 0.0;
    double stderr_ = 0.0;
};

/// Monte-Carlo w_t for a general (possibly non-radial) kernel: ball-volume
/// times the mean of K over uniform draws from the ball of radius t.
/// Deterministic given (seed, chunk layout).
inline wt_mc_estimate wt_general(const std::function<double(const std::vector<double>&)>& K,
                                 int d, double t, std::size_t n, std::uint64_t seed) {
    require(d >= 1 && d <= 3, errc::unsupported, "wt_general: d <= 3");
    require(n >= 10000, errc::invalid_argument, "wt_general: n >= 1e4 required");
    require(t > 0.0, errc::invalid_argument, "wt_general: t > 0");
    const double vol = unit_ball_volume(d) * std::pow(t, d);
    const std::size_t chunks = 64;
    const std::size_t per = n / chunks;
    kahan_sum s1, s2;
    std::size_t total = 0;
    std::vector<double> x(d);
    for (std::size_t c = 0; c < chunks; ++c) {
        counter_rng rng(seed, c);
        for (std::size_t i = 0; i < per; ++i) {
            double n2 = 0.0;
            for (int j = 0; j < d; ++j) {
                x[j] = rng.next_normal();
                n2 += x[j] * x[j];
            }
            const double r = t * std::pow(rng.next_uniform(), 1.0 / d);
            const double sc = n2 > 0.0 ? r / std::sqrt(n2) : 0.0;
            for (int j = 0; j < d; ++j) x[j] *= sc;
            const double v = K(x);
            s1.add(v);
            s2.add(v * v);
            ++total;
        }
    }
    const double mean = s1.value() / total;
    const double var = std::max(0.0, s2.value() / total - mean * mean);
    return {vol * mean, vol * std::sqrt(var / total)};
}

/// Regular-variation index fit from (t, w_t) samples.
struct regvar_fit {
    bool eventually_positive = false;
    std::optional<double> alpha;
    double fit_t_lo = 0.0, fit_t_hi = 0.0;
    double slope_stderr = 0.0;
    double residual_max = 0.0;
    std::optional<double> karamata_alpha; // doubling-ratio estimate
    bool karamata_agrees = false;
    std::vector<std::pair<double, double>> slowly_varying_samples; // (t, w_t t^-alpha)
    std::string diagnosis;

    /// Downstream refusal contract: consumers must call this, never read
    /// alpha around a failed fit.
    double require_alpha() const {
        if (!eventually_positive || !alpha)
            fail(errc::not_regularly_varying, "regular-variation fit rejected: " + diagnosis);
        return *alpha;
    }
};

/// Least-squares index estimate on the top half of the log-t range, with
/// eventual-positivity screening on the top decade and a doubling-ratio
/// (Karamata) cross-estimate.
inline regvar_fit fit_rv_index(std::vector<std::pair<double, double>> samples) {
    require(samples.size() >= 8, errc::invalid_argument, "fit_rv_index: need >= 8 samples");
    std::sort(samples.begin(), samples.end());
    for (std::size_t i = 1; i < samples.size(); ++i)
        require(samples[i].first > samples[i - 1].first, errc::invalid_argument,
                "fit_rv_index: t values must be distinct");
    const double t_min = samples.front().first, t_max = samples.back().first;
    require(t_min > 0.0, errc::invalid_argument, "fit_rv_index: t must be positive");
    require(t_max / t_min >= 99.0, errc::invalid_argument,
            "fit_rv_index: samples must span >= 2 decades");

    regvar_fit fit;
    // eventual positivity on the top decade
    for (const auto& [t, w] : samples) {
        if (t >= t_max / 10.0 && w <= 0.0) {
            fit.eventually_positive = false;
            fit.diagnosis = "not regularly varying (sign changes in the top decade, w(" +
                            std::to_string(t) + ") = " + std::to_string(w) + ")";
            return fit;
        }
    }
    fit.eventually_positive = true;

    const double log_mid = 0.5 * (std::log(t_min) + std::log(t_max));
    std::vector<std::pair<double, double>> window; // (log t, log w)
    for (const auto& [t, w] : samples) {
        if (std::log(t) < log_mid) continue;
        if (w <= 0.0) {
            fit.eventually_positive = false;
            fit.diagnosis = "not regularly varying (nonpositive w inside the fit window)";
            return fit;
        }
        window.push_back({std::log(t), std::log(w)});
    }
    require(window.size() >= 4, errc::invalid_argument, "fit_rv_index: fit window too small");

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto& [x, y] : window) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = static_cast<double>(window.size());
    const double denom = n * sxx - sx * sx;
    const double slope = (n * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / n;
    double ss = 0.0;
    for (auto& [x, y] : window) {
        const double r = y - (intercept + slope * x);
        ss += r * r;
        fit.residual_max = std::max(fit.residual_max, std::abs(r));
    }
    fit.alpha = slope;
    fit.fit_t_lo = std::exp(window.front().first);
    fit.fit_t_hi = std::exp(window.back().first);
    fit.slope_stderr =
        n > 2 ? std::sqrt(ss / (n - 2.0)) * std::sqrt(n / std::max(denom, 1e-300)) : 0.0;

    // doubling-ratio estimate on the last (up to) 5 usable doublings
    std::vector<double> doublings;
    for (std::size_t j = samples.size(); j-- > 0;) {
        if (std::log(samples[j].first) < log_mid) break;
        for (std::size_t i = j; i-- > 0;) {
            const double ratio = samples[j].first / samples[i].first;
            if (ratio > 2.05) break;
            if (ratio >= 1.95 && samples[i].second > 0.0 && samples[j].second > 0.0) {
                doublings.push_back(std::log(samples[j].second / samples[i].second) /
                                    std::log(ratio));
                break;
            }
        }
        if (doublings.size() >= 5) break;
    }
    if (!doublings.empty()) {
        double m = 0.0;
        for (double v : doublings) m += v;
        fit.karamata_alpha = m / doublings.size();
        fit.karamata_agrees = std::abs(*fit.karamata_alpha - slope) <= 0.05;
    }
    for (const auto& [t, w] : samples)
        if (std::log(t) >= log_mid)
            fit.slowly_varying_samples.push_back({t, w * std::pow(t, -slope)});
    fit.diagnosis = "regularly varying, alpha = " + std::to_string(slope);
    return fit;
}

// ---------------------------------------------------------------------------
// Potter bounds

/// Batch sampler contract: given ascending t values, return w_t for each.
using wt_batch_sampler = std::function<std::vector<double>(const std::vector<double>&)>;

inline wt_batch_sampler batch_from_pointwise(std::function<double(double)> w) {
    return [w = std::move(w)](const std::vector<double>& ts) {
        std::vector<double> out;
        out.reserve(ts.size());
        for (double t : ts) out.push_back(w(t));
        return out;
    };
}

inline wt_batch_sampler batch_from_kernel(radial_kernel ker, int d) {
    return [ker = std::move(ker), d](const std::vector<double>& ts) {
        return wt_radial_sweep(ker, d, ts);
    };
}

struct potter_grid {
    std::vector<double> ls; // scale factors l
    std::vector<double> ts; // base points t
    double x_min = 1.0;     // dyadic X candidates x_min * 2^j
    double x_max = 16384.0;
};

inline potter_grid default_potter_grid(double t_max = 1e6, double t_min = 1.0) {
    potter_grid g;
    for (int i = 0; i <= 48; ++i) g.ls.push_back(std::pow(10.0, -2.0 + 4.0 * i / 48.0));
    const int per_decade = 96;
    const int decades = static_cast<int>(std::ceil(std::log10(t_max / t_min)));
    for (int i = 0; i <= per_decade * decades; ++i) {
        const double t = t_min * std::pow(10.0, static_cast<double>(i) / per_decade);
        if (t <= t_max) g.ts.push_back(t);
    }
    g.x_max = t_max / 64.0;
    return g;
}

/// Potter certificate: the smallest dyadic X such that
/// |w_{lt}/w_t| <= A max(l^{alpha+delta}, l^{alpha-delta}) holds on every
/// sampled (l,t) with t > X, l > X/t.
struct potter_certificate {
    double A = 0.0, delta = 0.0, X = 0.0;
    double margin = 0.0; // min over checked points of bound - |ratio|
    std::size_t checked = 0;
};

inline potter_certificate potter_certify(const wt_batch_sampler& sampler, double alpha, double A,
                                         double delta, const potter_grid& grid) {
    require(A > 1.0, errc::invalid_argument, "potter_certify: A > 1");
    require(delta > 0.0, errc::invalid_argument, "potter_certify: delta > 0");
    require(!grid.ls.empty() && !grid.ts.empty(), errc::invalid_argument,
            "potter_certify: empty grid");

    // one batched evaluation over all points the scan can touch
    std::vector<double> pts = grid.ts;
    for (double t : grid.ts)
        for (double l : grid.ls) pts.push_back(l * t);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const std::vector<double> vals = sampler(pts);
    auto w_at = [&](double x) {
        const auto it = std::lower_bound(pts.begin(), pts.end(), x);
        return vals[static_cast<std::size_t>(it - pts.begin())];
    };

    for (double X = grid.x_min; X <= grid.x_max * (1.0 + 1e-12); X *= 2.0) {
        double margin = std::numeric_limits<double>::infinity();
        std::size_t checked = 0;
        bool ok = true;
        for (double t : grid.ts) {
            if (!(t > X)) continue;
            const double wt = w_at(t);
            for (double l : grid.ls) {
                if (!(l > X / t)) continue;
                const double bound =
                    A * std::max(std::pow(l, alpha + delta), std::pow(l, alpha - delta));
                const double ratio = wt != 0.0 ? std::abs(w_at(l * t) / wt)
                                               : std::numeric_limits<double>::infinity();
                ++checked;
                if (!(ratio <= bound)) {
                    ok = false;
                    break;
                }
                margin = std::min(margin, bound - ratio);
            }
            if (!ok) break;
        }
        if (ok && checked > 0) return {A, delta, X, margin, checked};
    }
    fail(errc::not_regularly_varying,
         "potter_certify: no threshold X <= " + std::to_string(grid.x_max) +
             " satisfies the bound (alpha misfit or w not regularly varying)");
}

/// Refusal-contract overload: consumes a fit and refuses rejected ones.
inline potter_certificate potter_certify(const regvar_fit& fit, const wt_batch_sampler& sampler,
                                         double A, double delta, const potter_grid& grid) {
    return potter_certify(sampler, fit.require_alpha(), A, delta, grid);
}

// ---------------------------------------------------------------------------
// Corollary check: int_0^H |w_{lt}/w_t| dl -> H^{alpha+1}/(alpha+1)

struct coregvar_row {
    double t = 0.0;
    double integral = 0.0;
    double limit = 0.0;
    double abs_err = 0.0;
    double rel_err = 0.0;
    double quad_err = 0.0;
};

/// Integrates l -> |w_{lt}/w_t| over [0,H] on a graded composite rule
/// (batched, ascending evaluation points) and reports the error against the
/// Corollary limit for each t.
inline std::vector<coregvar_row> coregvar_check(const wt_batch_sampler& sampler, double alpha,
                                                double H, const std::vector<double>& t_list,
                                                std::size_t n_seg = 512) {
    require(alpha > -1.0, errc::invalid_argument, "coregvar_check: alpha > -1");
    require(H > 0.0, errc::invalid_argument, "coregvar_check: H > 0");
    // graded segment boundaries on [0,H]: geometric from H*1e-6
    std::vector<double> bounds;
    bounds.push_back(0.0);
    const double lmin = H * 1e-6;
    const double ratio = std::pow(H / lmin, 1.0 / static_cast<double>(n_seg - 1));
    for (std::size_t i = 0; i < n_seg; ++i)
        bounds.push_back(std::min(H, lmin * std::pow(ratio, static_cast<double>(i))));
    bounds.back() = H;

    const auto& rule = detail::gl8();
    std::vector<coregvar_row> rows;
    for (double t : t_list) {
        // all evaluation points for this t, ascending
        std::vector<double> pts;
        for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
            const double a = bounds[s], b = bounds[s + 1];
            for (int i = 0; i < rule.n; ++i)
                pts.push_back((0.5 * (a + b) + 0.5 * (b - a) * rule.x[i]) * t);
        }
        pts.push_back(t);
        std::sort(pts.begin(), pts.end());
        const std::vector<double> vals = sampler(pts);
        auto w_at = [&](double x) {
            const auto it = std::lower_bound(pts.begin(), pts.end(), x);
            return vals[static_cast<std::size_t>(it - pts.begin())];
        };
        const double wt = w_at(t);
        require(wt != 0.0, errc::invalid_argument,
                "coregvar_check: w_t vanishes at t = " + std::to_string(t));

        kahan_sum full, coarse;
        for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
            const double a = bounds[s], b = bounds[s + 1];
            const double hw = 0.5 * (b - a), mid = 0.5 * (a + b);
            kahan_sum seg;
            for (int i = 0; i < rule.n; ++i)
                seg.add(rule.w[i] * std::abs(w_at((mid + hw * rule.x[i]) * t) / wt));
            full.add(hw * seg.value());
            if (s % 2 == 0) {
                // reuse alternate segments scaled up as the coarse estimate
                coarse.add(2.0 * hw * seg.value());
            }
        }
        coregvar_row row;
        row.t = t;
        row.integral = full.value();
        row.limit = std::pow(H, alpha + 1.0) / (alpha + 1.0);
        row.abs_err = std::abs(row.integral - row.limit);
        row.rel_err = row.abs_err / std::abs(row.limit);
        row.quad_err = std::abs(full.value() - coarse.value());
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Spectral identity (d in {1,2})

/// |F[1_ball]|(s) for the unit centered ball: 2 sin(s)/s in d=1,
/// 2 pi J_1(s)/s in d=2.
inline double ball_indicator_ft(int d, double s) {
    if (d == 1) return s < 1e-8 ? 2.0 - s * s / 3.0 : 2.0 * std::sin(s) / s;
    require(d == 2, errc::unsupported, "ball_indicator_ft: d in {1,2}");
    return s < 1e-8 ? pi * (1.0 - s * s / 8.0) : 2.0 * pi * bessel_j1(s) / s;
}

struct spectral_wt {
    double value = 0.0;
    double tail_bound = 0.0;
    double r_max = 0.0;
};

/// w_t = t^d * psi_mass * int_0^inf f(r) F[1_ball](r t) dr for a spectral
/// measure f(|lambda|) |lambda|^{1-d} psi(lambda/|lambda|) d lambda.
/// Truncates at r_max chosen so the last two octave increments are below
/// `tail_tol` of the running value.
inline spectral_wt wt_from_spectral(const std::function<double(double)>& f, double psi_mass,
                                    int d, double t, double tail_tol = 1e-8,
                                    double r_max_cap = 1e6) {
    require(d == 1 || d == 2, errc::unsupported, "wt_from_spectral: d in {1,2}");
    require(t > 0.0, errc::invalid_argument, "wt_from_spectral: t > 0");
    auto g = [&](double r) { return f(r) * ball_indicator_ft(d, r * t); };
    double acc = adaptive_integrate(g, 0.0, 1.0, 1e-14, 1e-12, 48).value;
    double r_lo = 1.0, last = std::numeric_limits<double>::infinity(),
           prev = std::numeric_limits<double>::infinity();
    while (r_lo < r_max_cap) {
        const double r_hi = 2.0 * r_lo;
        const double inc = adaptive_integrate(g, r_lo, r_hi, 1e-14, 1e-12, 48).value;
        acc += inc;
        prev = last;
        last = std::abs(inc);
        r_lo = r_hi;
        if (std::max(prev, last) <= tail_tol * std::max(std::abs(acc), 1e-300)) break;
    }
    const double tail = std::max(prev, last);
    require(tail <= tail_tol * std::max(std::abs(acc), 1e-300) || acc == 0.0,
            errc::quadrature_failure, "wt_from_spectral: tail bound exceeds tolerance");
    spectral_wt out;
    out.value = std::pow(t, d) * psi_mass * acc;
    out.tail_bound = std::pow(t, d) * psi_mass * tail;
    out.r_max = r_lo;
    return out;
}

} // namespace setcov
