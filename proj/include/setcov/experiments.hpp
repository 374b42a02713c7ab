#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "setcov/config.hpp"
#include "setcov/fields.hpp"
#include "setcov/geometry.hpp"
#include "setcov/hermite.hpp"
#include "setcov/limitcov.hpp"
#include "setcov/regvar.hpp"
#include "setcov/stats.hpp"

namespace setcov {

struct report_row {
    std::string experiment;
    double t = std::numeric_limits<double>::quiet_NaN();
    std::string name;
    double empirical = std::numeric_limits<double>::quiet_NaN();
    double theoretical = std::numeric_limits<double>::quiet_NaN();
    double err_abs = std::numeric_limits<double>::quiet_NaN();
    double err_rel = std::numeric_limits<double>::quiet_NaN();
    double stderr_ = 0.0;
    std::string verdict; // "", "pass", "fail", "indeterminate"
    std::string source;  // operation that produced the theoretical column
};

inline report_row make_row(const std::string& exp, double t, const std::string& name,
                           double empirical, double theoretical, double stderr_,
                           const std::string& source, const std::string& verdict = "") {
    report_row r;
    r.experiment = exp;
    r.t = t;
    r.name = name;
    r.empirical = empirical;
    r.theoretical = theoretical;
    if (std::isfinite(theoretical)) {
        r.err_abs = std::abs(empirical - theoretical);
        r.err_rel = r.err_abs / std::max(std::abs(theoretical), 1e-300);
    }
    r.stderr_ = stderr_;
    r.source = source;
    r.verdict = verdict;
    return r;
}

struct experiment_report {
    std::string experiment;
    std::vector<report_row> rows;
    std::vector<std::pair<std::string, std::string>> verdicts; // name -> pass/fail/indeterminate
    double runtime_s = 0.0;
    std::string hash;
    json config;

    void add_verdict(const std::string& name, bool pass) {
        verdicts.push_back({name, pass ? "pass" : "fail"});
    }
    void add_indeterminate(const std::string& name) {
        verdicts.push_back({name, "indeterminate"});
    }

    /// 0 all pass, 2 any fail, 3 indeterminate-only (no fail, some indeterminate)
    int exit_code() const {
        bool any_fail = false, any_ind = false;
        for (const auto& [_, v] : verdicts) {
            if (v == "fail") any_fail = true;
            if (v == "indeterminate") any_ind = true;
        }
        if (any_fail) return 2;
        if (any_ind) return 3;
        return 0;
    }
};

namespace detail {
inline std::string fmt_g(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}
} // namespace detail

/// Fixed CSV schema: experiment,t,name,empirical,theoretical,err_abs,err_rel,
/// stderr,verdict.  The timestamp comment is the only line allowed to differ
/// between reruns of one config.
inline void write_report_csv(const experiment_report& rep, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), errc::config_error, "cannot write report CSV: " + path);
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char ts[64];
    std::strftime(ts, sizeof(ts), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    out << "# generated " << ts << "\n";
    out << "# config_hash " << rep.hash << "\n";
    out << "experiment,t,name,empirical,theoretical,err_abs,err_rel,stderr,verdict\n";
    for (const auto& r : rep.rows) {
        out << r.experiment << ',' << detail::fmt_g(r.t) << ',' << r.name << ','
            << detail::fmt_g(r.empirical) << ',' << detail::fmt_g(r.theoretical) << ','
            << detail::fmt_g(r.err_abs) << ',' << detail::fmt_g(r.err_rel) << ','
            << detail::fmt_g(r.stderr_) << ',' << r.verdict << "\n";
    }
    for (const auto& [name, v] : rep.verdicts) out << "verdict,," << name << ",,,,,," << v << "\n";
}

inline void write_report_json(const experiment_report& rep, const std::string& path) {
    json j;
    j["experiment"] = rep.experiment;
    j["config"] = rep.config;
    j["config_hash"] = rep.hash;
    j["runtime_s"] = rep.runtime_s;
    json rows = json::array();
    for (const auto& r : rep.rows) {
        json row;
        row["experiment"] = r.experiment;
        if (std::isfinite(r.t)) row["t"] = r.t;
        row["name"] = r.name;
        row["empirical"] = r.empirical;
        if (std::isfinite(r.theoretical)) {
            row["theoretical"] = r.theoretical;
            row["err_abs"] = r.err_abs;
            row["err_rel"] = r.err_rel;
        }
        row["stderr"] = r.stderr_;
        row["verdict"] = r.verdict;
        row["source"] = r.source;
        rows.push_back(row);
    }
    j["rows"] = rows;
    json verdicts = json::array();
    for (const auto& [name, v] : rep.verdicts) verdicts.push_back({{"name", name}, {"verdict", v}});
    j["verdicts"] = verdicts;
    std::ofstream out(path);
    require(out.good(), errc::config_error, "cannot write report JSON: " + path);
    out << j.dump(2) << "\n";
}

inline void write_profile_csv(const covariogram_profile& p, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), errc::config_error, "cannot write profile CSV: " + path);
    out << "theta_index,l,g,dg,stderr\n";
    for (std::size_t ti = 0; ti < p.thetas.size(); ++ti)
        for (std::size_t i = 0; i < p.ls.size(); ++i)
            out << ti << ',' << detail::fmt_g(p.ls[i]) << ',' << detail::fmt_g(p.values[ti][i])
                << ',' << detail::fmt_g(p.derivs[ti][i]) << ','
                << detail::fmt_g(p.stderrs[ti][i]) << "\n";
}

namespace detail {

class deadline {
public:
    explicit deadline(double budget_s)
        : end_(std::chrono::steady_clock::now() +
               std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                   std::chrono::duration<double>(budget_s > 0 ? budget_s : 1e9))) {}
    bool expired() const { return std::chrono::steady_clock::now() > end_; }

private:
    std::chrono::steady_clock::time_point end_;
};

/// quarter-octave grid t0 * 2^{k/4}; doubling pairs exist exactly.
inline std::vector<double> quarter_octave_grid(double t_lo, double t_hi) {
    std::vector<double> out;
    for (int k = 0;; ++k) {
        const double t = t_lo * std::pow(2.0, 0.25 * k);
        out.push_back(t);
        if (t >= t_hi) break;
    }
    return out;
}

inline double lslope(const std::vector<double>& xs, const std::vector<double>& ys) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace detail

// ---------------------------------------------------------------------------
// limit convergence

/// normalized_cov_finite_t over the t list against the theorem limit, with a
/// regvar screening gate: kernels whose w_t fit is rejected are refused.
inline experiment_report run_limit_convergence(const json& cfg) {
    const auto start = std::chrono::steady_clock::now();
    experiment_report rep;
    rep.experiment = "limit_convergence";
    rep.config = cfg;
    rep.hash = config_hash(cfg);

    const kernel_model model = parse_kernel_model(cfg.at("kernel"));
    const int d = static_cast<int>(cfg_num(cfg, "dim", 1));
    const compact_set D = parse_shape(cfg.at("D"));
    const compact_set L = parse_shape(cfg.at("L"));
    std::vector<double> t_list = cfg.at("t_list").get<std::vector<double>>();
    std::sort(t_list.begin(), t_list.end());
    detail::deadline dl(cfg_num(cfg, "time_budget_s", 0.0));

    // regvar gate
    const double fit_hi = cfg_num(cfg, "fit_t_max",
                                  model.kernel.has_prefix(d) ? 1048576.0
                                                             : std::max(1024.0, 2.0 * t_list.back()));
    const auto grid = detail::quarter_octave_grid(1.0, fit_hi);
    const auto ws = wt_radial_sweep(model.kernel, d, grid);
    std::vector<std::pair<double, double>> samples;
    for (std::size_t i = 0; i < grid.size(); ++i) samples.push_back({grid[i], ws[i]});
    const regvar_fit fit = fit_rv_index(samples);
    const double alpha_fit = fit.require_alpha(); // throws the structured refusal
    const auto known = model.kernel.known_alpha(d);
    const double alpha = known.value_or(alpha_fit);
    rep.rows.push_back(make_row(rep.experiment, fit_hi, "alpha_fit", alpha_fit, alpha,
                                fit.slope_stderr, known ? "kernel metadata" : "fit_rv_index"));

    // limit value
    double limit;
    std::string source;
    const bool anchored_intervals = D.kind == shape_kind::interval &&
                                    L.kind == shape_kind::interval && std::abs(D.a) < 1e-12 &&
                                    std::abs(L.a) < 1e-12;
    const std::size_t n_l = cfg_size(cfg, "n_l", 384);
    const int n_theta = static_cast<int>(cfg_num(cfg, "n_theta", 64));
    if (anchored_intervals) {
        limit = limit_cov_interval(D.b, L.b, alpha);
        source = "limit_cov_interval";
    } else if (std::abs(alpha) < 1e-12) {
        limit = limit_cov_alpha0(D, L).value;
        source = "limit_cov_alpha0";
    } else {
        limit = limit_cov(D, L, alpha, n_l, n_theta).value;
        source = "limit_cov";
    }

    finite_t_options opt;
    opt.n_l = n_l;
    opt.n_theta = n_theta;
    opt.seed = static_cast<std::uint64_t>(cfg_num(cfg, "seed", 1));
    std::vector<double> errs;
    for (double t : t_list) {
        if (dl.expired()) {
            rep.add_indeterminate("time budget exhausted before t=" + detail::fmt_g(t));
            break;
        }
        const auto r = normalized_cov_finite_t(model.kernel, d, D, L, t, opt);
        rep.rows.push_back(make_row(rep.experiment, t, "normalized_cov_finite_t", r.value, limit,
                                    r.error_estimate, source));
        errs.push_back(std::abs(r.value - limit));
    }
    if (errs.size() == t_list.size() && !errs.empty()) {
        const double tol = cfg_tol(cfg, "rel_err", 0.02);
        rep.add_verdict("final relative error <= " + detail::fmt_g(tol),
                        errs.back() <= tol * std::abs(limit));
        if (errs.size() >= 2)
            rep.add_verdict("error at max t below error at min t", errs.back() < errs.front());
    }
    rep.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

// ---------------------------------------------------------------------------
// Berry rates

inline experiment_report run_berry_rates(const json& cfg) {
    const auto start = std::chrono::steady_clock::now();
    experiment_report rep;
    rep.experiment = "berry_rates";
    rep.config = cfg;
    rep.hash = config_hash(cfg);

    const radial_kernel berry = make_berry_kernel();
    const int d = 2;
    const double t_lo = cfg_num(cfg, "t_min", 10.0);
    const double t_hi = cfg_num(cfg, "t_max", 1000.0);
    require(t_lo >= 1.0 && t_hi >= 500.0, errc::config_error,
            "berry rates: t range should span [10, >=500]");

    // quarter-octave grid with the checkpoints the verdicts need
    std::vector<double> grid = detail::quarter_octave_grid(t_lo, t_hi);
    for (double t : {50.0, 200.0, 500.0, 1000.0})
        if (t >= t_lo && t <= t_hi * 2.0) grid.push_back(t);
    grid.push_back(2.0 * 500.0);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    std::map<int, std::vector<double>> wq_by_q;
    for (int q = 1; q <= 5; ++q) {
        wq_by_q[q] = wq_sweep(berry, d, q, grid);
        for (std::size_t i = 0; i < grid.size(); ++i)
            rep.rows.push_back(make_row(rep.experiment, grid[i], "w_q[q=" + std::to_string(q) + "]",
                                        wq_by_q[q][i], std::numeric_limits<double>::quiet_NaN(),
                                        0.0, "wq"));
    }
    auto value_at = [&](int q, double t) {
        const auto it = std::lower_bound(grid.begin(), grid.end(), t - 1e-9);
        return wq_by_q[q][static_cast<std::size_t>(it - grid.begin())];
    };

    // q=2: w_{2,t} ~ c t with c -> 4
    {
        std::vector<double> xs, ys;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (grid[i] < 50.0 || grid[i] > t_hi) continue;
            xs.push_back(std::log(grid[i]));
            ys.push_back(std::log(std::abs(wq_by_q[2][i])));
        }
        const double slope = detail::lslope(xs, ys);
        rep.rows.push_back(
            make_row(rep.experiment, t_hi, "w2_loglog_slope", slope, 1.0, 0.0, "asymptotic rate"));
        rep.add_verdict("q=2 linear rate (log-log slope within 0.05 of 1)",
                        std::abs(slope - 1.0) <= 0.05);
        const double ratio = value_at(2, 200.0) / 200.0;
        rep.rows.push_back(
            make_row(rep.experiment, 200.0, "w2_over_t", ratio, 4.0, 0.0, "cosine mean constant"));
        rep.add_verdict("q=2 constant: w_{2,t}/t within 5% of 4 at t=200",
                        std::abs(ratio - 4.0) <= 0.05 * 4.0);
    }
    // q=4: w_{4,t} ~ c log t with c -> 72/pi (slope of w4 against log t)
    {
        std::vector<double> xs, ys;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (grid[i] < 50.0 || grid[i] > 500.0) continue;
            xs.push_back(std::log(grid[i]));
            ys.push_back(wq_by_q[4][i]);
        }
        const double slope = detail::lslope(xs, ys);
        const double target = 72.0 / pi;
        rep.rows.push_back(make_row(rep.experiment, 500.0, "w4_per_logt_slope", slope, target, 0.0,
                                    "cosine mean constant"));
        rep.add_verdict("q=4 log rate: d w4 / d log t within 10% of 72/pi over [50,500]",
                        std::abs(slope - target) <= 0.10 * target);
    }
    // q=3,5: Cauchy increments at t=500
    for (int q : {3, 5}) {
        const double w500 = value_at(q, 500.0), w1000 = value_at(q, 1000.0);
        const double rel = std::abs(w1000 - w500) / std::abs(w500);
        rep.rows.push_back(make_row(rep.experiment, 500.0,
                                    "w" + std::to_string(q) + "_doubling_increment", rel, 0.0, 0.0,
                                    "Cauchy criterion"));
        rep.add_verdict("q=" + std::to_string(q) + " bounded: |w(1000)-w(500)| < 0.05 |w(500)|",
                        rel < 0.05);
    }
    // q=1: sign changes and regvar refusal
    {
        const auto dense = [&] {
            std::vector<double> g;
            for (int i = 0; i <= 2048; ++i)
                g.push_back(10.0 + (500.0 - 10.0) * static_cast<double>(i) / 2048.0);
            return g;
        }();
        const auto w1 = wq_sweep(berry, d, 1, dense);
        int changes = 0;
        for (std::size_t i = 1; i < w1.size(); ++i)
            if ((w1[i] > 0) != (w1[i - 1] > 0)) ++changes;
        rep.rows.push_back(make_row(rep.experiment, 500.0, "w1_sign_changes",
                                    static_cast<double>(changes), 10.0, 0.0, "sign scan"));
        rep.add_verdict("q=1: >= 10 sign changes on [10,500]", changes >= 10);

        const auto fit_grid = detail::quarter_octave_grid(1.0, 1024.0);
        const auto w1f = wq_sweep(berry, d, 1, fit_grid);
        std::vector<std::pair<double, double>> samples;
        for (std::size_t i = 0; i < fit_grid.size(); ++i) samples.push_back({fit_grid[i], w1f[i]});
        const auto fit = fit_rv_index(samples);
        rep.add_verdict("q=1: fit_rv_index reports not regularly varying",
                        !fit.eventually_positive);
    }
    rep.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

// ---------------------------------------------------------------------------
// regvar suite

inline experiment_report run_regvar_suite(const json& cfg) {
    const auto start = std::chrono::steady_clock::now();
    experiment_report rep;
    rep.experiment = "regvar_suite";
    rep.config = cfg;
    rep.hash = config_hash(cfg);

    const kernel_model model = parse_kernel_model(cfg.at("kernel"));
    const int d = static_cast<int>(cfg_num(cfg, "dim", 1));
    const bool cheap = model.kernel.has_prefix(d);
    const double fit_hi = cfg_num(cfg, "fit_t_max", cheap ? 1048576.0 : 4096.0);
    const auto grid = detail::quarter_octave_grid(1.0, fit_hi);
    const auto ws = wt_radial_sweep(model.kernel, d, grid);
    std::vector<std::pair<double, double>> samples;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        samples.push_back({grid[i], ws[i]});
        if (grid[i] >= fit_hi / 1024.0)
            rep.rows.push_back(
                make_row(rep.experiment, grid[i], "w_t", ws[i],
                         std::numeric_limits<double>::quiet_NaN(), 0.0, "wt_radial"));
    }
    const regvar_fit fit = fit_rv_index(samples);
    if (!fit.eventually_positive) {
        rep.add_verdict("fit_rv_index: " + fit.diagnosis, false);
        rep.runtime_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return rep;
    }
    const double alpha = *fit.alpha;
    const auto known = model.kernel.known_alpha(d);
    rep.rows.push_back(make_row(rep.experiment, fit_hi, "alpha_fit", alpha,
                                known ? *known : std::numeric_limits<double>::quiet_NaN(),
                                fit.slope_stderr, known ? "kernel metadata" : "fit_rv_index"));
    if (known) {
        const double tol = cfg_tol(cfg, "alpha", 0.05);
        rep.add_verdict("fitted alpha within " + detail::fmt_g(tol) + " of expected",
                        std::abs(alpha - *known) <= tol);
    }
    rep.add_verdict("doubling-ratio estimate agrees with slope within 0.05", fit.karamata_agrees);
    for (const auto& [t, Lsample] : fit.slowly_varying_samples)
        if (t >= fit_hi / 64.0)
            rep.rows.push_back(make_row(rep.experiment, t, "slowly_varying_factor", Lsample,
                                        std::numeric_limits<double>::quiet_NaN(), 0.0,
                                        "fit_rv_index"));

    // Potter certificate
    const wt_batch_sampler sampler = batch_from_kernel(model.kernel, d);
    const double potter_tmax = cfg_num(cfg, "potter_t_max", cheap ? 1e6 : 1e4);
    try {
        const auto cert =
            potter_certify(fit, sampler, cfg_num(cfg, "potter_A", 2.0),
                           cfg_num(cfg, "potter_delta", 0.3), default_potter_grid(potter_tmax));
        rep.rows.push_back(make_row(rep.experiment, cert.X, "potter_margin", cert.margin, 0.0, 0.0,
                                    "potter_certify"));
        rep.add_verdict("Potter bound certified (margin >= 0)", cert.margin >= 0.0);
    } catch (const error& e) {
        if (e.code() != errc::not_regularly_varying) throw;
        rep.add_verdict(std::string("Potter certification: ") + e.what(), false);
    }

    // Corollary check
    const double H = cfg_num(cfg, "coregvar_H", 2.0);
    std::vector<double> t_list = cfg.contains("t_list")
                                     ? cfg.at("t_list").get<std::vector<double>>()
                                     : (cheap ? std::vector<double>{100.0, 1000.0, 10000.0}
                                              : std::vector<double>{50.0, 200.0, 500.0});
    const auto rows = coregvar_check(sampler, alpha, H, t_list);
    for (const auto& r : rows)
        rep.rows.push_back(make_row(rep.experiment, r.t, "coregvar_integral", r.integral, r.limit,
                                    r.quad_err, "coregvar_check"));
    const double ctol = cfg_tol(cfg, "coregvar_rel", 0.05);
    rep.add_verdict("coregvar integral within " + detail::fmt_g(ctol) + " at max t",
                    rows.back().rel_err <= ctol);
    rep.add_verdict("coregvar error decreasing (last < first)",
                    rows.back().abs_err < rows.front().abs_err || rows.size() < 2);

    rep.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

// ---------------------------------------------------------------------------
// CLT diagnostics

namespace detail {

struct sim_bundle {
    std::vector<compact_set> scaled;           // t * shapes
    std::vector<std::vector<double>> integrals; // [shape][path]
};

/// Simulate the requested field and integrate phi(B) over every scaled shape.
inline sim_bundle simulate_and_integrate(const kernel_model& model, const phi_spec& phi,
                                         const std::vector<compact_set>& shapes, double t,
                                         std::size_t n_paths, const json& cfg,
                                         std::uint64_t seed) {
    sim_bundle out;
    for (const auto& s : shapes) out.scaled.push_back(scale(s, t));
    point lo_all, hi_all;
    for (std::size_t i = 0; i < out.scaled.size(); ++i) {
        auto [lo, hi] = bounding_box(out.scaled[i]);
        if (i == 0) {
            lo_all = lo;
            hi_all = hi;
        } else {
            for (std::size_t k = 0; k < lo.size(); ++k) {
                lo_all[k] = std::min(lo_all[k], lo[k]);
                hi_all[k] = std::max(hi_all[k], hi[k]);
            }
        }
    }
    const int d = shapes.front().dim;
    field_sample field;
    if (model.base.name == "berry_j0") {
        require(d == 2, errc::config_error, "berry simulation requires 2D shapes");
        const double dx = cfg_num(cfg, "grid_spacing", pi / 8.0);
        grid_spec grid;
        grid.dim = 2;
        grid.origin = {lo_all[0] - dx, lo_all[1] - dx};
        grid.spacing = {dx, dx};
        grid.counts = {static_cast<std::size_t>(std::ceil((hi_all[0] - lo_all[0] + 2 * dx) / dx)) + 1,
                       static_cast<std::size_t>(std::ceil((hi_all[1] - lo_all[1] + 2 * dx) / dx)) + 1};
        field = simulate_berry_2d(grid, cfg_size(cfg, "n_waves", 256), n_paths, seed);
    } else {
        require(d == 1, errc::config_error, "1D circulant embedding requires 1D shapes");
        const double dx = cfg_num(cfg, "grid_spacing", 0.02);
        const double lo = lo_all[0] - dx, hi = hi_all[0] + dx;
        const std::size_t n = static_cast<std::size_t>(std::ceil((hi - lo) / dx)) + 2;
        field = simulate_stationary_1d(model.base.k, n, dx, n_paths, seed, model.base.name);
        field.grid.origin = {lo};
    }
    for (const auto& s : out.scaled) out.integrals.push_back(integrate_functional(field, phi.fn, s));
    return out;
}

} // namespace detail

/// Per-set normality diagnostics plus pairwise empirical correlations against
/// the limit-implied ones (b(D,L)/sqrt(b(D,D) b(L,L))).
inline experiment_report run_clt_diagnostics(const json& cfg) {
    const auto start = std::chrono::steady_clock::now();
    experiment_report rep;
    rep.experiment = "clt_diagnostics";
    rep.config = cfg;
    rep.hash = config_hash(cfg);

    const kernel_model base_model = parse_kernel_model(cfg.at("kernel"));
    const phi_spec phi = parse_phi(cfg.at("phi"));
    std::vector<compact_set> shapes;
    for (const auto& s : cfg.at("shapes")) shapes.push_back(parse_shape(s));
    require(!shapes.empty(), errc::config_error, "clt: need at least one shape");
    const double t = cfg_num(cfg, "t", 64.0);
    const std::size_t n_paths = cfg_size(cfg, "n_paths", 200);
    const std::uint64_t seed = static_cast<std::uint64_t>(cfg_num(cfg, "seed", 1));
    const bool enough_paths = n_paths >= 100;

    // model for the statistic phi(B): composed kernel over the base correlation
    const radial_kernel K_phi = make_composed_kernel(phi.expansion, base_model.base);
    const int d = shapes.front().dim;
    const auto known = K_phi.known_alpha(d);
    double alpha;
    if (known) {
        alpha = *known;
    } else {
        const auto grid = detail::quarter_octave_grid(1.0, K_phi.has_prefix(d) ? 1048576.0 : 2048.0);
        const auto ws = wt_radial_sweep(K_phi, d, grid);
        std::vector<std::pair<double, double>> samples;
        for (std::size_t i = 0; i < grid.size(); ++i) samples.push_back({grid[i], ws[i]});
        alpha = fit_rv_index(samples).require_alpha();
    }

    const auto bundle = detail::simulate_and_integrate(base_model, phi, shapes, t, n_paths, cfg, seed);

    const double skew_bound = 4.0 * std::sqrt(6.0 / static_cast<double>(n_paths));
    const double kurt_bound = 4.0 * std::sqrt(24.0 / static_cast<double>(n_paths));
    const double ks_tol = cfg_tol(cfg, "ks", 0.1);
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        const auto m = compute_moments(bundle.integrals[i]);
        const double ks = ks_distance_normal(bundle.integrals[i]);
        const std::string tag = "shape" + std::to_string(i);
        rep.rows.push_back(make_row(rep.experiment, t, tag + "_skewness", m.skewness, 0.0,
                                    std::sqrt(6.0 / n_paths), "gaussian moments"));
        rep.rows.push_back(make_row(rep.experiment, t, tag + "_ex_kurtosis", m.ex_kurtosis, 0.0,
                                    std::sqrt(24.0 / n_paths), "gaussian moments"));
        rep.rows.push_back(make_row(rep.experiment, t, tag + "_ks_normal", ks, 0.0, 0.0,
                                    "ks_distance_normal"));
        if (!enough_paths) {
            rep.add_indeterminate(tag + ": fewer than 100 paths");
            continue;
        }
        rep.add_verdict(tag + " skewness within 4*sqrt(6/m)", std::abs(m.skewness) <= skew_bound);
        rep.add_verdict(tag + " excess kurtosis within 4*sqrt(24/m)",
                        std::abs(m.ex_kurtosis) <= kurt_bound);
        rep.add_verdict(tag + " KS distance to normal < " + detail::fmt_g(ks_tol), ks < ks_tol);
    }

    const double corr_tol = cfg_tol(cfg, "corr", 0.15);
    const std::size_t n_l = cfg_size(cfg, "n_l", 384);
    const int n_theta = static_cast<int>(cfg_num(cfg, "n_theta", 64));
    std::vector<double> bdiag(shapes.size());
    for (std::size_t i = 0; i < shapes.size(); ++i)
        bdiag[i] = std::abs(alpha) < 1e-12 ? limit_cov_alpha0(shapes[i], shapes[i]).value
                                           : limit_cov(shapes[i], shapes[i], alpha, n_l, n_theta).value;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        for (std::size_t j = i + 1; j < shapes.size(); ++j) {
            const double bij = std::abs(alpha) < 1e-12
                                   ? limit_cov_alpha0(shapes[i], shapes[j]).value
                                   : limit_cov(shapes[i], shapes[j], alpha, n_l, n_theta).value;
            const double rho_theory = bij / std::sqrt(bdiag[i] * bdiag[j]);
            const double rho_emp =
                sample_correlation(bundle.integrals[i], bundle.integrals[j]);
            const std::string tag =
                "corr_shape" + std::to_string(i) + "_shape" + std::to_string(j);
            rep.rows.push_back(make_row(rep.experiment, t, tag, rho_emp, rho_theory,
                                        (1.0 - rho_theory * rho_theory) / std::sqrt((double)n_paths),
                                        "limit_cov"));
            if (!enough_paths)
                rep.add_indeterminate(tag + ": fewer than 100 paths");
            else
                rep.add_verdict(tag + " within " + detail::fmt_g(corr_tol),
                                std::abs(rho_emp - rho_theory) <= corr_tol);
        }
    }
    rep.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

// ---------------------------------------------------------------------------
// reduction check

/// Mean-square distance between the normalized phi statistic and the
/// normalized dominant Hermite statistic, per t.
inline experiment_report run_reduction_check(const json& cfg) {
    const auto start = std::chrono::steady_clock::now();
    experiment_report rep;
    rep.experiment = "reduction_check";
    rep.config = cfg;
    rep.hash = config_hash(cfg);

    const kernel_model base_model = parse_kernel_model(cfg.at("kernel"));
    require(base_model.base.name == "berry_j0", errc::config_error,
            "reduction check is defined for the Berry kernel");
    const phi_spec phi = parse_phi(cfg.at("phi"));
    const int R = phi.expansion.rank;
    require(R == 2 || R == 4, errc::config_error,
            "reduction check requires Hermite rank 2 or 4; got " + std::to_string(R));
    const double sgn_aR = phi.expansion.coeff(R) > 0 ? 1.0 : -1.0;
    const compact_set D = parse_shape(cfg.at("D"));
    std::vector<double> t_list = cfg.at("t_list").get<std::vector<double>>();
    std::sort(t_list.begin(), t_list.end());
    const std::size_t n_paths = cfg_size(cfg, "n_paths", 200);
    const std::uint64_t seed = static_cast<std::uint64_t>(cfg_num(cfg, "seed", 1));
    detail::deadline dl(cfg_num(cfg, "time_budget_s", 0.0));

    const phi_spec hq = make_phi("hermite:q=" + std::to_string(R));
    std::vector<double> dists;
    bool indeterminate = false;
    for (double t : t_list) {
        if (dl.expired()) {
            rep.add_indeterminate("time budget exhausted before t=" + detail::fmt_g(t));
            indeterminate = true;
            break;
        }
        const auto b_phi =
            detail::simulate_and_integrate(base_model, phi, {D}, t, n_paths, cfg, seed);
        const auto b_hq = detail::simulate_and_integrate(base_model, hq, {D}, t, n_paths, cfg, seed);
        const auto mp = compute_moments(b_phi.integrals[0]);
        const auto mh = compute_moments(b_hq.integrals[0]);
        if (mp.var <= 1e-24 || mh.var <= 1e-24) {
            rep.add_indeterminate("variance below noise floor at t=" + detail::fmt_g(t));
            indeterminate = true;
            continue;
        }
        kahan_sum ms;
        for (std::size_t p = 0; p < n_paths; ++p) {
            const double x = (b_phi.integrals[0][p] - mp.mean) / std::sqrt(mp.var);
            const double y = (b_hq.integrals[0][p] - mh.mean) / std::sqrt(mh.var);
            const double dxy = x - sgn_aR * y;
            ms.add(dxy * dxy);
        }
        const double dist = ms.value() / static_cast<double>(n_paths);
        dists.push_back(dist);
        rep.rows.push_back(
            make_row(rep.experiment, t, "reduction_ms_distance", dist, 0.0, 0.0, "reduction"));
    }
    if (!indeterminate && dists.size() == t_list.size() && !dists.empty()) {
        bool decreasing = true;
        for (std::size_t i = 1; i < dists.size(); ++i)
            if (dists[i] >= dists[i - 1]) decreasing = false;
        const double tol = cfg_tol(cfg, "distance", 0.2);
        rep.add_verdict("mean-square distance decreasing in t", decreasing);
        rep.add_verdict("distance below " + detail::fmt_g(tol) + " at max t", dists.back() < tol);
    }
    rep.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

// ---------------------------------------------------------------------------
// covariogram export and w_t tables

inline experiment_report run_covariogram(const json& cfg, const std::string& out_dir) {
    const auto start = std::chrono::steady_clock::now();
    experiment_report rep;
    rep.experiment = "covariogram";
    rep.config = cfg;
    rep.hash = config_hash(cfg);

    const compact_set D = parse_shape(cfg.at("D"));
    const compact_set L = parse_shape(cfg.at("L"));
    const std::size_t n_l = cfg_size(cfg, "n_l", 256);
    const int n_theta = static_cast<int>(cfg_num(cfg, "n_theta", D.dim == 1 ? 2 : 64));
    const bool exact = has_exact_covariogram(D, L) && cfg_str(cfg, "method", "auto") != "monte_carlo";
    const auto profile = radial_profile(D, L, direction_grid(D.dim, n_theta), n_l,
                                        exact ? profile_method::exact : profile_method::monte_carlo,
                                        cfg_size(cfg, "mc_n", 200000),
                                        static_cast<std::uint64_t>(cfg_num(cfg, "seed", 1)));
    if (!out_dir.empty())
        write_profile_csv(profile, (std::filesystem::path(out_dir) / "profile.csv").string());

    rep.rows.push_back(make_row(rep.experiment, 0.0, "volume_D", volume(D),
                                std::numeric_limits<double>::quiet_NaN(), 0.0, "volume"));
    rep.rows.push_back(make_row(rep.experiment, 0.0, "perimeter_D", perimeter(D),
                                std::numeric_limits<double>::quiet_NaN(), 0.0, "perimeter"));
    rep.rows.push_back(make_row(rep.experiment, 0.0, "diameter_bound", profile.h,
                                std::numeric_limits<double>::quiet_NaN(), 0.0, "diameter_bound"));
    // support property at l = h
    double worst_end = 0.0, worst_deriv = 0.0, worst_recon = 0.0;
    const double lip = std::min(perimeter(D), perimeter(L));
    for (std::size_t ti = 0; ti < profile.thetas.size(); ++ti) {
        worst_end = std::max(worst_end, std::abs(profile.values[ti].back()));
        double recon = 0.0;
        for (std::size_t i = profile.ls.size() - 1; i-- > 0;) {
            recon += 0.5 * (profile.derivs[ti][i] + profile.derivs[ti][i + 1]) *
                     (profile.ls[i + 1] - profile.ls[i]);
            worst_recon = std::max(worst_recon, std::abs(recon - profile.values[ti][i]));
        }
        for (double dv : profile.derivs[ti])
            worst_deriv = std::max(worst_deriv, std::abs(dv) - lip);
    }
    const double mc_tol = exact ? 1e-10 : 1e-2 * volume(D);
    rep.rows.push_back(make_row(rep.experiment, profile.h, "value_at_h", worst_end, 0.0, 0.0,
                                "support property"));
    rep.add_verdict("profile vanishes at l = h(D-L)", worst_end <= mc_tol);
    rep.add_verdict("derivative bounded by min(Per D, Per L)", worst_deriv <= 1e-9 + mc_tol);
    rep.add_verdict("reconstruction integral matches values",
                    worst_recon <= (exact ? 1e-3 * std::max(1.0, volume(D)) : 0.05 * volume(D)));
    rep.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

inline experiment_report run_wt_table(const json& cfg) {
    const auto start = std::chrono::steady_clock::now();
    experiment_report rep;
    rep.experiment = "wt";
    rep.config = cfg;
    rep.hash = config_hash(cfg);

    const kernel_model model = parse_kernel_model(cfg.at("kernel"));
    const int d = static_cast<int>(cfg_num(cfg, "dim", 1));
    std::vector<double> t_list = cfg.at("t_list").get<std::vector<double>>();
    std::sort(t_list.begin(), t_list.end());
    const auto ws = wt_radial_sweep(model.kernel, d, t_list);
    for (std::size_t i = 0; i < t_list.size(); ++i)
        rep.rows.push_back(make_row(rep.experiment, t_list[i], "w_t", ws[i],
                                    std::numeric_limits<double>::quiet_NaN(), 0.0, "wt_radial"));

    if (cfg.value("spectral_crosscheck", false)) {
        require(model.kernel.name.rfind("gaussian", 0) == 0 && d == 2, errc::config_error,
                "spectral_crosscheck supports the gaussian kernel in d=2");
        const double s = 1.0; // gaussian:s=1 spectral pair
        for (double t : t_list) {
            const auto sp = wt_from_spectral(
                [s](double rho) { return rho * s * s * std::exp(-0.5 * rho * rho * s * s); }, 1.0,
                2, t);
            const double ref = wt_radial(model.kernel, 2, t).value;
            rep.rows.push_back(
                make_row(rep.experiment, t, "wt_from_spectral", sp.value, ref, sp.tail_bound,
                         "wt_radial"));
            rep.add_verdict("spectral identity at t=" + detail::fmt_g(t) + " (rel err < 1e-6)",
                            std::abs(sp.value - ref) <= 1e-6 * std::abs(ref));
        }
    }
    rep.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

} // namespace setcov
