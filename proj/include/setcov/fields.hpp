#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "setcov/common.hpp"
#include "setcov/geometry.hpp"
#include "setcov/parallel.hpp"
#include "setcov/rng.hpp"

namespace setcov {

namespace detail {

/// In-place iterative radix-2 FFT (unnormalized, forward sign).
inline void fft_pow2(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    require((n & (n - 1)) == 0 && n >= 2, errc::invalid_argument, "fft: size must be 2^k");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * pi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

} // namespace detail

struct grid_spec {
    int dim = 1;
    std::vector<double> origin;
    std::vector<double> spacing;
    std::vector<std::size_t> counts;

    std::size_t nodes() const {
        std::size_t n = 1;
        for (auto c : counts) n *= c;
        return n;
    }
    point node_coord(std::size_t idx) const {
        point x(dim);
        for (int i = 0; i < dim; ++i) {
            x[i] = origin[i] + spacing[i] * static_cast<double>(idx % counts[i]);
            idx /= counts[i];
        }
        return x;
    }
};

/// Paths of a stationary Gaussian field sampled on a regular grid.
struct field_sample {
    grid_spec grid;
    std::size_t n_paths = 0;
    std::vector<double> values; // [path][node], row-major in node index
    std::uint64_t seed = 0;
    std::string generator;

    const double* path(std::size_t p) const { return values.data() + p * grid.nodes(); }
    double* path(std::size_t p) { return values.data() + p * grid.nodes(); }
};

/// 1D stationary Gaussian paths with covariance C, exact in law via circulant
/// embedding; falls back to dense Cholesky with 1e-12 jitter when the
/// embedding spectrum is genuinely negative.  Bit-identical per (seed, path).
inline field_sample simulate_stationary_1d(const std::function<double(double)>& C, std::size_t n,
                                           double spacing, std::size_t n_paths,
                                           std::uint64_t seed,
                                           const std::string& kernel_name = "custom") {
    require(n >= 2, errc::invalid_argument, "simulate_stationary_1d: n >= 2");
    require(spacing > 0.0, errc::invalid_argument, "simulate_stationary_1d: spacing > 0");
    std::size_t m = 1;
    while (m < 2 * (n - 1)) m <<= 1;

    std::vector<std::complex<double>> emb(m);
    for (std::size_t j = 0; j < m; ++j) {
        const std::size_t lag = std::min(j, m - j);
        emb[j] = C(static_cast<double>(lag) * spacing);
    }
    detail::fft_pow2(emb);
    std::vector<double> lambda(m);
    double lam_min = 0.0, lam_max = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        lambda[k] = emb[k].real();
        lam_min = std::min(lam_min, lambda[k]);
        lam_max = std::max(lam_max, std::abs(lambda[k]));
    }

    field_sample out;
    out.grid = {1, {0.0}, {spacing}, {n}};
    out.n_paths = n_paths;
    out.seed = seed;
    out.values.assign(n_paths * n, 0.0);

    if (lam_min >= -1e-10 * std::max(lam_max, 1.0)) {
        out.generator = "circulant_embedding";
        std::vector<double> amp(m);
        for (std::size_t k = 0; k < m; ++k)
            amp[k] = std::sqrt(std::max(lambda[k], 0.0) / static_cast<double>(m));
        parallel_for(n_paths, [&](std::size_t p) {
            counter_rng rng(seed, p);
            std::vector<std::complex<double>> z(m);
            for (std::size_t k = 0; k < m; ++k)
                z[k] = amp[k] * std::complex<double>(rng.next_normal(), rng.next_normal());
            detail::fft_pow2(z);
            double* dst = out.path(p);
            for (std::size_t j = 0; j < n; ++j) dst[j] = z[j].real();
        });
        return out;
    }

    // dense Cholesky fallback
    require(n <= 2048, errc::invalid_argument,
            "simulate_stationary_1d: embedding of kernel '" + kernel_name +
                "' is not nonnegative definite and n > 2048 exceeds the Cholesky fallback");
    out.generator = "cholesky";
    std::vector<double> a(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j)
            a[i * n + j] = C(static_cast<double>(i - j) * spacing) + (i == j ? 1e-12 : 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double diag = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k) diag -= a[j * n + k] * a[j * n + k];
        require(diag > 0.0, errc::invalid_argument,
                "simulate_stationary_1d: Cholesky failed for kernel '" + kernel_name +
                    "' even with jitter");
        const double ljj = std::sqrt(diag);
        a[j * n + j] = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double v = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) v -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = v / ljj;
        }
    }
    parallel_for(n_paths, [&](std::size_t p) {
        counter_rng rng(seed, p);
        std::vector<double> xi(n);
        for (auto& v : xi) v = rng.next_normal();
        double* dst = out.path(p);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k <= i; ++k) s += a[i * n + k] * xi[k];
            dst[i] = s;
        }
    });
    return out;
}

/// Berry random-wave model on a 2D grid: B(x) = sqrt(2/n_waves) sum_j
/// cos(<k_j, x> + phi_j) with unit wavevectors at uniform angles.  Empirical
/// covariance converges to J_0(|z|) at rate n_waves^{-1/2}.  Wave streams are
/// keyed (seed, path, wave), so parallel generation cannot change the law.
inline field_sample simulate_berry_2d(const grid_spec& grid, std::size_t n_waves,
                                      std::size_t n_paths, std::uint64_t seed) {
    require(grid.dim == 2, errc::invalid_argument, "simulate_berry_2d: dim must be 2");
    require(n_waves >= 64, errc::invalid_argument, "simulate_berry_2d: n_waves >= 64");
    for (double dx : grid.spacing)
        require(dx > 0.0 && dx <= pi / 4.0 + 1e-12, errc::invalid_argument,
                "simulate_berry_2d: spacing must be in (0, pi/4] (>= 8 nodes per wavelength)");
    const std::size_t nx = grid.counts[0], ny = grid.counts[1];
    field_sample out;
    out.grid = grid;
    out.n_paths = n_paths;
    out.seed = seed;
    out.generator = "berry_waves";
    out.values.assign(n_paths * grid.nodes(), 0.0);

    const double norm = std::sqrt(2.0 / static_cast<double>(n_waves));
    parallel_for(n_paths, [&](std::size_t p) {
        double* dst = out.path(p);
        for (std::size_t j = 0; j < n_waves; ++j) {
            counter_rng rng(seed, p, j);
            const double psi = rng.next_uniform(0.0, 2.0 * pi);
            const double phase = rng.next_uniform(0.0, 2.0 * pi);
            const double kx = std::cos(psi), ky = std::sin(psi);
            const double dlt = kx * grid.spacing[0];
            const double cd = std::cos(dlt), sd = std::sin(dlt);
            for (std::size_t iy = 0; iy < ny; ++iy) {
                const double base = kx * grid.origin[0] +
                                    ky * (grid.origin[1] + grid.spacing[1] * iy) + phase;
                double c = std::cos(base), s = std::sin(base);
                double* row = dst + iy * nx;
                for (std::size_t ix = 0; ix < nx; ++ix) {
                    row[ix] += c;
                    const double cn = c * cd - s * sd;
                    s = s * cd + c * sd;
                    c = cn;
                }
            }
        }
        const std::size_t nn = grid.nodes();
        for (std::size_t i = 0; i < nn; ++i) dst[i] *= norm;
    });
    return out;
}

/// Evaluate the Berry field at arbitrary points (same law/streams as the grid
/// version); used for covariance fidelity at chosen lags.
inline std::vector<double> berry_at_points(const std::vector<point>& pts, std::size_t n_waves,
                                           std::size_t path, std::uint64_t seed) {
    std::vector<double> out(pts.size(), 0.0);
    for (std::size_t j = 0; j < n_waves; ++j) {
        counter_rng rng(seed, path, j);
        const double psi = rng.next_uniform(0.0, 2.0 * pi);
        const double phase = rng.next_uniform(0.0, 2.0 * pi);
        const double kx = std::cos(psi), ky = std::sin(psi);
        for (std::size_t i = 0; i < pts.size(); ++i)
            out[i] += std::cos(kx * pts[i][0] + ky * pts[i][1] + phase);
    }
    const double norm = std::sqrt(2.0 / static_cast<double>(n_waves));
    for (auto& v : out) v *= norm;
    return out;
}

/// Node weights for integrating over `region`: full cells weight 1, boundary
/// cells get the inside fraction from a 32-point deterministic subsample.
inline std::vector<double> integration_weights(const grid_spec& grid, const compact_set& region,
                                               std::uint64_t seed = 97) {
    require(grid.dim == region.dim, errc::dimension_mismatch, "integration_weights: dim");
    auto [rlo, rhi] = bounding_box(region);
    for (int i = 0; i < grid.dim; ++i) {
        const double cell_lo = grid.origin[i] - 0.5 * grid.spacing[i];
        const double cell_hi = grid.origin[i] +
                               grid.spacing[i] * (static_cast<double>(grid.counts[i]) - 0.5);
        require(rlo[i] >= cell_lo - 1e-12 && rhi[i] <= cell_hi + 1e-12, errc::invalid_argument,
                "integration region exceeds grid coverage: axis " + std::to_string(i) +
                    " needs [" + std::to_string(rlo[i]) + "," + std::to_string(rhi[i]) +
                    "], grid covers [" + std::to_string(cell_lo) + "," + std::to_string(cell_hi) +
                    "]");
    }
    const std::size_t nn = grid.nodes();
    std::vector<double> w(nn, 0.0);
    const int d = grid.dim;
    point corner(d), x(d);
    for (std::size_t idx = 0; idx < nn; ++idx) {
        const point c = grid.node_coord(idx);
        bool outside_bbox = false;
        for (int i = 0; i < d; ++i)
            if (c[i] + 0.5 * grid.spacing[i] < rlo[i] || c[i] - 0.5 * grid.spacing[i] > rhi[i])
                outside_bbox = true;
        if (outside_bbox) continue;
        int corners_in = 0;
        const int ncorner = 1 << d;
        for (int mask = 0; mask < ncorner; ++mask) {
            for (int i = 0; i < d; ++i)
                corner[i] = c[i] + ((mask >> i) & 1 ? 0.5 : -0.5) * grid.spacing[i];
            if (contains(region, corner)) ++corners_in;
        }
        if (corners_in == ncorner) {
            w[idx] = 1.0;
            continue;
        }
        if (corners_in == 0 && !contains(region, c)) continue;
        counter_rng rng(seed, idx);
        int hits = 0;
        for (int s = 0; s < 32; ++s) {
            for (int i = 0; i < d; ++i)
                x[i] = c[i] + (rng.next_uniform() - 0.5) * grid.spacing[i];
            if (contains(region, x)) ++hits;
        }
        w[idx] = static_cast<double>(hits) / 32.0;
    }
    return w;
}

/// Riemann integral of phi(B_x) over `region` for every path:
/// sum over nodes of phi(value) * weight * cell volume.
inline std::vector<double> integrate_functional(const field_sample& sample,
                                                const std::function<double(double)>& phi,
                                                const compact_set& region) {
    const auto w = integration_weights(sample.grid, region, sample.seed ^ 0x9E37ULL);
    double cell = 1.0;
    for (double dx : sample.grid.spacing) cell *= dx;
    const std::size_t nn = sample.grid.nodes();
    std::vector<double> out(sample.n_paths, 0.0);
    parallel_for(sample.n_paths, [&](std::size_t p) {
        const double* v = sample.path(p);
        kahan_sum s;
        for (std::size_t i = 0; i < nn; ++i)
            if (w[i] != 0.0) s.add(phi(v[i]) * w[i]);
        out[p] = cell * s.value();
    });
    return out;
}

// ---------------------------------------------------------------------------
// flat binary persistence: one JSON header line, then row-major float64

inline void save_field(const field_sample& f, const std::string& path) {
    static_assert(std::endian::native == std::endian::little,
                  "field files are little-endian; big-endian hosts unsupported");
    nlohmann::json head;
    head["dim"] = f.grid.dim;
    head["origin"] = f.grid.origin;
    head["spacing"] = f.grid.spacing;
    head["counts"] = f.grid.counts;
    head["n_paths"] = f.n_paths;
    head["seed"] = f.seed;
    head["generator"] = f.generator;
    head["byte_order"] = "little";
    std::ofstream out(path, std::ios::binary);
    require(out.good(), errc::config_error, "save_field: cannot open " + path);
    const std::string h = head.dump();
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    out.put('\n');
    out.write(reinterpret_cast<const char*>(f.values.data()),
              static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    require(out.good(), errc::config_error, "save_field: write failed for " + path);
}

inline field_sample load_field(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), errc::config_error, "load_field: cannot open " + path);
    std::string header;
    std::getline(in, header);
    const auto head = nlohmann::json::parse(header);
    field_sample f;
    f.grid.dim = head.at("dim").get<int>();
    f.grid.origin = head.at("origin").get<std::vector<double>>();
    f.grid.spacing = head.at("spacing").get<std::vector<double>>();
    f.grid.counts = head.at("counts").get<std::vector<std::size_t>>();
    f.n_paths = head.at("n_paths").get<std::size_t>();
    f.seed = head.at("seed").get<std::uint64_t>();
    f.generator = head.at("generator").get<std::string>();
    f.values.resize(f.n_paths * f.grid.nodes());
    in.read(reinterpret_cast<char*>(f.values.data()),
            static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    require(in.gcount() == static_cast<std::streamsize>(f.values.size() * sizeof(double)),
            errc::config_error, "load_field: truncated file " + path);
    return f;
}

} // namespace setcov
