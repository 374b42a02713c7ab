#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "setcov/common.hpp"
#include "setcov/rng.hpp"
#include "setcov/special.hpp"

namespace setcov {

using point = std::vector<double>;

enum class shape_kind { interval, box, ball, polygon2d, set_union };

/// A compact domain in R^d from the closed shape vocabulary.
/// Build through the make_* factories, which validate the invariants.
struct compact_set {
    shape_kind kind = shape_kind::interval;
    int dim = 1;

    double a = 0.0, b = 0.0;                       // interval
    std::vector<double> lows, highs;               // box
    point center;                                  // ball
    double radius = 0.0;                           // ball
    std::vector<std::array<double, 2>> vertices;   // polygon2d, CCW
    bool convex = false;                           // polygon2d
    std::vector<compact_set> members;              // set_union, pairwise disjoint
};

struct direction {
    int dim = 1;
    std::vector<double> theta;
};

namespace geo {

inline double dot(const point& x, const point& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

inline double norm(const point& x) { return std::sqrt(dot(x, x)); }

inline double polygon_area2(const std::vector<std::array<double, 2>>& v) {
    double s = 0.0;
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = v[i];
        const auto& q = v[(i + 1) % n];
        s += p[0] * q[1] - q[0] * p[1];
    }
    return s; // twice the signed area
}

inline double cross(const std::array<double, 2>& o, const std::array<double, 2>& a,
                    const std::array<double, 2>& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

inline bool segments_intersect(const std::array<double, 2>& p1, const std::array<double, 2>& p2,
                               const std::array<double, 2>& q1, const std::array<double, 2>& q2) {
    const double d1 = cross(q1, q2, p1), d2 = cross(q1, q2, p2);
    const double d3 = cross(p1, p2, q1), d4 = cross(p1, p2, q2);
    return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

inline bool polygon_is_simple(const std::vector<std::array<double, 2>>& v) {
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            // skip edges sharing a vertex
            if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
            if (segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n])) return false;
        }
    }
    return true;
}

inline bool polygon_is_convex(const std::vector<std::array<double, 2>>& v) {
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (cross(v[i], v[(i + 1) % n], v[(i + 2) % n]) < -1e-12) return false;
    }
    return true;
}

inline bool point_in_convex_polygon(const std::vector<std::array<double, 2>>& v, double x,
                                    double y) {
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = v[i];
        const auto& q = v[(i + 1) % n];
        if ((q[0] - p[0]) * (y - p[1]) - (q[1] - p[1]) * (x - p[0]) < 0.0) return false;
    }
    return true;
}

inline bool point_in_simple_polygon(const std::vector<std::array<double, 2>>& v, double x,
                                    double y) {
    bool inside = false;
    const std::size_t n = v.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        if (((v[i][1] > y) != (v[j][1] > y)) &&
            (x < (v[j][0] - v[i][0]) * (y - v[i][1]) / (v[j][1] - v[i][1]) + v[i][0]))
            inside = !inside;
    }
    return inside;
}

/// Sutherland-Hodgman: clip `subject` against convex CCW `clip`.
inline std::vector<std::array<double, 2>>
clip_convex(std::vector<std::array<double, 2>> subject,
            const std::vector<std::array<double, 2>>& clip) {
    const std::size_t m = clip.size();
    for (std::size_t e = 0; e < m && !subject.empty(); ++e) {
        const auto& ca = clip[e];
        const auto& cb = clip[(e + 1) % m];
        std::vector<std::array<double, 2>> out;
        const std::size_t n = subject.size();
        for (std::size_t i = 0; i < n; ++i) {
            const auto& cur = subject[i];
            const auto& prev = subject[(i + n - 1) % n];
            const double dc = cross(ca, cb, cur);
            const double dp = cross(ca, cb, prev);
            const bool cin = dc >= 0.0, pin = dp >= 0.0;
            if (cin != pin) {
                const double t = dp / (dp - dc);
                out.push_back({prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])});
            }
            if (cin) out.push_back(cur);
        }
        subject = std::move(out);
    }
    return subject;
}

/// Volume of the intersection of two balls (radii r1, r2, center distance s)
/// in dimension d <= 3.
inline double ball_intersection_volume(int d, double r1, double r2, double s) {
    if (s >= r1 + r2) return 0.0;
    const double rm = std::min(r1, r2);
    if (s <= std::abs(r1 - r2)) return unit_ball_volume(d) * std::pow(rm, d);
    switch (d) {
    case 1:
        return std::min(r1 + r2 - s, 2.0 * rm);
    case 2: {
        const double x1 = (s * s + r1 * r1 - r2 * r2) / (2.0 * s);
        const double x2 = (s * s + r2 * r2 - r1 * r1) / (2.0 * s);
        const double area = r1 * r1 * std::acos(std::clamp(x1 / r1, -1.0, 1.0)) +
                            r2 * r2 * std::acos(std::clamp(x2 / r2, -1.0, 1.0)) -
                            0.5 * std::sqrt(std::max(0.0, (-s + r1 + r2) * (s + r1 - r2) *
                                                              (s - r1 + r2) * (s + r1 + r2)));
        return area;
    }
    case 3: {
        const double num = (r1 + r2 - s) * (r1 + r2 - s) *
                           (s * s + 2.0 * s * (r1 + r2) - 3.0 * (r1 - r2) * (r1 - r2));
        return pi * num / (12.0 * s);
    }
    default:
        fail(errc::unsupported, "ball intersection volume: d > 3 not supported");
    }
}

/// d/ds of ball_intersection_volume: minus the (d-1)-volume of the radical
/// cross-section of half-chord y.
inline double ball_intersection_dvds(int d, double r1, double r2, double s) {
    if (s <= std::abs(r1 - r2) || s >= r1 + r2 || s <= 0.0) return 0.0;
    const double x1 = (s * s + r1 * r1 - r2 * r2) / (2.0 * s);
    const double y2 = std::max(0.0, r1 * r1 - x1 * x1);
    switch (d) {
    case 1:
        return -1.0;
    case 2:
        return -2.0 * std::sqrt(y2);
    case 3:
        return -pi * y2;
    default:
        fail(errc::unsupported, "ball intersection derivative: d > 3 not supported");
    }
}

} // namespace geo

// ---------------------------------------------------------------------------
// factories

inline compact_set make_interval(double a, double b) {
    require(a < b, errc::invalid_argument, "interval requires a < b");
    compact_set s;
    s.kind = shape_kind::interval;
    s.dim = 1;
    s.a = a;
    s.b = b;
    return s;
}

inline compact_set make_box(std::vector<double> lows, std::vector<double> highs) {
    require(!lows.empty() && lows.size() == highs.size(), errc::invalid_argument,
            "box requires matching lows/highs");
    for (std::size_t i = 0; i < lows.size(); ++i)
        require(lows[i] < highs[i], errc::invalid_argument, "box requires lows[i] < highs[i]");
    compact_set s;
    s.kind = shape_kind::box;
    s.dim = static_cast<int>(lows.size());
    s.lows = std::move(lows);
    s.highs = std::move(highs);
    return s;
}

inline compact_set make_ball(point center, double radius) {
    require(!center.empty(), errc::invalid_argument, "ball requires a center");
    require(radius > 0.0, errc::invalid_argument, "ball requires radius > 0");
    compact_set s;
    s.kind = shape_kind::ball;
    s.dim = static_cast<int>(center.size());
    s.center = std::move(center);
    s.radius = radius;
    return s;
}

inline compact_set make_polygon(std::vector<std::array<double, 2>> vertices) {
    require(vertices.size() >= 3, errc::invalid_argument, "polygon requires >= 3 vertices");
    require(geo::polygon_area2(vertices) > 0.0, errc::invalid_argument,
            "polygon must be counter-clockwise with positive area");
    require(geo::polygon_is_simple(vertices), errc::invalid_argument, "polygon must be simple");
    compact_set s;
    s.kind = shape_kind::polygon2d;
    s.dim = 2;
    s.convex = geo::polygon_is_convex(vertices);
    s.vertices = std::move(vertices);
    return s;
}

// forward declarations used by make_union's disjointness probe
inline bool contains(const compact_set& D, const point& x);
inline std::pair<point, point> bounding_box(const compact_set& D);

inline compact_set make_union(std::vector<compact_set> members, std::uint64_t probe_seed = 41) {
    require(members.size() >= 1, errc::invalid_argument, "union requires members");
    const int d = members.front().dim;
    for (const auto& m : members)
        require(m.dim == d, errc::dimension_mismatch, "union members must share dimension");
    // pairwise disjointness: bounding-box prefilter, then a Monte-Carlo overlap
    // probe that must find no common point
    for (std::size_t i = 0; i < members.size(); ++i) {
        for (std::size_t j = i + 1; j < members.size(); ++j) {
            auto [lo1, hi1] = bounding_box(members[i]);
            auto [lo2, hi2] = bounding_box(members[j]);
            bool boxes_overlap = true;
            point lo(d), hi(d);
            for (int k = 0; k < d; ++k) {
                lo[k] = std::max(lo1[k], lo2[k]);
                hi[k] = std::min(hi1[k], hi2[k]);
                if (lo[k] >= hi[k]) boxes_overlap = false;
            }
            if (!boxes_overlap) continue;
            counter_rng rng(probe_seed, i, j);
            point x(d);
            for (int n = 0; n < 100000; ++n) {
                for (int k = 0; k < d; ++k) x[k] = rng.next_uniform(lo[k], hi[k]);
                require(!(contains(members[i], x) && contains(members[j], x)),
                        errc::invalid_argument, "union members must be pairwise disjoint");
            }
        }
    }
    compact_set s;
    s.kind = shape_kind::set_union;
    s.dim = d;
    s.members = std::move(members);
    return s;
}

inline direction make_direction(std::vector<double> theta) {
    require(!theta.empty(), errc::invalid_argument, "direction requires components");
    const double n = geo::norm(theta);
    require(std::abs(n - 1.0) <= 1e-12, errc::invalid_argument, "direction must be unit length");
    direction d;
    d.dim = static_cast<int>(theta.size());
    if (d.dim == 1) theta[0] = theta[0] > 0 ? 1.0 : -1.0;
    d.theta = std::move(theta);
    return d;
}

/// Canonical direction grid: {+1,-1} in d=1, n equispaced angles in d=2.
inline std::vector<direction> direction_grid(int d, int n = 64) {
    std::vector<direction> out;
    if (d == 1) {
        out.push_back(make_direction({1.0}));
        out.push_back(make_direction({-1.0}));
        return out;
    }
    require(d == 2, errc::unsupported, "direction_grid: only d in {1,2}");
    out.reserve(n);
    for (int k = 0; k < n; ++k) {
        const double a = 2.0 * pi * k / n;
        out.push_back(make_direction({std::cos(a), std::sin(a)}));
    }
    return out;
}

// ---------------------------------------------------------------------------
// geometric functionals

inline double volume(const compact_set& D) {
    switch (D.kind) {
    case shape_kind::interval:
        return D.b - D.a;
    case shape_kind::box: {
        double v = 1.0;
        for (std::size_t i = 0; i < D.lows.size(); ++i) v *= D.highs[i] - D.lows[i];
        return v;
    }
    case shape_kind::ball:
        return unit_ball_volume(D.dim) * std::pow(D.radius, D.dim);
    case shape_kind::polygon2d:
        return 0.5 * geo::polygon_area2(D.vertices);
    case shape_kind::set_union: {
        double v = 0.0;
        for (const auto& m : D.members) v += volume(m);
        return v;
    }
    }
    fail(errc::unsupported, "volume: unknown shape kind");
}

/// Boundary measure (generalized perimeter): 2 for an interval, circumference
/// for balls, edge-length sum for polygons, face sum for boxes.
inline double perimeter(const compact_set& D) {
    switch (D.kind) {
    case shape_kind::interval:
        return 2.0;
    case shape_kind::box: {
        double p = 0.0;
        for (std::size_t i = 0; i < D.lows.size(); ++i) {
            double face = 1.0;
            for (std::size_t j = 0; j < D.lows.size(); ++j)
                if (j != i) face *= D.highs[j] - D.lows[j];
            p += 2.0 * face;
        }
        return p;
    }
    case shape_kind::ball:
        return sphere_surface(D.dim) * std::pow(D.radius, D.dim - 1);
    case shape_kind::polygon2d: {
        double p = 0.0;
        const std::size_t n = D.vertices.size();
        for (std::size_t i = 0; i < n; ++i) {
            const auto& a = D.vertices[i];
            const auto& b = D.vertices[(i + 1) % n];
            p += std::hypot(b[0] - a[0], b[1] - a[1]);
        }
        return p;
    }
    case shape_kind::set_union: {
        double p = 0.0;
        for (const auto& m : D.members) p += perimeter(m);
        return p;
    }
    }
    fail(errc::unsupported, "perimeter: unknown shape kind");
}

inline std::pair<point, point> bounding_box(const compact_set& D) {
    switch (D.kind) {
    case shape_kind::interval:
        return {{D.a}, {D.b}};
    case shape_kind::box:
        return {D.lows, D.highs};
    case shape_kind::ball: {
        point lo = D.center, hi = D.center;
        for (int i = 0; i < D.dim; ++i) {
            lo[i] -= D.radius;
            hi[i] += D.radius;
        }
        return {lo, hi};
    }
    case shape_kind::polygon2d: {
        point lo = {D.vertices[0][0], D.vertices[0][1]};
        point hi = lo;
        for (const auto& v : D.vertices) {
            lo[0] = std::min(lo[0], v[0]);
            lo[1] = std::min(lo[1], v[1]);
            hi[0] = std::max(hi[0], v[0]);
            hi[1] = std::max(hi[1], v[1]);
        }
        return {lo, hi};
    }
    case shape_kind::set_union: {
        auto [lo, hi] = bounding_box(D.members.front());
        for (std::size_t k = 1; k < D.members.size(); ++k) {
            auto [l, h] = bounding_box(D.members[k]);
            for (int i = 0; i < D.dim; ++i) {
                lo[i] = std::min(lo[i], l[i]);
                hi[i] = std::max(hi[i], h[i]);
            }
        }
        return {lo, hi};
    }
    }
    fail(errc::unsupported, "bounding_box: unknown shape kind");
}

inline bool contains(const compact_set& D, const point& x) {
    switch (D.kind) {
    case shape_kind::interval:
        return x[0] >= D.a && x[0] <= D.b;
    case shape_kind::box:
        for (std::size_t i = 0; i < D.lows.size(); ++i)
            if (x[i] < D.lows[i] || x[i] > D.highs[i]) return false;
        return true;
    case shape_kind::ball: {
        double s = 0.0;
        for (int i = 0; i < D.dim; ++i) s += (x[i] - D.center[i]) * (x[i] - D.center[i]);
        return s <= D.radius * D.radius;
    }
    case shape_kind::polygon2d:
        return D.convex ? geo::point_in_convex_polygon(D.vertices, x[0], x[1])
                        : geo::point_in_simple_polygon(D.vertices, x[0], x[1]);
    case shape_kind::set_union:
        for (const auto& m : D.members)
            if (contains(m, x)) return true;
        return false;
    }
    return false;
}

namespace geo {
inline double point_max_distance(const point& p, const compact_set& L) {
    switch (L.kind) {
    case shape_kind::interval:
        return std::max(std::abs(p[0] - L.a), std::abs(p[0] - L.b));
    case shape_kind::box: {
        double s = 0.0;
        for (std::size_t i = 0; i < L.lows.size(); ++i) {
            const double d = std::max(std::abs(p[i] - L.lows[i]), std::abs(p[i] - L.highs[i]));
            s += d * d;
        }
        return std::sqrt(s);
    }
    case shape_kind::ball: {
        double s = 0.0;
        for (int i = 0; i < L.dim; ++i) s += (p[i] - L.center[i]) * (p[i] - L.center[i]);
        return std::sqrt(s) + L.radius;
    }
    case shape_kind::polygon2d: {
        double m = 0.0;
        for (const auto& v : L.vertices) m = std::max(m, std::hypot(p[0] - v[0], p[1] - v[1]));
        return m;
    }
    case shape_kind::set_union: {
        double m = 0.0;
        for (const auto& mem : L.members) m = std::max(m, point_max_distance(p, mem));
        return m;
    }
    }
    fail(errc::unsupported, "point_max_distance: unknown shape kind");
}

inline std::vector<point> extreme_points(const compact_set& D) {
    switch (D.kind) {
    case shape_kind::interval:
        return {{D.a}, {D.b}};
    case shape_kind::box: {
        std::vector<point> out;
        const int d = D.dim;
        for (int mask = 0; mask < (1 << d); ++mask) {
            point p(d);
            for (int i = 0; i < d; ++i) p[i] = (mask >> i) & 1 ? D.highs[i] : D.lows[i];
            out.push_back(std::move(p));
        }
        return out;
    }
    case shape_kind::polygon2d: {
        std::vector<point> out;
        for (const auto& v : D.vertices) out.push_back({v[0], v[1]});
        return out;
    }
    default:
        return {};
    }
}
} // namespace geo

/// h(D-L) = sup_{x in D, y in L} |x - y|.  Exact for interval/box/ball pairs
/// and for polygons (attained at vertices); unions take the member maximum.
inline double diameter_bound(const compact_set& D, const compact_set& L) {
    require(D.dim == L.dim, errc::dimension_mismatch, "diameter_bound: dimension mismatch");
    if (D.kind == shape_kind::set_union) {
        double m = 0.0;
        for (const auto& mem : D.members) m = std::max(m, diameter_bound(mem, L));
        return m;
    }
    if (L.kind == shape_kind::set_union) return diameter_bound(L, D);
    if (D.kind == shape_kind::ball) {
        double s = 0.0;
        if (L.kind == shape_kind::ball) {
            for (int i = 0; i < D.dim; ++i)
                s += (D.center[i] - L.center[i]) * (D.center[i] - L.center[i]);
            return std::sqrt(s) + D.radius + L.radius;
        }
        return D.radius + geo::point_max_distance(D.center, L);
    }
    if (L.kind == shape_kind::ball) return diameter_bound(L, D);
    // both are convex-hull-of-extreme-points shapes
    double m = 0.0;
    for (const auto& v : geo::extreme_points(D)) m = std::max(m, geo::point_max_distance(v, L));
    return m;
}

inline compact_set scale(const compact_set& D, double t) {
    require(t > 0.0, errc::invalid_argument, "scale factor must be positive");
    compact_set s = D;
    switch (D.kind) {
    case shape_kind::interval:
        s.a *= t;
        s.b *= t;
        break;
    case shape_kind::box:
        for (auto& v : s.lows) v *= t;
        for (auto& v : s.highs) v *= t;
        break;
    case shape_kind::ball:
        for (auto& v : s.center) v *= t;
        s.radius *= t;
        break;
    case shape_kind::polygon2d:
        for (auto& v : s.vertices) {
            v[0] *= t;
            v[1] *= t;
        }
        break;
    case shape_kind::set_union:
        for (auto& m : s.members) m = scale(m, t);
        break;
    }
    return s;
}

// ---------------------------------------------------------------------------
// covariograms

namespace geo {

// 1D overlap of [a1,b1] and [a2+s, b2+s], and its s-derivative (a.e.).
inline double overlap1d(double a1, double b1, double a2, double b2, double s) {
    return std::max(0.0, std::min(b1, b2 + s) - std::max(a1, a2 + s));
}

inline double overlap1d_deriv(double a1, double b1, double a2, double b2, double s) {
    if (overlap1d(a1, b1, a2, b2, s) <= 0.0) return 0.0;
    const double d_hi = (b2 + s < b1) ? 1.0 : 0.0;
    const double d_lo = (a2 + s > a1) ? 1.0 : 0.0;
    return d_hi - d_lo;
}

inline std::vector<std::array<double, 2>> box_to_polygon(const compact_set& B) {
    return {{B.lows[0], B.lows[1]},
            {B.highs[0], B.lows[1]},
            {B.highs[0], B.highs[1]},
            {B.lows[0], B.highs[1]}};
}

} // namespace geo

/// Whether covariogram_exact supports the pair.
inline bool has_exact_covariogram(const compact_set& D, const compact_set& L) {
    if (D.dim != L.dim) return false;
    if (D.kind == shape_kind::set_union) {
        for (const auto& m : D.members)
            if (!has_exact_covariogram(m, L)) return false;
        return true;
    }
    if (L.kind == shape_kind::set_union) return has_exact_covariogram(L, D);
    if (D.kind == shape_kind::interval && L.kind == shape_kind::interval) return true;
    if (D.kind == shape_kind::box && L.kind == shape_kind::box) return true;
    if (D.kind == shape_kind::ball && L.kind == shape_kind::ball) return D.dim <= 3;
    const bool d_poly = D.kind == shape_kind::polygon2d ? D.convex : D.kind == shape_kind::box;
    const bool l_poly = L.kind == shape_kind::polygon2d ? L.convex : L.kind == shape_kind::box;
    return D.dim == 2 && d_poly && l_poly &&
           (D.kind == shape_kind::polygon2d || L.kind == shape_kind::polygon2d);
}

/// g_{D,L}(z) = Vol(D cap (L+z)) for the exact pair vocabulary.
inline double covariogram_exact(const compact_set& D, const compact_set& L, const point& z) {
    require(D.dim == L.dim && static_cast<int>(z.size()) == D.dim, errc::dimension_mismatch,
            "covariogram_exact: dimension mismatch");
    if (D.kind == shape_kind::set_union) {
        double s = 0.0;
        for (const auto& m : D.members) s += covariogram_exact(m, L, z);
        return s;
    }
    if (L.kind == shape_kind::set_union) {
        double s = 0.0;
        point mz(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) mz[i] = -z[i];
        for (const auto& m : L.members) s += covariogram_exact(m, D, mz);
        return s;
    }
    if (D.kind == shape_kind::interval && L.kind == shape_kind::interval)
        return geo::overlap1d(D.a, D.b, L.a, L.b, z[0]);
    if (D.kind == shape_kind::box && L.kind == shape_kind::box) {
        double v = 1.0;
        for (int i = 0; i < D.dim; ++i)
            v *= geo::overlap1d(D.lows[i], D.highs[i], L.lows[i], L.highs[i], z[i]);
        return v;
    }
    if (D.kind == shape_kind::ball && L.kind == shape_kind::ball) {
        double s = 0.0;
        for (int i = 0; i < D.dim; ++i) {
            const double d = L.center[i] + z[i] - D.center[i];
            s += d * d;
        }
        return geo::ball_intersection_volume(D.dim, D.radius, L.radius, std::sqrt(s));
    }
    if (D.dim == 2 &&
        (D.kind == shape_kind::polygon2d || D.kind == shape_kind::box) &&
        (L.kind == shape_kind::polygon2d || L.kind == shape_kind::box)) {
        auto pd = D.kind == shape_kind::box ? geo::box_to_polygon(D) : D.vertices;
        auto pl = L.kind == shape_kind::box ? geo::box_to_polygon(L) : L.vertices;
        require(D.kind == shape_kind::box || D.convex, errc::unsupported,
                "covariogram_exact: non-convex polygon");
        require(L.kind == shape_kind::box || L.convex, errc::unsupported,
                "covariogram_exact: non-convex polygon");
        for (auto& v : pl) {
            v[0] += z[0];
            v[1] += z[1];
        }
        const auto inter = geo::clip_convex(pd, pl);
        return inter.size() >= 3 ? 0.5 * std::abs(geo::polygon_area2(inter)) : 0.0;
    }
    fail(errc::unsupported, "covariogram_exact: unsupported shape pair");
}

struct mc_estimate {
    double value = 0.0;
    double stderr_ = 0.0;
};

/// Monte-Carlo covariogram: Vol(bbox(D)) * mean(1_D(X) 1_{L+z}(X)), X uniform
/// on the bounding box of D, stratified along axis 0.  Deterministic per
/// (seed, stratum count); stderr from the binomial variance.
inline mc_estimate covariogram_mc(const compact_set& D, const compact_set& L, const point& z,
                                  std::size_t n = 1000000, std::uint64_t seed = 1,
                                  std::size_t strata = 64) {
    require(D.dim == L.dim && static_cast<int>(z.size()) == D.dim, errc::dimension_mismatch,
            "covariogram_mc: dimension mismatch");
    require(n >= 1000, errc::invalid_argument, "covariogram_mc: n must be >= 1e3");
    if (geo::norm(z) > diameter_bound(D, L)) return {0.0, 0.0};
    auto [lo, hi] = bounding_box(D);
    double vol_box = 1.0;
    for (int i = 0; i < D.dim; ++i) {
        require(hi[i] > lo[i], errc::invalid_argument, "covariogram_mc: degenerate bounding box");
        vol_box *= hi[i] - lo[i];
    }
    strata = std::max<std::size_t>(1, std::min(strata, n / 64));
    const std::size_t per = n / strata;
    std::size_t hits = 0, total = 0;
    point x(D.dim), xs(D.dim);
    const double w0 = (hi[0] - lo[0]) / strata;
    for (std::size_t s = 0; s < strata; ++s) {
        counter_rng rng(seed, s);
        for (std::size_t k = 0; k < per; ++k) {
            x[0] = lo[0] + w0 * (s + rng.next_uniform());
            for (int i = 1; i < D.dim; ++i) x[i] = rng.next_uniform(lo[i], hi[i]);
            ++total;
            if (!contains(D, x)) continue;
            for (int i = 0; i < D.dim; ++i) xs[i] = x[i] - z[i];
            if (contains(L, xs)) ++hits;
        }
    }
    const double p = static_cast<double>(hits) / total;
    return {vol_box * p, vol_box * std::sqrt(p * (1.0 - p) / total)};
}

/// Exact if the pair supports it, otherwise Monte-Carlo.
inline mc_estimate covariogram_auto(const compact_set& D, const compact_set& L, const point& z,
                                    std::size_t n = 1000000, std::uint64_t seed = 1) {
    if (has_exact_covariogram(D, L)) return {covariogram_exact(D, L, z), 0.0};
    return covariogram_mc(D, L, z, n, seed);
}

// ---------------------------------------------------------------------------
// radial profiles

namespace geo {

/// Analytic directional derivative dg/dl at z = l*theta, where available.
inline std::optional<double> exact_directional_deriv(const compact_set& D, const compact_set& L,
                                                     const point& z, const direction& th) {
    if (D.kind == shape_kind::set_union) {
        double s = 0.0;
        for (const auto& m : D.members) {
            auto d = exact_directional_deriv(m, L, z, th);
            if (!d) return std::nullopt;
            s += *d;
        }
        return s;
    }
    if (L.kind == shape_kind::set_union) {
        double s = 0.0;
        for (const auto& m : L.members) {
            auto d = exact_directional_deriv(D, m, z, th);
            if (!d) return std::nullopt;
            s += *d;
        }
        return s;
    }
    if (D.kind == shape_kind::interval && L.kind == shape_kind::interval)
        return th.theta[0] * overlap1d_deriv(D.a, D.b, L.a, L.b, z[0]);
    if (D.kind == shape_kind::box && L.kind == shape_kind::box) {
        double s = 0.0;
        for (int i = 0; i < D.dim; ++i) {
            double term = th.theta[i] *
                          overlap1d_deriv(D.lows[i], D.highs[i], L.lows[i], L.highs[i], z[i]);
            if (term == 0.0) continue;
            for (int j = 0; j < D.dim; ++j)
                if (j != i)
                    term *= overlap1d(D.lows[j], D.highs[j], L.lows[j], L.highs[j], z[j]);
            s += term;
        }
        return s;
    }
    if (D.kind == shape_kind::ball && L.kind == shape_kind::ball && D.dim <= 3) {
        point delta(D.dim);
        for (int i = 0; i < D.dim; ++i) delta[i] = L.center[i] + z[i] - D.center[i];
        const double s = norm(delta);
        if (s == 0.0) return 0.0;
        const double dvds = ball_intersection_dvds(D.dim, D.radius, L.radius, s);
        const double dsdl = dot(th.theta, delta) / s;
        return dvds * dsdl;
    }
    return std::nullopt;
}

/// Radii where the directional derivative along theta may jump.
inline std::vector<double> derivative_kinks(const compact_set& D, const compact_set& L,
                                            const direction& th, double h) {
    std::vector<double> out;
    auto push = [&](double l) {
        if (l > 1e-12 * h && l < h * (1.0 - 1e-12)) out.push_back(l);
    };
    if (D.kind == shape_kind::set_union) {
        for (const auto& m : D.members)
            for (double l : derivative_kinks(m, L, th, h)) push(l);
        return out;
    }
    if (L.kind == shape_kind::set_union) {
        for (const auto& m : L.members)
            for (double l : derivative_kinks(D, m, th, h)) push(l);
        return out;
    }
    if ((D.kind == shape_kind::interval && L.kind == shape_kind::interval) ||
        (D.kind == shape_kind::box && L.kind == shape_kind::box)) {
        const int d = D.dim;
        for (int i = 0; i < d; ++i) {
            if (std::abs(th.theta[i]) < 1e-15) continue;
            const double a1 = d == 1 ? D.a : D.lows[i];
            const double b1 = d == 1 ? D.b : D.highs[i];
            const double a2 = d == 1 ? L.a : L.lows[i];
            const double b2 = d == 1 ? L.b : L.highs[i];
            for (double s : {a1 - a2, a1 - b2, b1 - a2, b1 - b2}) push(s / th.theta[i]);
        }
        return out;
    }
    if (D.kind == shape_kind::ball && L.kind == shape_kind::ball) {
        point delta(D.dim);
        for (int i = 0; i < D.dim; ++i) delta[i] = L.center[i] - D.center[i];
        const double b = dot(th.theta, delta);
        const double c0 = dot(delta, delta);
        for (double sk : {std::abs(D.radius - L.radius), D.radius + L.radius, 0.0}) {
            // |delta + l theta| = sk  =>  l^2 + 2 b l + c0 - sk^2 = 0
            const double disc = b * b - (c0 - sk * sk);
            if (disc < 0.0) continue;
            const double r = std::sqrt(disc);
            push(-b + r);
            push(-b - r);
        }
        return out;
    }
    return out;
}

} // namespace geo

enum class profile_method { exact, monte_carlo };

/// Sampled l -> g_{D,L}(l theta) and -d/dl g on a graded grid shared across
/// directions.  `stderrs` are zero on the exact path.
struct covariogram_profile {
    compact_set D, L;
    std::vector<direction> thetas;
    std::vector<double> ls;
    std::vector<std::vector<double>> values;
    std::vector<std::vector<double>> derivs; // -dg/dl
    std::vector<std::vector<double>> stderrs;
    profile_method method = profile_method::exact;
    double h = 0.0;
};

namespace geo {

/// Graded grid on [0,h]: geometric from h*1e-4 (so an l^alpha singularity at 0
/// is resolved), with kink radii bracketed by +-eps node pairs and a graded
/// cluster on both sides (ball-pair derivatives have sqrt-type behavior at
/// tangency radii, which plain grids resolve poorly).
inline std::vector<double> graded_grid(double h, std::size_t n_l,
                                       const std::vector<double>& kinks) {
    require(n_l >= 16, errc::invalid_argument, "radial grid requires n_l >= 16");
    std::vector<double> g;
    g.push_back(0.0);
    const double lmin = h * 1e-4;
    const double ratio = std::pow(1e4, 1.0 / static_cast<double>(n_l - 2));
    for (std::size_t k = 0; k + 2 <= n_l; ++k) {
        const double l = lmin * std::pow(ratio, static_cast<double>(k));
        g.push_back(std::min(l, h));
    }
    g.push_back(h);
    const double eps = 1e-9 * h;
    for (double k : kinks) {
        for (double spread = eps; spread <= 0.05 * h; spread *= 2.5) {
            if (k - spread > 0.0) g.push_back(k - spread);
            if (k + spread < h) g.push_back(k + spread);
        }
    }
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end(),
                        [&](double x, double y) { return std::abs(x - y) < 1e-12 * h; }),
            g.end());
    if (g.back() < h) g.push_back(h);
    g.back() = h;
    return g;
}

} // namespace geo

/// Sample the covariogram profile of (D,L) along `thetas`.
/// Derivatives are analytic for interval/box/ball pairs, central finite
/// differences otherwise (step min(local spacing, h*1e-3)).
inline covariogram_profile radial_profile(const compact_set& D, const compact_set& L,
                                          std::vector<direction> thetas, std::size_t n_l = 256,
                                          profile_method method = profile_method::exact,
                                          std::size_t mc_n = 200000, std::uint64_t seed = 1) {
    require(!thetas.empty(), errc::invalid_argument, "radial_profile: need directions");
    for (const auto& th : thetas)
        require(th.dim == D.dim, errc::dimension_mismatch, "radial_profile: direction dim");
    if (method == profile_method::exact)
        require(has_exact_covariogram(D, L), errc::unsupported,
                "radial_profile: pair has no exact covariogram; use monte_carlo");

    covariogram_profile p;
    p.D = D;
    p.L = L;
    p.h = diameter_bound(D, L);
    p.method = method;

    // gather kinks across requested directions so the grid is shared
    std::vector<double> kinks;
    for (const auto& th : thetas) {
        auto k = geo::derivative_kinks(D, L, th, p.h);
        kinks.insert(kinks.end(), k.begin(), k.end());
    }
    p.ls = geo::graded_grid(p.h, n_l, kinks);
    p.thetas = std::move(thetas);

    const std::size_t m = p.ls.size();
    auto eval = [&](const point& z) -> mc_estimate {
        if (method == profile_method::exact) return {covariogram_exact(D, L, z), 0.0};
        std::uint64_t node_tag =
            static_cast<std::uint64_t>(std::llround(geo::norm(z) / p.h * 1e6));
        return covariogram_mc(D, L, z, mc_n, seed + node_tag);
    };

    for (std::size_t ti = 0; ti < p.thetas.size(); ++ti) {
        const auto& th = p.thetas[ti];
        std::vector<double> vals(m), ders(m), errs(m, 0.0);
        point z(D.dim);
        auto at = [&](double l) {
            for (int i = 0; i < D.dim; ++i) z[i] = l * th.theta[i];
            return eval(z);
        };
        for (std::size_t i = 0; i < m; ++i) {
            const auto e = at(p.ls[i]);
            vals[i] = e.value;
            errs[i] = e.stderr_;
        }
        const bool analytic =
            method == profile_method::exact &&
            geo::exact_directional_deriv(D, L, point(D.dim, 0.0), th).has_value();
        for (std::size_t i = 0; i < m; ++i) {
            const double l = p.ls[i];
            if (analytic) {
                // nudge into (0,h) so endpoint/kink nodes pick the one-sided
                // limit facing the integration domain
                const double nudge = 1e-11 * p.h;
                const double le = std::min(l + nudge, p.h - nudge);
                for (int k = 0; k < D.dim; ++k) z[k] = le * th.theta[k];
                ders[i] = -*geo::exact_directional_deriv(D, L, z, th);
                continue;
            }
            const double spacing = i + 1 < m ? p.ls[i + 1] - l : l - p.ls[i - 1];
            const double step = std::min(spacing, p.h * 1e-3);
            double lm = l - step, lp = l + step;
            if (lm < 0.0) lm = l;       // one-sided at the left edge
            if (lp > p.h) lp = p.h;     // and at the right edge
            const auto gm = at(lm), gp = at(lp);
            ders[i] = (gm.value - gp.value) / (lp - lm);
            if (method == profile_method::monte_carlo)
                errs[i] = std::max(errs[i], std::hypot(gm.stderr_, gp.stderr_) / (lp - lm));
        }
        p.values.push_back(std::move(vals));
        p.derivs.push_back(std::move(ders));
        p.stderrs.push_back(std::move(errs));
    }
    return p;
}

// ---------------------------------------------------------------------------
// Fourier decay of indicator functions

struct fourier_decay_result {
    std::vector<direction> directions;
    std::vector<double> exponents;   // per-direction envelope slope
    double worst_exponent = 0.0;     // max over directions
    bool satisfies_half_d = false;   // worst <= -d/2 - margin
};

namespace geo {

inline double sinc_factor(double lam, double lo, double hi) {
    // |int_lo^hi e^{i lam x} dx|
    if (std::abs(lam) < 1e-14) return hi - lo;
    return std::abs(2.0 * std::sin(0.5 * lam * (hi - lo)) / lam);
}

/// |F[1_D](r theta)| in closed form for balls and boxes (d <= 2 for balls).
inline double indicator_ft_modulus(const compact_set& D, double r, const direction& th) {
    switch (D.kind) {
    case shape_kind::interval:
        return sinc_factor(r * th.theta[0], D.a, D.b);
    case shape_kind::box: {
        double v = 1.0;
        for (int i = 0; i < D.dim; ++i) v *= sinc_factor(r * th.theta[i], D.lows[i], D.highs[i]);
        return v;
    }
    case shape_kind::ball: {
        if (D.dim == 1) return sinc_factor(r, -D.radius, D.radius);
        require(D.dim == 2, errc::unsupported, "indicator FT: ball only for d <= 2");
        const double s = r * D.radius;
        if (s < 1e-12) return pi * D.radius * D.radius;
        return std::abs(2.0 * pi * D.radius * D.radius * bessel_j1(s) / s);
    }
    default:
        fail(errc::unsupported, "indicator FT: unsupported shape");
    }
}

} // namespace geo

/// Fits the sup-envelope decay exponent of |F[1_D]| along each direction by
/// log-log regression and reports whether every direction decays strictly
/// faster than |x|^{-d/2}.
inline fourier_decay_result indicator_fourier_decay(const compact_set& D,
                                                    const std::vector<double>& radii,
                                                    std::vector<direction> dirs = {},
                                                    double margin = 0.1) {
    require(D.dim <= 2, errc::unsupported, "indicator_fourier_decay: d in {1,2}");
    require(D.kind == shape_kind::ball || D.kind == shape_kind::box ||
                D.kind == shape_kind::interval,
            errc::unsupported, "indicator_fourier_decay: ball or box only");
    require(radii.size() >= 64, errc::invalid_argument, "need a dense radii grid");
    if (dirs.empty()) dirs = direction_grid(D.dim, D.dim == 1 ? 1 : 8);
    if (D.dim == 1) dirs.resize(1);

    fourier_decay_result res;
    res.directions = dirs;
    res.worst_exponent = -std::numeric_limits<double>::infinity();
    for (const auto& th : dirs) {
        std::vector<double> mod(radii.size());
        for (std::size_t i = 0; i < radii.size(); ++i)
            mod[i] = geo::indicator_ft_modulus(D, radii[i], th);
        // decreasing sup-envelope from the right
        std::vector<double> env(mod.size());
        double run = 0.0;
        for (std::size_t i = mod.size(); i-- > 0;) {
            run = std::max(run, mod[i]);
            env[i] = run;
        }
        // least squares of log env vs log r over the middle of the grid
        const std::size_t i0 = radii.size() / 4, i1 = 3 * radii.size() / 4;
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        std::size_t n = 0;
        for (std::size_t i = i0; i < i1; ++i) {
            if (env[i] <= 0.0) continue;
            const double x = std::log(radii[i]), y = std::log(env[i]);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            ++n;
        }
        require(n >= 8, errc::invalid_argument, "fourier decay fit: too few usable nodes");
        const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        res.exponents.push_back(slope);
        res.worst_exponent = std::max(res.worst_exponent, slope);
    }
    res.satisfies_half_d = res.worst_exponent <= -0.5 * D.dim - margin;
    return res;
}

/// Uniform sample from D (rejection from the bounding box; direct for balls).
inline point sample_uniform(const compact_set& D, counter_rng& rng) {
    switch (D.kind) {
    case shape_kind::interval:
        return {rng.next_uniform(D.a, D.b)};
    case shape_kind::box: {
        point x(D.dim);
        for (int i = 0; i < D.dim; ++i) x[i] = rng.next_uniform(D.lows[i], D.highs[i]);
        return x;
    }
    case shape_kind::ball: {
        point x(D.dim);
        // isotropic direction via normals, radius via inverse CDF
        double n2 = 0.0;
        for (int i = 0; i < D.dim; ++i) {
            x[i] = rng.next_normal();
            n2 += x[i] * x[i];
        }
        const double r = D.radius * std::pow(rng.next_uniform(), 1.0 / D.dim);
        const double scale_ = n2 > 0 ? r / std::sqrt(n2) : 0.0;
        for (int i = 0; i < D.dim; ++i) x[i] = D.center[i] + x[i] * scale_;
        return x;
    }
    case shape_kind::polygon2d: {
        auto [lo, hi] = bounding_box(D);
        point x(2);
        for (int tries = 0; tries < 100000; ++tries) {
            x[0] = rng.next_uniform(lo[0], hi[0]);
            x[1] = rng.next_uniform(lo[1], hi[1]);
            if (contains(D, x)) return x;
        }
        fail(errc::invalid_argument, "sample_uniform: rejection failed (degenerate polygon?)");
    }
    case shape_kind::set_union: {
        double total = volume(D);
        double u = rng.next_uniform() * total;
        for (const auto& m : D.members) {
            const double v = volume(m);
            if (u < v || &m == &D.members.back()) return sample_uniform(m, rng);
            u -= v;
        }
        return sample_uniform(D.members.back(), rng);
    }
    }
    fail(errc::unsupported, "sample_uniform: unknown shape kind");
}

} // namespace setcov
