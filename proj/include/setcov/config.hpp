#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "setcov/common.hpp"
#include "setcov/geometry.hpp"
#include "setcov/hermite.hpp"
#include "setcov/kernels.hpp"

namespace setcov {

using json = nlohmann::json;

/// FNV-1a digest of the canonical (key-sorted) config serialization; embedded
/// in every report so outputs are traceable to their configuration.
inline std::string config_hash(const json& cfg) {
    const std::string s = cfg.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Shape documents:
///   {"kind":"interval","a":0,"b":1}
///   {"kind":"box","lows":[0,0],"highs":[1,2]}
///   {"kind":"ball","dim":2,"center":[0,0],"radius":1.0}
///   {"kind":"polygon","vertices":[[0,0],[1,0],[0,1]]}
///   {"kind":"union","members":[...]}
inline compact_set parse_shape(const json& j) {
    require(j.is_object() && j.contains("kind"), errc::config_error,
            "shape document must be an object with a 'kind'");
    const std::string kind = j.at("kind").get<std::string>();
    try {
        if (kind == "interval") return make_interval(j.at("a").get<double>(), j.at("b").get<double>());
        if (kind == "box")
            return make_box(j.at("lows").get<std::vector<double>>(),
                            j.at("highs").get<std::vector<double>>());
        if (kind == "ball")
            return make_ball(j.at("center").get<std::vector<double>>(),
                             j.at("radius").get<double>());
        if (kind == "polygon") {
            std::vector<std::array<double, 2>> verts;
            for (const auto& v : j.at("vertices"))
                verts.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
            return make_polygon(std::move(verts));
        }
        if (kind == "union") {
            std::vector<compact_set> members;
            for (const auto& m : j.at("members")) members.push_back(parse_shape(m));
            return make_union(std::move(members));
        }
    } catch (const json::exception& e) {
        fail(errc::config_error, std::string("malformed shape document: ") + e.what());
    }
    fail(errc::config_error, "unknown shape kind: " + kind);
}

inline json shape_to_json(const compact_set& s) {
    json j;
    switch (s.kind) {
    case shape_kind::interval:
        j["kind"] = "interval";
        j["a"] = s.a;
        j["b"] = s.b;
        break;
    case shape_kind::box:
        j["kind"] = "box";
        j["lows"] = s.lows;
        j["highs"] = s.highs;
        break;
    case shape_kind::ball:
        j["kind"] = "ball";
        j["dim"] = s.dim;
        j["center"] = s.center;
        j["radius"] = s.radius;
        break;
    case shape_kind::polygon2d: {
        j["kind"] = "polygon";
        json verts = json::array();
        for (const auto& v : s.vertices) verts.push_back({v[0], v[1]});
        j["vertices"] = verts;
        break;
    }
    case shape_kind::set_union: {
        j["kind"] = "union";
        json members = json::array();
        for (const auto& m : s.members) members.push_back(shape_to_json(m));
        j["members"] = members;
        break;
    }
    }
    return j;
}

/// A parsed covariance model: either a plain radial kernel or a
/// Hermite-composed one (base correlation + expansion).
struct kernel_model {
    radial_kernel kernel;                   // the K used for w_t and covariances
    radial_kernel base;                     // base correlation (equals kernel if plain)
    std::optional<hermite_expansion> expansion;
    bool composed = false;
};

/// Kernel documents: a spec string ("fgn:H=0.3", "berry_j0", ...) or
///   {"base":"berry_j0","phi":"hermite:q=2"}
///   {"base":"berry_j0","coeffs":{"2":1.0,"3":1.0}}
inline kernel_model parse_kernel_model(const json& j) {
    kernel_model m;
    if (j.is_string()) {
        m.kernel = parse_kernel(j.get<std::string>());
        m.base = m.kernel;
        return m;
    }
    require(j.is_object() && j.contains("base"), errc::config_error,
            "kernel document must be a spec string or an object with 'base'");
    m.base = parse_kernel(j.at("base").get<std::string>());
    m.composed = true;
    if (j.contains("phi")) {
        m.expansion = make_phi(j.at("phi").get<std::string>()).expansion;
    } else if (j.contains("coeffs")) {
        std::map<int, double> coeffs;
        for (const auto& [k, v] : j.at("coeffs").items())
            coeffs[std::stoi(k)] = v.get<double>();
        m.expansion = expansion_from_coeffs(coeffs);
    } else {
        fail(errc::config_error, "composed kernel needs 'phi' or 'coeffs'");
    }
    m.kernel = make_composed_kernel(*m.expansion, m.base);
    return m;
}

/// phi documents: spec string or {"coeffs":{"2":1.0,"6":0.5}}.
inline phi_spec parse_phi(const json& j) {
    if (j.is_string()) return make_phi(j.get<std::string>());
    require(j.is_object() && j.contains("coeffs"), errc::config_error,
            "phi document must be a spec string or {\"coeffs\":{...}}");
    std::map<int, double> coeffs;
    for (const auto& [k, v] : j.at("coeffs").items()) coeffs[std::stoi(k)] = v.get<double>();
    return make_phi_from_coeffs(coeffs);
}

inline json load_config_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), errc::config_error, "cannot open config file: " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(errc::config_error, std::string("config parse error in ") + path + ": " + e.what());
    }
}

// small typed accessors with defaults
inline double cfg_num(const json& j, const std::string& key, double dflt) {
    return j.contains(key) ? j.at(key).get<double>() : dflt;
}
inline std::size_t cfg_size(const json& j, const std::string& key, std::size_t dflt) {
    return j.contains(key) ? j.at(key).get<std::size_t>() : dflt;
}
inline std::string cfg_str(const json& j, const std::string& key, const std::string& dflt) {
    return j.contains(key) ? j.at(key).get<std::string>() : dflt;
}
inline double cfg_tol(const json& j, const std::string& key, double dflt) {
    if (!j.contains("tolerances")) return dflt;
    const auto& t = j.at("tolerances");
    return t.contains(key) ? t.at(key).get<double>() : dflt;
}

} // namespace setcov
