#pragma once

#include "cbn/baselines.hpp"

#include <json.hpp>

#include <fstream>
#include <set>

namespace cbn {

using Json = nlohmann::json;

struct CaseConfig {
    std::string name = "case";
    int dim = 2;
    std::array<int, 3> coarse{1, 1, 1};
    std::array<int, 3> fine{1, 1, 1};
    std::array<double, 3> size{1.0, 1.0, 1.0};

    ElasticModel model = ElasticModel::PlaneStress;
    Isotropic matrix_mat{1e3, 0.3};
    std::vector<Region> regions;
    std::string raw_modulus_file;

    BridgeSpec bridge;
    ProblemBcs bcs;
    SolverOptions solver;

    std::string method = "cbn";
    std::vector<std::string> methods;  // compare subcommand

    bool write_fields = true;   // VTK outputs
    bool with_benchmark = true; // compute the fine reference in `run`
    std::uint64_t seed = 0;
    std::string cache_dir;
    long substructure_cap = 20000;
    long boundary_map_cap = 2000;
    int threads = 1;
};

namespace detail {

inline void require_keys(const Json& j, const std::string& path,
                         const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError("config: " + path + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("config: unknown key '" + path + "." + it.key() + "'");
}

template <std::size_t N>
std::array<double, 3> vec_field(const Json& j, const std::string& path) {
    if (!j.is_array() || j.size() != N)
        throw ConfigError("config: " + path + " must be an array of " + std::to_string(N));
    std::array<double, 3> out{0, 0, 0};
    for (std::size_t i = 0; i < N; ++i) out[i] = j[i].get<double>();
    return out;
}

inline Vec3 vec3_field(const Json& j, const std::string& path, int dim) {
    if (!j.is_array() || int(j.size()) != dim)
        throw ConfigError("config: " + path + " must be an array of " + std::to_string(dim));
    Vec3 out = Vec3::Zero();
    for (int i = 0; i < dim; ++i) out[i] = j[i].get<double>();
    return out;
}

inline int side_from_name(const std::string& s, const std::string& path) {
    if (s == "xmin" || s == "left") return 0;
    if (s == "xmax" || s == "right") return 1;
    if (s == "ymin" || s == "bottom") return 2;
    if (s == "ymax" || s == "top") return 3;
    if (s == "zmin" || s == "back") return 4;
    if (s == "zmax" || s == "front") return 5;
    throw ConfigError("config: " + path + ": unknown side '" + s + "'");
}

inline int comp_from_name(const std::string& s, const std::string& path) {
    if (s == "x") return 0;
    if (s == "y") return 1;
    if (s == "z") return 2;
    if (s == "all") return -1;
    throw ConfigError("config: " + path + ": unknown component '" + s + "'");
}

inline Isotropic isotropic_from(const Json& j, const std::string& path) {
    require_keys(j, path, {"E", "nu", "K", "G"});
    if (j.contains("K") || j.contains("G")) {
        if (!j.contains("K") || !j.contains("G") || j.contains("E") || j.contains("nu"))
            throw ConfigError("config: " + path + ": give either (E, nu) or (K, G)");
        return from_bulk_shear(j["K"].get<double>(), j["G"].get<double>());
    }
    Isotropic m;
    if (j.contains("E")) m.E = j["E"].get<double>();
    if (j.contains("nu")) m.nu = j["nu"].get<double>();
    return m;
}

}  // namespace detail

inline CaseConfig parse_config(const Json& j) {
    using detail::require_keys;
    CaseConfig c;
    require_keys(j, "$", {"name", "mesh", "material", "bridge", "bcs", "solver", "method",
                          "methods", "output", "seed", "cache_dir", "threads",
                          "substructure_cap", "boundary_map_cap"});
    if (j.contains("name")) c.name = j["name"].get<std::string>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("cache_dir")) c.cache_dir = j["cache_dir"].get<std::string>();
    if (j.contains("threads")) c.threads = j["threads"].get<int>();
    if (j.contains("substructure_cap")) c.substructure_cap = j["substructure_cap"].get<long>();
    if (j.contains("boundary_map_cap")) c.boundary_map_cap = j["boundary_map_cap"].get<long>();

    if (!j.contains("mesh")) throw ConfigError("config: missing 'mesh'");
    {
        const auto& m = j["mesh"];
        require_keys(m, "mesh", {"dim", "coarse", "fine", "size"});
        c.dim = m.contains("dim") ? m["dim"].get<int>() : 2;
        if (c.dim != 2 && c.dim != 3) throw ConfigError("config: mesh.dim must be 2 or 3");
        auto geti = [&](const char* key, std::array<int, 3>& out) {
            if (!m.contains(key)) throw ConfigError(std::string("config: missing mesh.") + key);
            const auto& a = m[key];
            if (!a.is_array() || int(a.size()) != c.dim)
                throw ConfigError(std::string("config: mesh.") + key + " must have dim entries");
            for (int i = 0; i < c.dim; ++i) out[i] = a[i].get<int>();
        };
        geti("coarse", c.coarse);
        geti("fine", c.fine);
        if (m.contains("size")) {
            const auto& a = m["size"];
            if (!a.is_array() || int(a.size()) != c.dim)
                throw ConfigError("config: mesh.size must have dim entries");
            for (int i = 0; i < c.dim; ++i) c.size[i] = a[i].get<double>();
        }
    }

    if (j.contains("material")) {
        const auto& m = j["material"];
        require_keys(m, "material", {"model", "matrix", "regions", "raw_file"});
        if (m.contains("model")) {
            const std::string s = m["model"].get<std::string>();
            if (s == "plane_stress") c.model = ElasticModel::PlaneStress;
            else if (s == "plane_strain") c.model = ElasticModel::PlaneStrain;
            else if (s == "3d") c.model = ElasticModel::ThreeD;
            else throw ConfigError("config: material.model must be plane_stress, plane_strain or 3d");
        } else if (c.dim == 3) {
            c.model = ElasticModel::ThreeD;
        }
        if (c.dim == 3 && c.model != ElasticModel::ThreeD)
            throw ConfigError("config: material.model must be 3d for dim=3");
        if (c.dim == 2 && c.model == ElasticModel::ThreeD)
            throw ConfigError("config: material.model 3d requires dim=3");
        if (m.contains("matrix")) c.matrix_mat = detail::isotropic_from(m["matrix"], "material.matrix");
        if (m.contains("raw_file")) c.raw_modulus_file = m["raw_file"].get<std::string>();
        if (m.contains("regions")) {
            int ri = 0;
            for (const auto& r : m["regions"]) {
                const std::string path = "material.regions[" + std::to_string(ri++) + "]";
                require_keys(r, path, {"shape", "frame", "center", "semi_axes", "half_size",
                                       "angle", "axis", "range", "E", "nu", "K", "G"});
                Region rg;
                const std::string shape = r.contains("shape") ? r["shape"].get<std::string>() : "ellipse";
                if (shape == "ellipse") rg.shape = Region::Shape::Ellipse;
                else if (shape == "rectangle") rg.shape = Region::Shape::Rectangle;
                else if (shape == "slab") rg.shape = Region::Shape::Slab;
                else throw ConfigError("config: " + path + ".shape must be ellipse, rectangle or slab");
                const std::string frame = r.contains("frame") ? r["frame"].get<std::string>() : "element";
                if (frame == "element") rg.frame = Region::Frame::Element;
                else if (frame == "global") rg.frame = Region::Frame::Global;
                else throw ConfigError("config: " + path + ".frame must be element or global");
                if (rg.shape == Region::Shape::Slab) {
                    if (!r.contains("axis") || !r.contains("range"))
                        throw ConfigError("config: " + path + ": slab needs axis and range");
                    rg.axis = detail::comp_from_name(r["axis"].get<std::string>(), path + ".axis");
                    if (rg.axis < 0) throw ConfigError("config: " + path + ".axis must be x, y or z");
                    const auto rr = detail::vec_field<2>(r["range"], path + ".range");
                    rg.lo = rr[0];
                    rg.hi = rr[1];
                } else {
                    if (r.contains("center")) rg.center = detail::vec3_field(r["center"], path + ".center", c.dim);
                    const char* key = rg.shape == Region::Shape::Ellipse ? "semi_axes" : "half_size";
                    if (r.contains(key)) rg.half_size = detail::vec3_field(r[key], path + "." + key, c.dim);
                    if (r.contains("angle")) rg.angle = r["angle"].get<double>();
                }
                Json mat_part = Json::object();
                for (const char* k : {"E", "nu", "K", "G"})
                    if (r.contains(k)) mat_part[k] = r[k];
                if (mat_part.empty())
                    throw ConfigError("config: " + path + ": region needs E, nu (or K, G)");
                rg.mat = detail::isotropic_from(mat_part, path);
                c.regions.push_back(rg);
            }
        }
    }

    if (j.contains("bridge")) {
        const auto& b = j["bridge"];
        require_keys(b, "bridge", {"policy", "per_side"});
        if (b.contains("policy")) {
            const std::string s = b["policy"].get<std::string>();
            if (s == "corners") c.bridge.policy = BridgePolicy::CornersOnly;
            else if (s == "per_side") c.bridge.policy = BridgePolicy::PerSide;
            else if (s == "all") c.bridge.policy = BridgePolicy::AllBoundary;
            else throw ConfigError("config: bridge.policy must be corners, per_side or all");
        }
        if (b.contains("per_side")) c.bridge.per_side = b["per_side"].get<int>();
    }

    if (j.contains("bcs")) {
        const auto& b = j["bcs"];
        require_keys(b, "bcs", {"dirichlet", "neumann"});
        if (b.contains("dirichlet")) {
            int di = 0;
            for (const auto& d : b["dirichlet"]) {
                const std::string path = "bcs.dirichlet[" + std::to_string(di++) + "]";
                require_keys(d, path, {"where", "at", "comp", "value"});
                DirichletRegion rg;
                if (!d.contains("where")) throw ConfigError("config: " + path + ": missing where");
                const std::string w = d["where"].get<std::string>();
                if (w == "point") {
                    rg.where = DirichletRegion::Where::Point;
                    if (!d.contains("at")) throw ConfigError("config: " + path + ": point needs at");
                    rg.at = detail::vec3_field(d["at"], path + ".at", c.dim);
                } else {
                    rg.where = DirichletRegion::Where::Side;
                    rg.side = detail::side_from_name(w, path + ".where");
                }
                if (d.contains("comp"))
                    rg.comp = detail::comp_from_name(d["comp"].get<std::string>(), path + ".comp");
                if (rg.comp >= c.dim)
                    throw ConfigError("config: " + path + ".comp out of range for dim");
                if (d.contains("value")) rg.value = d["value"].get<double>();
                c.bcs.dirichlet.push_back(rg);
            }
        }
        if (b.contains("neumann")) {
            int ni = 0;
            for (const auto& n : b["neumann"]) {
                const std::string path = "bcs.neumann[" + std::to_string(ni++) + "]";
                require_keys(n, path, {"kind", "at", "force", "side", "traction", "center",
                                       "magnitude", "direction"});
                LoadSpec ld;
                const std::string kind = n.contains("kind") ? n["kind"].get<std::string>() : "point";
                if (kind == "point") {
                    ld.kind = LoadSpec::Kind::PointForce;
                    if (!n.contains("at") || !n.contains("force"))
                        throw ConfigError("config: " + path + ": point load needs at and force");
                    ld.at = detail::vec3_field(n["at"], path + ".at", c.dim);
                    ld.vector = detail::vec3_field(n["force"], path + ".force", c.dim);
                } else if (kind == "traction") {
                    ld.kind = LoadSpec::Kind::SideTraction;
                    if (!n.contains("side") || !n.contains("traction"))
                        throw ConfigError("config: " + path + ": traction needs side and traction");
                    ld.side = detail::side_from_name(n["side"].get<std::string>(), path + ".side");
                    ld.vector = detail::vec3_field(n["traction"], path + ".traction", c.dim);
                } else if (kind == "parabolic") {
                    ld.kind = LoadSpec::Kind::SideParabolic;
                    if (!n.contains("side") || !n.contains("center") || !n.contains("magnitude") ||
                        !n.contains("direction"))
                        throw ConfigError("config: " + path +
                                          ": parabolic needs side, center, magnitude, direction");
                    ld.side = detail::side_from_name(n["side"].get<std::string>(), path + ".side");
                    ld.center = n["center"].get<double>();
                    ld.magnitude = n["magnitude"].get<double>();
                    ld.vector = detail::vec3_field(n["direction"], path + ".direction", c.dim);
                } else if (kind == "twist") {
                    ld.kind = LoadSpec::Kind::FaceTwist;
                    if (c.dim != 3) throw ConfigError("config: " + path + ": twist is 3D only");
                    if (!n.contains("side") || !n.contains("magnitude"))
                        throw ConfigError("config: " + path + ": twist needs side and magnitude");
                    ld.side = detail::side_from_name(n["side"].get<std::string>(), path + ".side");
                    ld.magnitude = n["magnitude"].get<double>();
                    if (n.contains("at")) ld.at = detail::vec3_field(n["at"], path + ".at", c.dim);
                } else {
                    throw ConfigError("config: " + path + ".kind must be point, traction, parabolic or twist");
                }
                c.bcs.loads.push_back(ld);
            }
        }
    }

    if (j.contains("solver")) {
        const auto& s = j["solver"];
        require_keys(s, "solver", {"type", "tol", "max_iters"});
        if (s.contains("type")) {
            const std::string t = s["type"].get<std::string>();
            if (t == "direct") c.solver.use_cg = false;
            else if (t == "cg") c.solver.use_cg = true;
            else throw ConfigError("config: solver.type must be direct or cg");
        }
        if (s.contains("tol")) c.solver.tol = s["tol"].get<double>();
        if (s.contains("max_iters")) c.solver.max_iters = s["max_iters"].get<int>();
        if (!(c.solver.tol > 0.0) || c.solver.tol >= 1.0)
            throw ConfigError("config: solver.tol must be in (0, 1)");
    }

    if (j.contains("method")) c.method = j["method"].get<std::string>();
    if (j.contains("methods"))
        for (const auto& m : j["methods"]) c.methods.push_back(m.get<std::string>());
    const std::set<std::string> known{"cbn", "cbn-linear", "cbn-linear-stations",
                                      "homog", "fine", "substructure"};
    if (!known.count(c.method)) throw ConfigError("config: unknown method '" + c.method + "'");
    for (const auto& m : c.methods)
        if (!known.count(m)) throw ConfigError("config: unknown method '" + m + "'");

    if (j.contains("output")) {
        const auto& o = j["output"];
        require_keys(o, "output", {"vtk", "benchmark"});
        if (o.contains("vtk")) c.write_fields = o["vtk"].get<bool>();
        if (o.contains("benchmark")) c.with_benchmark = o["benchmark"].get<bool>();
    }
    return c;
}

inline CaseConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("config: parse error in " + path + ": " + e.what());
    }
    return parse_config(j);
}

// ---------------------------------------------------------------------------
// Canonical signatures for the manifest and the shared-instance check of
// compare_cases. nlohmann::json orders keys, so dump() is canonical.

inline Json instance_json(const CaseConfig& c) {
    Json j;
    j["dim"] = c.dim;
    j["coarse"] = {c.coarse[0], c.coarse[1], c.coarse[2]};
    j["fine"] = {c.fine[0], c.fine[1], c.fine[2]};
    j["size"] = {c.size[0], c.size[1], c.size[2]};
    j["model"] = int(c.model);
    j["matrix"] = {c.matrix_mat.E, c.matrix_mat.nu};
    j["raw_file"] = c.raw_modulus_file;
    Json regions = Json::array();
    for (const auto& r : c.regions) {
        regions.push_back({int(r.shape), int(r.frame), r.center[0], r.center[1], r.center[2],
                           r.half_size[0], r.half_size[1], r.half_size[2], r.angle, r.axis,
                           r.lo, r.hi, r.mat.E, r.mat.nu});
    }
    j["regions"] = regions;
    Json dir = Json::array();
    for (const auto& d : c.bcs.dirichlet)
        dir.push_back({int(d.where), d.side, d.at[0], d.at[1], d.at[2], d.comp, d.value});
    j["dirichlet"] = dir;
    Json loads = Json::array();
    for (const auto& l : c.bcs.loads)
        loads.push_back({int(l.kind), l.side, l.at[0], l.at[1], l.at[2], l.vector[0], l.vector[1],
                         l.vector[2], l.center, l.magnitude});
    j["loads"] = loads;
    j["seed"] = c.seed;
    return j;
}

inline std::uint64_t instance_hash(const CaseConfig& c) {
    const std::string s = instance_json(c).dump();
    return hash_bytes(s.data(), s.size());
}

}  // namespace cbn
