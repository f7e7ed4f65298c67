#pragma once

#include "cbn/config.hpp"
#include "cbn/metrics.hpp"
#include "cbn/vtk.hpp"

#include <filesystem>
#include <optional>

namespace cbn {

struct Instance {
    MeshHierarchy mh;
    NodeSets ns;
    CbnLayout layout;
    MaterialField mat;
    ProblemBcs bcs;
};

inline Instance build_instance(const CaseConfig& c) {
    Instance inst;
    inst.mh = build_hierarchy(c.dim, c.coarse, c.fine, c.size);
    inst.ns = classify_nodes(inst.mh);
    inst.layout = place_cbns(inst.mh, inst.ns, c.bridge);
    if (!c.raw_modulus_file.empty())
        inst.mat = load_modulus_field(inst.mh, c.raw_modulus_file, c.matrix_mat.nu, c.model);
    else
        inst.mat = rasterize_regions(inst.mh, c.matrix_mat, c.regions, c.model);
    inst.bcs = c.bcs;
    return inst;
}

struct MethodResult {
    std::string method;
    long analysis_dofs = 0;  // free dofs of the method's global solve
    long nnz = 0;            // nonzeros of the reduced global operator
    int rhs_cols = 0;        // local linear systems per coarse element
    double e1 = 0.0;
    double r_e = -1.0, r_u = -1.0;  // negative = no benchmark available
    Vec fine_field;                 // reconstructed / interpolated fine displacement
    double t_local = 0.0, t_global = 0.0;
    StepTimings steps;
    SolveInfo solve;
    int cache_hits = 0;
};

inline MethodResult run_method(const Instance& inst, const CaseConfig& cfg,
                               const std::string& method, const FineSolution* bench) {
    MethodResult res;
    res.method = method;
    Stopwatch total;

    if (method == "fine") {
        Stopwatch sw;
        FineSolution local;
        const FineSolution& sol = bench ? *bench : (local = solve_fine(inst.mh, inst.mat, inst.bcs, cfg.solver));
        res.steps.add("Compute fine benchmark", sw.seconds());
        res.fine_field = sol.u;
        res.e1 = sol.energy;
        res.analysis_dofs = sol.dofs;
        res.nnz = sol.nnz;
        res.solve = sol.info;
        res.t_global = total.seconds();
    } else if (method == "cbn" || method == "cbn-linear" || method == "cbn-linear-stations") {
        const BoundaryInterp interp = method == "cbn" ? BoundaryInterp::Bezier
                                      : method == "cbn-linear"
                                          ? BoundaryInterp::EndpointLinear
                                          : BoundaryInterp::StationLinear;
        Stopwatch sw;
        CbnBuildOptions bopt;
        bopt.threads = cfg.threads;
        bopt.cache_dir = cfg.cache_dir;
        CbnModel model =
            build_cbn_model(inst.mh, inst.ns, inst.layout, inst.mat, interp, bopt, &res.steps);
        res.cache_hits = model.cache_hits;
        res.rhs_cols = model.ops.empty() ? 0 : model.op(0).basis.rhs_columns;
        res.t_local = sw.seconds();
        sw.restart();
        CoarseSystem sys = assemble_coarse(model, inst.bcs);
        res.steps.add("Assemble global stiffness", sw.seconds());
        sw.restart();
        CoarseSolution sol = solve_coarse(sys, inst.layout, cfg.solver);
        res.steps.add("Compute coarse solution", sw.seconds());
        res.t_global = sw.seconds();
        res.fine_field = reconstruct_fine(model, sol.Q);
        res.e1 = coarse_energy(sys, sol.Q);
        res.analysis_dofs = sol.free_dofs;
        res.nnz = sol.nnz;
        res.solve = sol.info;
    } else if (method == "homog") {
        Stopwatch sw;
        const long M = inst.mh.coarse_elements();
        std::vector<Mat> tensors(M);
        // Identical elements homogenize once.
        std::unordered_map<std::uint64_t, Mat> cache;
        int rhs = 0;
        for (long e = 0; e < M; ++e) {
            const std::uint64_t h = inst.mat.element_hash(inst.mh, e);
            auto it = cache.find(h);
            if (it == cache.end()) {
                it = cache.emplace(h, homogenize(inst.mh, inst.mat, e, &rhs)).first;
            } else {
                ++res.cache_hits;
            }
            tensors[e] = it->second;
        }
        res.rhs_cols = rhs;
        res.t_local = sw.seconds();
        res.steps.add("Compute effective tensors", sw.seconds());
        sw.restart();
        HomogenizedSolution sol = homogenized_solve(inst.mh, tensors, inst.bcs, cfg.solver);
        res.steps.add("Compute coarse solution", sw.seconds());
        res.t_global = sw.seconds();
        res.fine_field = sol.fine_field;
        res.e1 = sol.energy;
        res.analysis_dofs = sol.dofs;
        res.nnz = sol.nnz;
        res.solve = sol.info;
    } else if (method == "substructure") {
        Stopwatch sw;
        SubstructureSolution sol = substructure_solve(inst.mh, inst.mat, inst.bcs,
                                                      cfg.substructure_cap, cfg.boundary_map_cap,
                                                      cfg.solver);
        res.steps.add("Compute substructure solution", sw.seconds());
        res.t_global = sw.seconds();
        res.fine_field = sol.u;
        res.analysis_dofs = sol.dofs;
        res.nnz = sol.nnz;
        res.rhs_cols = sol.rhs_cols;
        res.solve = sol.info;
        res.e1 = bench ? strain_energy(bench->K, sol.u)
                       : strain_energy(assemble_fine_stiffness(inst.mh, inst.mat), sol.u);
    } else {
        throw ConfigError("unknown method '" + method + "'");
    }

    if (bench && method != "fine") {
        res.r_e = effectivity_energy(res.e1, bench->energy);
        res.r_u = effectivity_displacement(res.fine_field, bench->u, inst.mh);
    } else if (bench) {
        res.r_e = 0.0;
        res.r_u = 0.0;
    }
    return res;
}

// ---------------------------------------------------------------------------
// Result files.

inline void write_effectivity_csv(const std::string& path, const std::string& instance,
                                  const std::vector<MethodResult>& rows, double e0,
                                  bool with_times = false) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << "instance,method,analysis_dofs,global_nnz,local_rhs_cols,e0,e1,r_e,r_u";
    if (with_times) out << ",t_local_s,t_global_s";
    out << "\n";
    for (const auto& r : rows) {
        out << instance << "," << r.method << "," << r.analysis_dofs << "," << r.nnz << ","
            << r.rhs_cols << "," << format_double(e0) << "," << format_double(r.e1) << ","
            << format_double(r.r_e) << "," << format_double(r.r_u);
        if (with_times)
            out << "," << format_double(r.t_local) << "," << format_double(r.t_global);
        out << "\n";
    }
}

inline std::uint64_t file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return 0;
    std::uint64_t h = 1469598103934665603ull;
    char buf[4096];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        h = hash_bytes(buf, std::size_t(in.gcount()), h);
        if (!in) break;
    }
    return h;
}

struct RunOutput {
    std::vector<std::string> files;
    std::string manifest_path;
    MethodResult result;
    double e0 = 0.0;
};

/// Execute one configured case: optional fine benchmark, the requested
/// method, field/CSV outputs, and a manifest with per-step timings.
inline RunOutput run_case(const CaseConfig& cfg, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    RunOutput out;

    Instance inst = build_instance(cfg);
    std::optional<FineSolution> bench;
    StepTimings bench_steps;
    if (cfg.with_benchmark || cfg.method == "fine") {
        Stopwatch sw;
        bench = solve_fine(inst.mh, inst.mat, inst.bcs, cfg.solver);
        bench_steps.add("Compute fine benchmark", sw.seconds());
    }

    MethodResult res = run_method(inst, cfg, cfg.method, bench ? &*bench : nullptr);

    if (cfg.write_fields && res.fine_field.size() > 0) {
        std::map<std::string, Vec> cell;
        Vec young(inst.mh.global_fine_cells());
        for (long c = 0; c < inst.mh.global_fine_cells(); ++c) young[c] = inst.mat.young[c];
        cell["youngs_modulus"] = young;
        const StrainField strains =
            compute_strains(inst.mh.global_fine, inst.mh.fine_h, res.fine_field);
        const char* comp2[3] = {"strain_xx", "strain_yy", "strain_xy"};
        const char* comp3[6] = {"strain_xx", "strain_yy", "strain_zz",
                                "strain_xy", "strain_yz", "strain_zx"};
        for (int v = 0; v < strains.vsize; ++v)
            cell[inst.mh.dim == 2 ? comp2[v] : comp3[v]] = strains.average.col(v);
        const std::string path = out_dir + "/" + cfg.name + "_" + cfg.method + ".vtk";
        write_vtk(path, inst.mh, res.fine_field, cell, cfg.name + " " + cfg.method);
        out.files.push_back(path);
    }

    if (bench) {
        const std::string path = out_dir + "/" + cfg.name + "_effectivity.csv";
        write_effectivity_csv(path, cfg.name, {res}, bench->energy);
        out.files.push_back(path);
        out.e0 = bench->energy;
    }

    Json manifest;
    manifest["artifact"] = "cbn";
    manifest["version"] = "0.1.0";
    manifest["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                        std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION);
    manifest["instance"] = instance_json(cfg);
    manifest["instance_hash"] = instance_hash(cfg);
    manifest["method"] = cfg.method;
    manifest["seed"] = cfg.seed;
    Json steps = Json::array();
    for (const auto& [name, t] : bench_steps.steps) steps.push_back({{"step", name}, {"seconds", t}});
    for (const auto& [name, t] : res.steps.steps) steps.push_back({{"step", name}, {"seconds", t}});
    manifest["timings"] = steps;
    manifest["solve"] = {{"method", res.solve.method},
                         {"iterations", res.solve.iterations},
                         {"rel_residual", res.solve.rel_residual}};
    manifest["cache_hits"] = res.cache_hits;
    Json files = Json::array();
    for (const auto& f : out.files) files.push_back({{"path", f}, {"fnv1a", file_hash(f)}});
    manifest["outputs"] = files;
    out.manifest_path = out_dir + "/" + cfg.name + "_manifest.json";
    {
        std::ofstream m(out.manifest_path, std::ios::binary);
        m << manifest.dump(2) << "\n";
    }
    out.result = std::move(res);
    return out;
}

// ---------------------------------------------------------------------------

struct CompareOutput {
    std::string csv_path;
    std::vector<MethodResult> rows;
    double e0 = 0.0;
};

/// Run several methods against one shared benchmark instance and emit the
/// comparison CSV (method, DOFs, nnz, local RHS count, indices, wall times).
inline CompareOutput compare_cases(const CaseConfig& cfg, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    if (cfg.methods.empty()) throw ConfigError("compare: config needs a 'methods' list");

    Instance inst = build_instance(cfg);
    FineSolution bench = solve_fine(inst.mh, inst.mat, inst.bcs, cfg.solver);

    CompareOutput out;
    out.e0 = bench.energy;
    for (const auto& m : cfg.methods) out.rows.push_back(run_method(inst, cfg, m, &bench));
    out.csv_path = out_dir + "/" + cfg.name + "_comparison.csv";
    write_effectivity_csv(out.csv_path, cfg.name, out.rows, bench.energy, /*with_times=*/true);
    return out;
}

}  // namespace cbn
