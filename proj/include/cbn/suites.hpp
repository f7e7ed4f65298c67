#pragma once

#include "cbn/runner.hpp"

namespace cbn {

struct SuiteCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct SuiteResult {
    std::string name;
    std::string csv_path;
    std::vector<SuiteCheck> checks;

    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

namespace detail {

inline void check(SuiteResult& res, const std::string& name, bool pass,
                  const std::string& detail) {
    res.checks.push_back({name, pass, detail});
}

inline void write_csv(const std::string& path, const std::string& header,
                      const std::vector<std::string>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << header << "\n";
    for (const auto& r : rows) out << r << "\n";
}

}  // namespace detail

/// Half-MBB instance: 4x2 coarse elements of unit size, each with a centered
/// soft elliptic inclusion; symmetry edge on the left, corner roller, and a
/// downward point load at the top of the symmetry edge.
inline CaseConfig half_mbb_config(int fine_n = 10, double matrix_E = 1e3,
                                  double inclusion_E = 1.0) {
    CaseConfig c;
    c.name = "half_mbb";
    c.dim = 2;
    c.coarse = {4, 2, 1};
    c.fine = {fine_n, fine_n, 1};
    c.size = {1.0, 1.0, 1.0};
    c.matrix_mat = {matrix_E, 0.3};
    Region inc;
    inc.shape = Region::Shape::Ellipse;
    inc.frame = Region::Frame::Element;
    inc.center = Vec3(0.5, 0.5, 0.0);
    inc.half_size = Vec3(0.3, 0.2, 0.0);
    inc.mat = {inclusion_E, 0.3};
    c.regions.push_back(inc);
    c.bridge.policy = BridgePolicy::CornersOnly;
    DirichletRegion sym;
    sym.where = DirichletRegion::Where::Side;
    sym.side = 0;  // xmin
    sym.comp = 0;
    c.bcs.dirichlet.push_back(sym);
    DirichletRegion roller;
    roller.where = DirichletRegion::Where::Point;
    roller.at = Vec3(4.0, 0.0, 0.0);
    roller.comp = 1;
    c.bcs.dirichlet.push_back(roller);
    LoadSpec load;
    load.kind = LoadSpec::Kind::PointForce;
    load.at = Vec3(0.0, 2.0, 0.0);
    load.vector = Vec3(0.0, -1.0, 0.0);
    c.bcs.loads.push_back(load);
    return c;
}

/// Fig.-9-style comparison: fine benchmark, homogenization, Our-L, Our-CBN on
/// the half-MBB instance; asserts the accuracy ordering and the 10x gaps.
inline SuiteResult suite_half_mbb(const std::string& out_dir, int fine_n = 10) {
    SuiteResult res;
    res.name = "half_mbb";
    CaseConfig cfg = half_mbb_config(fine_n);
    cfg.methods = {"fine", "homog", "cbn-linear", "cbn"};
    CompareOutput cmp = compare_cases(cfg, out_dir);
    res.csv_path = cmp.csv_path;

    double ru_cbn = -1, ru_lin = -1, ru_hom = -1, re_cbn = -1, re_lin = -1, re_hom = -1;
    for (const auto& r : cmp.rows) {
        if (r.method == "cbn") { ru_cbn = r.r_u; re_cbn = r.r_e; }
        if (r.method == "cbn-linear") { ru_lin = r.r_u; re_lin = r.r_e; }
        if (r.method == "homog") { ru_hom = r.r_u; re_hom = r.r_e; }
    }
    detail::check(res, "four_method_rows", cmp.rows.size() == 4,
                  std::to_string(cmp.rows.size()) + " rows");
    // The ordering is asserted in the displacement index; the energy indices
    // are reported in the CSV (homogenization's energy benefits from the
    // effective-tensor smoothing even where its field is poor).
    detail::check(res, "ordering_r_u", ru_cbn < ru_lin && ru_lin <= ru_hom,
                  "cbn " + format_double(ru_cbn) + " < our-l " + format_double(ru_lin) +
                      " <= homog " + format_double(ru_hom));
    detail::check(res, "cbn_below_both_r_e", re_cbn < re_lin && re_cbn < re_hom,
                  "cbn " + format_double(re_cbn) + " vs our-l " + format_double(re_lin) +
                      ", homog " + format_double(re_hom));
    detail::check(res, "gap_cbn_vs_linear_10x", ru_cbn < ru_lin / 10.0,
                  format_double(ru_lin / std::max(ru_cbn, 1e-300)) + "x");
    detail::check(res, "gap_cbn_vs_homog_10x", ru_cbn < ru_hom / 10.0,
                  format_double(ru_hom / std::max(ru_cbn, 1e-300)) + "x");
    return res;
}

/// Fig.-12(a)-style curve: effectivity vs bridge-node count per side on a
/// fixed instance, ending at the all-boundary exact-recovery point.
inline SuiteResult suite_bridge_count(const std::string& out_dir, int fine_n = 16,
                                      std::vector<int> per_side = {}) {
    SuiteResult res;
    res.name = "bridge_count";
    if (per_side.empty()) {
        // Admissible counts for fine_n intervals per side: (k-1) | fine_n.
        for (int k = 2; k <= fine_n + 1; ++k)
            if (fine_n % (k - 1) == 0 && (k == 2 || k == 3 || k == 5 || k == 9 || k == fine_n + 1))
                per_side.push_back(k);
    }

    CaseConfig cfg = half_mbb_config(fine_n);
    Instance base = build_instance(cfg);
    const FineSolution bench = solve_fine(base.mh, base.mat, base.bcs, cfg.solver);

    std::vector<std::string> rows;
    std::vector<double> ru;
    for (const int k : per_side) {
        CaseConfig ck = cfg;
        ck.bridge.policy = k == fine_n + 1 ? BridgePolicy::AllBoundary : BridgePolicy::PerSide;
        ck.bridge.per_side = k;
        Instance inst = base;
        inst.layout = place_cbns(inst.mh, inst.ns, ck.bridge);
        MethodResult r = run_method(inst, ck, "cbn", &bench);
        ru.push_back(r.r_u);
        rows.push_back("bridge_count," + std::to_string(k) + "," +
                       std::to_string(r.analysis_dofs) + "," + format_double(r.r_e) + "," +
                       format_double(r.r_u));
    }
    res.csv_path = out_dir + "/bridge_count_curve.csv";
    detail::write_csv(res.csv_path, "instance,per_side,analysis_dofs,r_e,r_u", rows);

    // Monotonicity is asserted down to the first exact-recovery point; past
    // it the indices sit at the solver noise floor and carry no ordering.
    std::string curve;
    for (double v : ru) curve += format_double(v) + " ";
    bool strict = true, twofold = true;
    bool reached_floor = false;
    for (std::size_t i = 1; i < ru.size() && !reached_floor; ++i) {
        strict = strict && ru[i] < ru[i - 1];
        twofold = twofold && ru[i] <= ru[i - 1] / 2.0;
        reached_floor = ru[i] <= 1e-18;
    }
    detail::check(res, "strictly_decreasing", strict, curve);
    detail::check(res, "twofold_decrease_per_step", twofold, curve);
    detail::check(res, "exact_recovery_tail", reached_floor || (!ru.empty() && ru.back() <= 1e-18),
                  format_double(ru.empty() ? 1.0 : ru.back()));
    return res;
}

/// Fig.-12(b)-style curve: fixed global fine grid, varying coarse partition.
inline SuiteResult suite_coarse_size(const std::string& out_dir) {
    SuiteResult res;
    res.name = "coarse_size";
    const std::vector<std::array<int, 2>> coarse_sizes{{4, 2}, {8, 4}, {16, 8}};
    const int global_fine_x = 64, global_fine_y = 32;

    std::vector<std::string> rows;
    std::vector<double> ru, e0;
    for (const auto& cs : coarse_sizes) {
        CaseConfig cfg = half_mbb_config(10);
        cfg.name = "coarse_size";
        cfg.coarse = {cs[0], cs[1], 1};
        cfg.fine = {global_fine_x / cs[0], global_fine_y / cs[1], 1};
        cfg.size = {4.0 / cs[0], 2.0 / cs[1], 1.0};
        cfg.regions.clear();
        for (int j = 0; j < 2; ++j) {
            for (int i = 0; i < 4; ++i) {
                Region inc;
                inc.shape = Region::Shape::Ellipse;
                inc.frame = Region::Frame::Global;
                inc.center = Vec3(i + 0.5, j + 0.5, 0.0);
                inc.half_size = Vec3(0.3, 0.2, 0.0);
                inc.mat = {1.0, 0.3};
                cfg.regions.push_back(inc);
            }
        }
        Instance inst = build_instance(cfg);
        const FineSolution bench = solve_fine(inst.mh, inst.mat, inst.bcs, cfg.solver);
        MethodResult r = run_method(inst, cfg, "cbn", &bench);
        ru.push_back(r.r_u);
        e0.push_back(bench.energy);
        rows.push_back("coarse_size," + std::to_string(cs[0]) + "x" + std::to_string(cs[1]) +
                       "," + std::to_string(r.analysis_dofs) + "," + format_double(r.r_e) + "," +
                       format_double(r.r_u) + "," + format_double(bench.energy));
    }
    res.csv_path = out_dir + "/coarse_size_curve.csv";
    detail::write_csv(res.csv_path, "instance,coarse,analysis_dofs,r_e,r_u,e0", rows);

    double spread = 0;
    for (double v : e0) spread = std::max(spread, std::abs(v - e0[0]) / std::abs(e0[0]));
    detail::check(res, "three_rows", rows.size() == 3, std::to_string(rows.size()));
    detail::check(res, "benchmark_constant", spread <= 1e-12, format_double(spread));
    std::string curve;
    for (double v : ru) curve += format_double(v) + " ";
    bool decreasing = true;
    for (std::size_t i = 1; i < ru.size(); ++i) decreasing = decreasing && ru[i] < ru[i - 1];
    detail::check(res, "r_u_decreasing", decreasing, curve);
    return res;
}

/// Fig.-12(c)-style robustness: inclusion/matrix contrasts from 1 to 1e6
/// with corners-only bridge nodes.
inline SuiteResult suite_material_contrast(const std::string& out_dir, int fine_n = 16) {
    SuiteResult res;
    res.name = "material_contrast";
    const std::vector<double> matrix_E{1.0, 5.0, 100.0, 1e3, 1e6};

    std::vector<std::string> rows;
    std::vector<double> ru_all, re_all;
    for (const double mE : matrix_E) {
        CaseConfig cfg = half_mbb_config(fine_n, mE, 1.0);
        cfg.name = "material_contrast";
        Instance inst = build_instance(cfg);
        const FineSolution bench = solve_fine(inst.mh, inst.mat, inst.bcs, cfg.solver);
        MethodResult r = run_method(inst, cfg, "cbn", &bench);
        ru_all.push_back(r.r_u);
        re_all.push_back(r.r_e);
        rows.push_back("material_contrast,1:" + format_double(mE) + "," + format_double(r.r_e) +
                       "," + format_double(r.r_u));
    }
    res.csv_path = out_dir + "/material_contrast_curve.csv";
    detail::write_csv(res.csv_path, "instance,contrast,r_e,r_u", rows);

    bool all_small = true;
    for (std::size_t i = 0; i < ru_all.size(); ++i)
        all_small = all_small && ru_all[i] <= 1e-2 && re_all[i] <= 1e-2;
    std::string curve;
    for (double v : ru_all) curve += format_double(v) + " ";
    detail::check(res, "five_rows", rows.size() == 5, std::to_string(rows.size()));
    detail::check(res, "indices_below_1e-2", all_small, curve);
    // Homogeneous row: no heterogeneity error; what remains is the
    // corners-only boundary-interpolation floor, measured at 3.4e-3 on this
    // instance and frozen with headroom.
    detail::check(res, "homogeneous_at_interpolation_floor",
                  !ru_all.empty() && ru_all.front() <= 5e-3,
                  format_double(ru_all.empty() ? 1.0 : ru_all.front()));
    return res;
}

/// Layered 3D bar under stretching, compressing, twisting, bending, plus the
/// shape-function property suite in 3D and an analytic uniaxial check.
///
/// Two fine resolutions are run. With 6^3 fine cells the 3x3 bridge grid
/// puts every station on a fine node and the analysis recovers the benchmark
/// exactly; 8^3 breaks the collocation and measures real approximation
/// quality.
inline CaseConfig bar3d_config(int fine_n) {
    CaseConfig cfg;
    cfg.name = "bar3d_f" + std::to_string(fine_n);
    cfg.dim = 3;
    cfg.model = ElasticModel::ThreeD;
    cfg.coarse = {2, 2, 2};
    cfg.fine = {fine_n, fine_n, fine_n};
    cfg.size = {1.0, 1.0, 1.0};
    cfg.matrix_mat = {1e3, 0.3};
    const double layers[3][3] = {{0.0, 1.0 / 3.0, 1e4}, {1.0 / 3.0, 2.0 / 3.0, 1e3},
                                 {2.0 / 3.0, 1.0, 1e4}};
    for (const auto& ly : layers) {
        Region slab;
        slab.shape = Region::Shape::Slab;
        slab.frame = Region::Frame::Element;
        slab.axis = 2;
        slab.lo = ly[0];
        slab.hi = ly[1];
        slab.mat = {ly[2], 0.3};
        cfg.regions.push_back(slab);
    }
    cfg.bridge.policy = BridgePolicy::PerSide;
    cfg.bridge.per_side = 3;
    DirichletRegion clamp;
    clamp.where = DirichletRegion::Where::Side;
    clamp.side = 4;  // zmin
    clamp.comp = -1;
    cfg.bcs.dirichlet.push_back(clamp);
    return cfg;
}

inline SuiteResult suite_3d_loadings(const std::string& out_dir) {
    SuiteResult res;
    res.name = "3d_loadings";

    struct Loading {
        std::string name;
        LoadSpec load;
    };
    std::vector<Loading> loadings;
    {
        LoadSpec stretch;
        stretch.kind = LoadSpec::Kind::SideTraction;
        stretch.side = 5;
        stretch.vector = Vec3(0, 0, 1);
        loadings.push_back({"stretching", stretch});
        LoadSpec compress = stretch;
        compress.vector = Vec3(0, 0, -1);
        loadings.push_back({"compressing", compress});
        LoadSpec twist;
        twist.kind = LoadSpec::Kind::FaceTwist;
        twist.side = 5;
        twist.at = Vec3(1, 1, 2);
        twist.magnitude = 1.0;
        loadings.push_back({"twisting", twist});
        LoadSpec bend;
        bend.kind = LoadSpec::Kind::SideTraction;
        bend.side = 5;
        bend.vector = Vec3(1, 0, 0);
        loadings.push_back({"bending", bend});
    }

    std::vector<std::string> rows;
    bool small_f8 = true, exact_f6 = true;
    for (const int fine_n : {6, 8}) {
        CaseConfig cfg = bar3d_config(fine_n);
        // One model serves all loadings; elements share one operator.
        Instance inst = build_instance(cfg);
        CbnBuildOptions bopt;
        bopt.threads = cfg.threads;
        CbnModel model =
            build_cbn_model(inst.mh, inst.ns, inst.layout, inst.mat, BoundaryInterp::Bezier, bopt);
        for (const auto& ld : loadings) {
            ProblemBcs bcs = cfg.bcs;
            bcs.loads = {ld.load};
            const FineSolution bench = solve_fine(inst.mh, inst.mat, bcs, cfg.solver);
            CoarseSystem sys = assemble_coarse(model, bcs);
            CoarseSolution sol = solve_coarse(sys, inst.layout, cfg.solver);
            const Vec u = reconstruct_fine(model, sol.Q);
            const double re = effectivity_energy(coarse_energy(sys, sol.Q), bench.energy);
            const double rru = effectivity_displacement(u, bench.u, inst.mh);
            if (fine_n == 6) exact_f6 = exact_f6 && re <= 1e-18 && rru <= 1e-18;
            else small_f8 = small_f8 && re <= 1e-2 && rru <= 1e-2;
            rows.push_back(cfg.name + "," + ld.name + "," + format_double(re) + "," +
                           format_double(rru));
        }
        if (fine_n == 6) {
            Rng rng(2026);
            const PropertyReport rep = property_suite(model, 0, 100, rng);
            std::string detail_s;
            for (const auto& c : rep.checks)
                detail_s += c.property + "=" + format_double(c.max_violation) + " ";
            detail::check(res, "shape_properties_3d", rep.all_pass(), detail_s);
        }
    }
    res.csv_path = out_dir + "/loadings_3d.csv";
    detail::write_csv(res.csv_path, "instance,loading,r_e,r_u", rows);
    detail::check(res, "station_collocation_exact_recovery_6", exact_f6, "8 rows");
    detail::check(res, "four_loadings_below_1e-2", small_f8 && rows.size() == 8,
                  std::to_string(rows.size()) + " rows");

    // Analytic uniaxial stretch of a homogeneous bar under a uniform end
    // traction with roller supports: exact uniform strain state.
    {
        CaseConfig hc = bar3d_config(6);
        hc.name = "bar3d_homogeneous";
        hc.regions.clear();
        hc.bcs.dirichlet.clear();
        hc.bcs.loads.clear();
        DirichletRegion roller;
        roller.where = DirichletRegion::Where::Side;
        roller.side = 4;
        roller.comp = 2;
        hc.bcs.dirichlet.push_back(roller);
        DirichletRegion pin1;
        pin1.where = DirichletRegion::Where::Point;
        pin1.at = Vec3(0, 0, 0);
        pin1.comp = 0;
        hc.bcs.dirichlet.push_back(pin1);
        DirichletRegion pin2 = pin1;
        pin2.comp = 1;
        hc.bcs.dirichlet.push_back(pin2);
        DirichletRegion pin3;
        pin3.where = DirichletRegion::Where::Point;
        pin3.at = Vec3(2, 0, 0);
        pin3.comp = 1;
        hc.bcs.dirichlet.push_back(pin3);
        LoadSpec pull;
        pull.kind = LoadSpec::Kind::SideTraction;
        pull.side = 5;
        pull.vector = Vec3(0, 0, 1);
        hc.bcs.loads.push_back(pull);

        Instance hi = build_instance(hc);
        CbnModel hmodel = build_cbn_model(hi.mh, hi.ns, hi.layout, hi.mat);
        CoarseSystem sys = assemble_coarse(hmodel, hi.bcs);
        CoarseSolution sol = solve_coarse(sys, hi.layout, hc.solver);
        const Vec u = reconstruct_fine(hmodel, sol.Q);
        const double E = hc.matrix_mat.E, nu = hc.matrix_mat.nu;
        double err = 0, scale = 0;
        for (long n = 0; n < hi.mh.global_fine_nodes(); ++n) {
            const Vec3 x = hi.mh.global_node_pos(n);
            const Vec3 exact(-nu * x[0] / E, -nu * x[1] / E, x[2] / E);
            for (int a = 0; a < 3; ++a) {
                err = std::max(err, std::abs(u[3 * n + a] - exact[a]));
                scale = std::max(scale, std::abs(exact[a]));
            }
        }
        detail::check(res, "analytic_uniaxial_1e-6", err / scale <= 1e-6,
                      format_double(err / scale));
    }
    return res;
}

inline std::vector<SuiteResult> run_suite(const std::string& name, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    if (name == "half_mbb") return {suite_half_mbb(out_dir)};
    if (name == "bridge_count") return {suite_bridge_count(out_dir)};
    if (name == "coarse_size") return {suite_coarse_size(out_dir)};
    if (name == "material_contrast") return {suite_material_contrast(out_dir)};
    if (name == "3d_loadings") return {suite_3d_loadings(out_dir)};
    if (name == "all")
        return {suite_half_mbb(out_dir), suite_bridge_count(out_dir), suite_coarse_size(out_dir),
                suite_material_contrast(out_dir), suite_3d_loadings(out_dir)};
    throw ConfigError("unknown suite '" + name + "'");
}

}  // namespace cbn
