// Command-line front end: run a configured case, compare methods on a shared
// instance, check the shape-function properties, report sparsity, or run a
// canned experiment suite.

#include "cbn/runner.hpp"
#include "cbn/suites.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

int result_code(const std::exception& e) {
    if (dynamic_cast<const cbn::ConfigError*>(&e)) return 2;
    if (dynamic_cast<const cbn::NumericalError*>(&e)) return 3;
    return 1;
}

cbn::CaseConfig load_with_overrides(const std::string& path, int threads, std::uint64_t seed,
                                    bool seed_set) {
    cbn::CaseConfig cfg = cbn::load_config(path);
    if (threads > 0) cfg.threads = threads;
    if (seed_set) cfg.seed = seed;
    return cfg;
}

void print_rows(const std::vector<cbn::MethodResult>& rows, double e0) {
    for (const auto& r : rows) {
        std::cout << "  " << r.method << ": dofs=" << r.analysis_dofs << " nnz=" << r.nnz
                  << " rhs_cols=" << r.rhs_cols;
        if (r.r_u >= 0)
            std::cout << " r_e=" << cbn::format_double(r.r_e)
                      << " r_u=" << cbn::format_double(r.r_u);
        std::cout << "\n";
    }
    std::cout << "  benchmark energy e0=" << cbn::format_double(e0) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Curved-bridge-node multiscale analysis of heterogeneous structures"};
    app.require_subcommand(1);

    std::vector<std::string> config_paths;
    std::string out_dir = "out";
    int threads = 0;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string suite_name;

    auto add_common = [&](CLI::App* cmd, bool multi_config) {
        if (multi_config)
            cmd->add_option("--config", config_paths, "case configuration file(s)")->required();
        else
            cmd->add_option("--config", config_paths, "case configuration file")
                ->required()
                ->expected(1);
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--threads", threads, "worker threads for per-element stages");
        cmd->add_option_function<std::uint64_t>(
            "--seed", [&](const std::uint64_t& v) { seed = v; seed_set = true; },
            "override the config seed");
    };

    auto* run = app.add_subcommand("run", "run one case (method from the config)");
    add_common(run, false);
    auto* compare = app.add_subcommand("compare", "compare methods on one shared instance");
    add_common(compare, true);
    auto* properties = app.add_subcommand("properties", "shape-function property report for the CBN basis");
    add_common(properties, false);
    auto* sparsity = app.add_subcommand("sparsity", "global-matrix sparsity report");
    add_common(sparsity, false);
    auto* suite = app.add_subcommand("suite", "run a canned experiment suite");
    suite->add_option("name", suite_name,
                      "half_mbb | bridge_count | coarse_size | material_contrast | 3d_loadings | all")
        ->required();
    suite->add_option("--out", out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            const auto cfg = load_with_overrides(config_paths[0], threads, seed, seed_set);
            const auto out = cbn::run_case(cfg, out_dir);
            std::cout << "run " << cfg.name << " method=" << cfg.method << "\n";
            print_rows({out.result}, out.e0);
            for (const auto& f : out.files) std::cout << "  wrote " << f << "\n";
            std::cout << "  wrote " << out.manifest_path << "\n";
        } else if (compare->parsed()) {
            auto cfg = load_with_overrides(config_paths[0], threads, seed, seed_set);
            for (std::size_t i = 1; i < config_paths.size(); ++i) {
                const auto other = load_with_overrides(config_paths[i], threads, seed, seed_set);
                if (cbn::instance_hash(other) != cbn::instance_hash(cfg))
                    throw cbn::ConfigError("compare: configs describe different instances");
                for (const auto& m : other.methods) cfg.methods.push_back(m);
                if (other.methods.empty()) cfg.methods.push_back(other.method);
            }
            if (cfg.methods.empty()) cfg.methods = {"fine", cfg.method};
            const auto out = cbn::compare_cases(cfg, out_dir);
            std::cout << "compare " << cfg.name << "\n";
            print_rows(out.rows, out.e0);
            std::cout << "  wrote " << out.csv_path << "\n";
        } else if (properties->parsed()) {
            const auto cfg = load_with_overrides(config_paths[0], threads, seed, seed_set);
            std::filesystem::create_directories(out_dir);
            cbn::Instance inst = cbn::build_instance(cfg);
            cbn::CbnBuildOptions bopt;
            bopt.threads = cfg.threads;
            bopt.cache_dir = cfg.cache_dir;
            const cbn::CbnModel model =
                cbn::build_cbn_model(inst.mh, inst.ns, inst.layout, inst.mat,
                                     cbn::BoundaryInterp::Bezier, bopt);
            cbn::Rng rng(cfg.seed + 1);
            std::ofstream csv(out_dir + "/" + cfg.name + "_properties.csv", std::ios::binary);
            csv << "element,property,max_violation,tolerance,verdict\n";
            bool all = true;
            for (long e = 0; e < inst.mh.coarse_elements(); ++e) {
                const auto rep = cbn::property_suite(model, e, 100, rng);
                all = all && rep.all_pass();
                std::cout << rep.to_log();
                for (const auto& c : rep.checks)
                    csv << e << "," << c.property << "," << cbn::format_double(c.max_violation)
                        << "," << cbn::format_double(c.tolerance) << ","
                        << (c.pass() ? "PASS" : "FAIL") << "\n";
            }
            std::cout << (all ? "all properties PASS\n" : "property FAILURES reported\n");
        } else if (sparsity->parsed()) {
            auto cfg = load_with_overrides(config_paths[0], threads, seed, seed_set);
            cfg.methods = {"fine", "cbn", "substructure"};
            const auto out = cbn::compare_cases(cfg, out_dir);
            std::filesystem::create_directories(out_dir);
            std::ofstream csv(out_dir + "/" + cfg.name + "_sparsity.csv", std::ios::binary);
            csv << "instance,method,analysis_dofs,global_nnz,local_rhs_cols\n";
            for (const auto& r : out.rows)
                csv << cfg.name << "," << r.method << "," << r.analysis_dofs << "," << r.nnz
                    << "," << r.rhs_cols << "\n";
            print_rows(out.rows, out.e0);
            std::cout << "  wrote " << out_dir + "/" + cfg.name + "_sparsity.csv" << "\n";
        } else if (suite->parsed()) {
            const auto results = cbn::run_suite(suite_name, out_dir);
            bool all = true;
            for (const auto& r : results) {
                std::cout << "suite " << r.name << " -> " << r.csv_path << "\n";
                for (const auto& c : r.checks) {
                    std::cout << "  [" << (c.pass ? "PASS" : "FAIL") << "] " << c.name << ": "
                              << c.detail << "\n";
                    all = all && c.pass;
                }
            }
            if (!all) return 3;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return result_code(e);
    }
    return 0;
}
