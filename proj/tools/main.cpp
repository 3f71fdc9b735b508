// Command-line front end: every subcommand maps onto one workflow of the
// library. Exit codes: 0 success, 2 validation error, 3 compute failure.

#include <CLI11.hpp>
#include <bit>
#include <cstring>
#include <filesystem>
#include <iostream>

#include "spinecho/curve_io.hpp"
#include "spinecho/rng.hpp"
#include "spinecho/version.hpp"
#include "spinecho/workflows.hpp"

using namespace spinecho;
namespace fs = std::filesystem;

namespace {

struct CliOptions {
    std::string config_path;
    RunConfig rc;
    // flag mirrors (CLI11 writes here; merged over the config file)
    std::vector<double> ppm;
    double r_dipole = -1.0, r_bath = -1.0, t_max = -1.0;
    int order = 0, n_configs = 0, n_mc = 0, n_time = 0, threads = 0;
    std::vector<std::string> methods;
    std::vector<double> lf;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool use_abs = false;
    std::string outdir;
    std::string scale; // "desk" (100 x 64) or "production" (500 x 128)
};

void add_common_options(CLI::App* cmd, CliOptions& opt) {
    cmd->add_option("--config", opt.config_path, "run configuration JSON");
    cmd->add_option("--ppm", opt.ppm, "bath concentrations (ppm of carbon sites)")
        ->delimiter(',');
    cmd->add_option("--order", opt.order, "cluster order (1..4)");
    cmd->add_option("--rdipole", opt.r_dipole, "cluster pairing cutoff (Angstrom; default auto)");
    cmd->add_option("--rbath", opt.r_bath, "bath sphere radius (Angstrom; default auto)");
    cmd->add_option("--configs", opt.n_configs, "number of bath configurations");
    cmd->add_option("--samples", opt.n_mc, "Monte Carlo bath-state samples");
    cmd->add_option("--tmax", opt.t_max, "time grid end (ms; default auto)");
    cmd->add_option("--tpoints", opt.n_time, "time grid points");
    cmd->add_option("--method", opt.methods, "fit methods (exponential|power|linear)")
        ->delimiter(',');
    cmd->add_option("--lf", opt.lf, "truncation levels in (0,1)")->delimiter(',');
    cmd->add_option("--seed", opt.seed, "master seed")->each([&](const std::string&) {
        opt.seed_set = true;
    });
    cmd->add_option("--threads", opt.threads, "worker threads");
    cmd->add_flag("--abs", opt.use_abs, "fit |L| instead of Re L");
    cmd->add_option("--out", opt.outdir, "output directory");
    cmd->add_option("--scale", opt.scale,
                    "ensemble preset: desk (100 configs x 64 samples) or production "
                    "(500 x 128); explicit --configs/--samples override")
        ->check(CLI::IsMember({"desk", "production"}));
}

RunConfig resolve_config(const CliOptions& opt) {
    RunConfig rc = opt.config_path.empty() ? RunConfig{} : RunConfig::from_json_file(opt.config_path);
    if (opt.scale == "desk") {
        rc.n_configs = 100;
        rc.n_mc_samples = 64;
    } else if (opt.scale == "production") {
        rc.n_configs = 500;
        rc.n_mc_samples = 128;
    }
    if (!opt.ppm.empty()) rc.ppm = opt.ppm;
    if (opt.order > 0) rc.order = opt.order;
    if (opt.r_dipole >= 0.0) rc.r_dipole = opt.r_dipole;
    if (opt.r_bath >= 0.0) rc.r_bath = opt.r_bath;
    if (opt.n_configs > 0) rc.n_configs = opt.n_configs;
    if (opt.n_mc > 0) rc.n_mc_samples = opt.n_mc;
    if (opt.t_max >= 0.0) rc.t_max_ms = opt.t_max;
    if (opt.n_time > 0) rc.n_time_points = opt.n_time;
    if (!opt.methods.empty()) {
        rc.methods.clear();
        for (const auto& m : opt.methods) rc.methods.push_back(fit_method_from_string(m));
    }
    if (!opt.lf.empty()) rc.lf = opt.lf;
    if (opt.seed_set) rc.seed = opt.seed;
    if (opt.threads > 0) rc.threads = opt.threads;
    if (opt.use_abs) rc.use_abs = true;
    if (!opt.outdir.empty()) rc.outdir = opt.outdir;
    rc.validate();
    return rc;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Hahn-echo decoherence of an NV center in a dipolar electron-spin bath"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    CliOptions opt;

    // generate
    auto* generate = app.add_subcommand("generate", "draw bath configurations to JSON files");
    int gen_count = 1;
    add_common_options(generate, opt);
    generate->add_option("--count", gen_count, "number of configurations");

    // simulate
    auto* simulate = app.add_subcommand(
        "simulate", "full pipeline: baths, gCCE curves, ensemble average, fits");
    add_common_options(simulate, opt);

    // average
    auto* average = app.add_subcommand("average", "average curve CSVs onto one curve");
    std::vector<std::string> curve_files;
    std::string avg_out = "average.csv";
    average->add_option("curves", curve_files, "curve CSV files")->required();
    average->add_option("--out", avg_out, "output CSV path");

    // fit
    auto* fit_cmd =
        app.add_subcommand("fit", "fit T2 and p from a curve CSV (or every CSV in a directory)");
    std::string fit_curve_file, fit_method = "exponential";
    double fit_lf = 0.4;
    bool fit_abs = false;
    fit_cmd->add_option("curve", fit_curve_file, "curve CSV or directory of CSVs")->required();
    fit_cmd->add_option("--method", fit_method, "exponential|power|linear");
    fit_cmd->add_option("--lf", fit_lf, "truncation level");
    fit_cmd->add_flag("--abs", fit_abs, "fit |L| instead of Re L");

    // bootstrap
    auto* bootstrap = app.add_subcommand(
        "bootstrap", "finite-ensemble uncertainty PDFs by subsampling curve files");
    std::vector<std::string> boot_files;
    std::vector<int> boot_sizes{50, 100, 150, 200, 250};
    int boot_repeats = 200;
    std::string boot_method = "exponential";
    double boot_lf = 0.4;
    std::uint64_t boot_seed = 1;
    std::string boot_out = "bootstrap";
    bootstrap->add_option("curves", boot_files, "member curve CSVs")->required();
    bootstrap->add_option("--sizes", boot_sizes, "subensemble sizes")->delimiter(',');
    bootstrap->add_option("--repeats", boot_repeats, "repeats per size");
    bootstrap->add_option("--method", boot_method, "fit method");
    bootstrap->add_option("--lf", boot_lf, "truncation level");
    bootstrap->add_option("--seed", boot_seed, "resampling seed");
    bootstrap->add_option("--out", boot_out, "output directory");

    // scan
    auto* scan = app.add_subcommand("scan", "convergence scan over cutoffs (and orders)");
    std::vector<double> rd_grid, rb_grid;
    std::vector<int> scan_orders;
    add_common_options(scan, opt);
    scan->add_option("--rdipole-grid", rd_grid, "ascending r_dipole grid")
        ->delimiter(',')
        ->required();
    scan->add_option("--rbath-grid", rb_grid, "ascending r_bath grid")
        ->delimiter(',')
        ->required();
    scan->add_option("--orders", scan_orders, "optional order grid")->delimiter(',');

    // sweep
    auto* sweep = app.add_subcommand("sweep", "T2 vs concentration power law");
    add_common_options(sweep, opt);

    // compare-orders
    auto* compare = app.add_subcommand("compare-orders", "T2 ratios between cluster orders");
    std::vector<int> cmp_orders{2, 3};
    int cmp_reference = 0, cmp_repeats = 100;
    add_common_options(compare, opt);
    compare->add_option("--orders", cmp_orders, "orders to compare")->delimiter(',');
    compare->add_option("--reference", cmp_reference, "reference order (default: largest)");
    compare->add_option("--repeats", cmp_repeats, "bootstrap repeats for error bars");

    // field-scan
    auto* field = app.add_subcommand("field-scan", "T2 vs magnetic field at fixed bath");
    std::vector<double> field_values{1.0, 10.0, 100.0, 500.0};
    add_common_options(field, opt);
    field->add_option("--fields", field_values, "field magnitudes (G, along z)")
        ->delimiter(',');

    // oracle-check
    auto* oracle = app.add_subcommand(
        "oracle-check", "gCCE against exact diagonalization on random small baths");
    int oracle_baths = 50, oracle_spins = 4, oracle_samples = 8, oracle_points = 21;
    double oracle_tol = 1e-8;
    std::uint64_t oracle_seed = 1;
    oracle->add_option("--baths", oracle_baths, "number of random baths");
    oracle->add_option("--max-spins", oracle_spins, "bath size limit (2..4)");
    oracle->add_option("--samples", oracle_samples, "bath-state samples per bath");
    oracle->add_option("--tpoints", oracle_points, "time grid points");
    oracle->add_option("--tolerance", oracle_tol, "max |dL| allowed");
    oracle->add_option("--seed", oracle_seed, "seed");

    CLI11_PARSE(app, argc, argv);

    if (generate->parsed()) {
        RunConfig rc = resolve_config(opt);
        const fs::path dir = rc.outdir.empty() ? fs::path("baths") : fs::path(rc.outdir);
        fs::create_directories(dir);
        for (double ppm : rc.ppm)
            for (int i = 0; i < gen_count; ++i) {
                const auto cutoffs = default_cutoffs(rc.order, ppm);
                const double rb = rc.r_bath > 0.0 ? rc.r_bath : cutoffs.second;
                const auto seed = derive_seed(rc.seed, 0x6261746867656eULL ^
                                              std::bit_cast<std::uint64_t>(ppm),
                                              static_cast<std::uint64_t>(i));
                char name[64];
                std::snprintf(name, sizeof name, "bath_ppm%g_%03d.json", ppm, i);
                const auto config = generate_configuration(
                    ppm, rb, LatticeSpec{}, seed, std::string(name, std::strlen(name) - 5));
                save_configuration(config, dir / name);
                std::cout << (dir / name).string() << "  spins=" << config.size() << "\n";
            }
        return 0;
    }

    if (simulate->parsed()) {
        RunConfig rc = resolve_config(opt);
        if (rc.outdir.empty()) rc.outdir = "run";
        const SimulationResult result = run_simulation(rc);
        std::cout << summary_json(result).dump(1) << "\n";
        std::cerr << "summary written to " << (fs::path(rc.outdir) / "summary.json").string()
                  << "\n";
        return 0;
    }

    if (average->parsed()) {
        std::vector<CoherenceCurve> curves;
        for (const auto& f : curve_files) curves.push_back(load_curve(f));
        save_curve(ensemble_average(curves), avg_out);
        std::cout << avg_out << "\n";
        return 0;
    }

    if (fit_cmd->parsed()) {
        auto fit_one = [&](const fs::path& path) {
            const CoherenceCurve curve = load_curve(path);
            const FitResult fit =
                fit_curve(curve, fit_method_from_string(fit_method), fit_lf, fit_abs);
            nlohmann::ordered_json j;
            j["curve"] = path.string();
            j["method"] = to_string(fit.method);
            j["lf"] = fit.lf;
            j["t2_ms"] = fit.t2_ms;
            j["t2_us"] = fit.t2_ms * 1e3;
            j["p"] = fit.p;
            j["covariance"] = {{fit.covariance(0, 0), fit.covariance(0, 1)},
                               {fit.covariance(1, 0), fit.covariance(1, 1)}};
            j["points_used"] = fit.points_used;
            j["residual_norm"] = fit.residual_norm;
            j["converged"] = fit.converged;
            return j;
        };
        if (fs::is_directory(fit_curve_file)) {
            // batch mode over a directory of curves
            std::vector<fs::path> files;
            for (const auto& entry : fs::directory_iterator(fit_curve_file))
                if (entry.path().extension() == ".csv") files.push_back(entry.path());
            std::sort(files.begin(), files.end());
            if (files.empty())
                throw std::invalid_argument("fit: no curve CSVs in " + fit_curve_file);
            auto arr = nlohmann::ordered_json::array();
            for (const auto& f : files) {
                try {
                    arr.push_back(fit_one(f));
                } catch (const std::exception& e) {
                    arr.push_back(nlohmann::ordered_json{{"curve", f.string()},
                                                         {"error", e.what()}});
                }
            }
            std::cout << arr.dump(1) << "\n";
        } else {
            std::cout << fit_one(fit_curve_file).dump(1) << "\n";
        }
        return 0;
    }

    if (bootstrap->parsed()) {
        std::vector<CoherenceCurve> curves;
        for (const auto& f : boot_files) curves.push_back(load_curve(f));
        BootstrapOptions bo;
        bo.repeats = boot_repeats;
        bo.method = fit_method_from_string(boot_method);
        bo.lf = boot_lf;
        bo.seed = boot_seed;
        std::vector<int> sizes;
        for (int n : boot_sizes)
            if (n <= static_cast<int>(curves.size())) sizes.push_back(n);
        if (sizes.empty())
            throw std::invalid_argument("bootstrap: no subensemble size fits the member count");
        const EnsembleReport report = bootstrap_report(curves, sizes, bo);
        write_bootstrap_report(report, boot_out);
        std::cout << (fs::path(boot_out) / "bootstrap_summary.json").string() << "\n";
        return 0;
    }

    if (scan->parsed()) {
        RunConfig rc = resolve_config(opt);
        const ConvergenceScan result = scan_convergence(rc, rd_grid, rb_grid, scan_orders);
        const fs::path out =
            rc.outdir.empty() ? fs::path("scan.json") : fs::path(rc.outdir) / "scan.json";
        write_scan(result, out);
        for (const auto& b : result.per_ppm)
            std::cout << b.ppm << " ppm: r_dipole " << b.converged_r_dipole << " A, r_bath "
                      << b.converged_r_bath << " A\n";
        std::cerr << "scan written to " << out.string() << "\n";
        return 0;
    }

    if (sweep->parsed()) {
        RunConfig rc = resolve_config(opt);
        const SweepResult result = sweep_concentration(rc);
        const fs::path out =
            rc.outdir.empty() ? fs::path("sweep.json") : fs::path(rc.outdir) / "sweep.json";
        write_sweep(result, out);
        for (const auto& e : result.entries)
            std::cout << to_string(e.method) << " lf=" << e.lf << ": slope " << e.slope.slope
                      << " +- " << e.slope.slope_stderr << "\n";
        for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
        return 0;
    }

    if (compare->parsed()) {
        RunConfig rc = resolve_config(opt);
        const int ref =
            cmp_reference > 0 ? cmp_reference : *std::max_element(cmp_orders.begin(), cmp_orders.end());
        const OrderComparison result = compare_orders(rc, cmp_orders, ref, cmp_repeats);
        const fs::path out = rc.outdir.empty() ? fs::path("orders.json")
                                               : fs::path(rc.outdir) / "orders.json";
        write_order_comparison(result, out);
        for (const auto& b : result.per_ppm) {
            std::cout << b.ppm << " ppm:";
            for (std::size_t i = 0; i < b.orders.size(); ++i)
                std::cout << "  T2(" << b.orders[i] << ")/T2(" << ref << ") = " << b.ratio[i]
                          << " +- " << b.ratio_err[i];
            std::cout << "\n";
        }
        return 0;
    }

    if (field->parsed()) {
        RunConfig rc = resolve_config(opt);
        const FieldScan result = field_sensitivity(rc, field_values);
        const fs::path out = rc.outdir.empty() ? fs::path("field_scan.json")
                                               : fs::path(rc.outdir) / "field_scan.json";
        write_field_scan(result, out);
        for (std::size_t i = 0; i < result.field_gauss.size(); ++i)
            std::cout << result.field_gauss[i] << " G: T2 = " << result.t2_ms[i] * 1e3
                      << " us, p = " << result.p[i]
                      << (result.degenerate_zeeman[i] ? "  (degenerate Zeeman)" : "") << "\n";
        std::cout << "relative T2 spread: " << result.t2_spread << "\n";
        return 0;
    }

    if (oracle->parsed()) {
        const OracleCheck check = oracle_check(oracle_baths, oracle_spins, oracle_seed,
                                               oracle_tol, oracle_samples, oracle_points);
        std::cout << "baths: " << check.n_baths << "\nmax |dL|: " << check.max_deviation
                  << "\ntolerance: " << check.tolerance << "\n"
                  << (check.pass ? "PASS" : "FAIL") << "\n";
        if (!check.pass) throw ComputeFailure("oracle check failed");
        return 0;
    }

    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const ComputeFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::length_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
