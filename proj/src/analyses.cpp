#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "spinecho/curve_io.hpp"
#include "spinecho/rng.hpp"
#include "spinecho/version.hpp"
#include "spinecho/workflows.hpp"

namespace spinecho {

namespace {

constexpr std::uint64_t kStreamOrderBoot = 0x6f726462ULL;  // "ordb"
constexpr std::uint64_t kStreamOracle = 0x6f72636cULL;     // "orcl"

void write_json(const nlohmann::ordered_json& j, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << j.dump(1) << "\n";
}

// First exponential fit at L_f = 0.4 on the ensemble average of a one-off
// run; NaN signals a failed fit.
ScanPoint scan_point(const RunConfig& rc, double grid_value) {
    ScanPoint pt;
    pt.value = grid_value;
    const SimulationResult sim = run_simulation(rc);
    const auto& fits = sim.per_ppm.front().fits;
    if (!fits.empty() && fits.front().ok) {
        pt.t2_ms = fits.front().fit.t2_ms;
        pt.p = fits.front().fit.p;
        pt.fit_ok = true;
    }
    return pt;
}

// Smallest grid value beyond which every successive (T2, p) change stays
// under 5%; 0 when the grid does not bracket convergence.
double converged_value(const std::vector<ScanPoint>& points) {
    const int n = static_cast<int>(points.size());
    if (n < 2) return 0.0;
    std::vector<bool> small(static_cast<std::size_t>(n), false);
    for (int k = 1; k < n; ++k) {
        const auto& a = points[static_cast<std::size_t>(k - 1)];
        const auto& b = points[static_cast<std::size_t>(k)];
        if (!a.fit_ok || !b.fit_ok) continue;
        const double dt2 = std::abs(b.t2_ms - a.t2_ms) / std::abs(b.t2_ms);
        const double dp = std::abs(b.p - a.p) / std::abs(b.p);
        small[static_cast<std::size_t>(k)] = dt2 < 0.05 && dp < 0.05;
    }
    for (int k = 0; k + 1 < n; ++k) {
        bool all = true;
        for (int m = k + 1; m < n; ++m) all = all && small[static_cast<std::size_t>(m)];
        if (all) return points[static_cast<std::size_t>(k)].value;
    }
    return 0.0;
}

nlohmann::ordered_json scan_points_json(const std::vector<ScanPoint>& pts) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : pts) {
        nlohmann::ordered_json e;
        e["value"] = p.value;
        e["fit_ok"] = p.fit_ok;
        if (p.fit_ok) {
            e["t2_ms"] = p.t2_ms;
            e["p"] = p.p;
        }
        arr.push_back(std::move(e));
    }
    return arr;
}

} // namespace

ConvergenceScan scan_convergence(const RunConfig& base, const std::vector<double>& r_dipole_grid,
                                 const std::vector<double>& r_bath_grid,
                                 const std::vector<int>& orders) {
    base.validate();
    if (r_dipole_grid.size() < 2 || r_bath_grid.size() < 2)
        throw std::invalid_argument("scan_convergence: grids need at least two points");
    if (!std::is_sorted(r_dipole_grid.begin(), r_dipole_grid.end()) ||
        !std::is_sorted(r_bath_grid.begin(), r_bath_grid.end()))
        throw std::invalid_argument("scan_convergence: grids must be ascending");

    ConvergenceScan scan;
    scan.base = base;

    for (double ppm : base.ppm) {
        ConvergenceScan::PerPpm block;
        block.ppm = ppm;

        RunConfig rc = base;
        rc.ppm = {ppm};
        rc.methods = {FitMethod::Exponential};
        rc.lf = {0.4};
        rc.outdir.clear();

        // r_dipole scan at the widest bath radius (fixed baths).
        rc.r_bath = r_bath_grid.back();
        for (double rd : r_dipole_grid) {
            rc.r_dipole = rd;
            block.r_dipole_scan.push_back(scan_point(rc, rd));
        }
        block.converged_r_dipole = converged_value(block.r_dipole_scan);

        // r_bath scan at the converged (or widest) dipole radius.
        rc.r_dipole =
            block.converged_r_dipole > 0.0 ? block.converged_r_dipole : r_dipole_grid.back();
        for (double rb : r_bath_grid) {
            rc.r_bath = rb;
            block.r_bath_scan.push_back(scan_point(rc, rb));
        }
        block.converged_r_bath = converged_value(block.r_bath_scan);

        if (!orders.empty()) {
            rc.r_dipole = block.converged_r_dipole > 0.0 ? block.converged_r_dipole
                                                         : r_dipole_grid.back();
            rc.r_bath =
                block.converged_r_bath > 0.0 ? block.converged_r_bath : r_bath_grid.back();
            for (int order : orders) {
                rc.order = order;
                block.order_scan.push_back(scan_point(rc, static_cast<double>(order)));
            }
            block.converged_order = static_cast<int>(converged_value(block.order_scan));
        }

        scan.per_ppm.push_back(std::move(block));
    }
    return scan;
}

void write_scan(const ConvergenceScan& scan, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["schema"] = "spinecho.convergence-scan/1";
    j["version"] = kVersion;
    j["run_config"] = scan.base.to_json();
    auto& blocks = j["per_ppm"] = nlohmann::ordered_json::array();
    for (const auto& b : scan.per_ppm) {
        nlohmann::ordered_json e;
        e["ppm"] = b.ppm;
        e["r_dipole_scan"] = scan_points_json(b.r_dipole_scan);
        e["r_bath_scan"] = scan_points_json(b.r_bath_scan);
        if (!b.order_scan.empty()) e["order_scan"] = scan_points_json(b.order_scan);
        e["converged_r_dipole"] = b.converged_r_dipole;
        e["converged_r_bath"] = b.converged_r_bath;
        if (b.converged_order > 0) e["converged_order"] = b.converged_order;
        if (b.converged_r_dipole == 0.0 || b.converged_r_bath == 0.0)
            e["note"] = "grid too coarse to bracket convergence";
        blocks.push_back(std::move(e));
    }
    write_json(j, path);
}

SlopeFit loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("loglog_slope: need at least two points");
    std::set<double> unique(x.begin(), x.end());
    if (unique.size() != x.size())
        throw std::invalid_argument("loglog_slope: duplicate abscissae (degenerate regression)");
    const int n = static_cast<int>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        const double lx = std::log10(x[static_cast<std::size_t>(i)]);
        const double ly = std::log10(y[static_cast<std::size_t>(i)]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double det = n * sxx - sx * sx;
    SlopeFit f;
    f.n = n;
    f.slope = (n * sxy - sx * sy) / det;
    f.intercept = (sxx * sy - sx * sxy) / det;
    double rss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = f.slope * std::log10(x[static_cast<std::size_t>(i)]) + f.intercept -
                         std::log10(y[static_cast<std::size_t>(i)]);
        rss += r * r;
    }
    f.slope_stderr = n > 2 ? std::sqrt(rss / (n - 2) * n / det) : 0.0;
    return f;
}

SweepResult sweep_concentration(const RunConfig& rc) {
    rc.validate();
    if (rc.ppm.size() < 3)
        throw std::invalid_argument("sweep_concentration: need at least three concentrations");
    std::set<double> unique(rc.ppm.begin(), rc.ppm.end());
    if (unique.size() != rc.ppm.size())
        throw std::invalid_argument("sweep_concentration: duplicate concentrations");

    SweepResult sweep;
    sweep.sim = run_simulation(rc);

    for (FitMethod method : rc.methods)
        for (double lf : rc.lf) {
            SweepResult::Entry entry;
            entry.method = method;
            entry.lf = lf;
            for (const auto& block : sweep.sim.per_ppm) {
                const auto it = std::find_if(
                    block.fits.begin(), block.fits.end(), [&](const FitEntry& e) {
                        return e.method == method && e.lf == lf && e.ok;
                    });
                if (it == block.fits.end()) {
                    sweep.warnings.push_back("no " + to_string(method) + " fit at " +
                                             std::to_string(block.ppm) + " ppm; skipped");
                    continue;
                }
                entry.ppm.push_back(block.ppm);
                entry.t2_ms.push_back(it->fit.t2_ms);
                entry.p.push_back(it->fit.p);
            }
            if (entry.ppm.size() >= 2) entry.slope = loglog_slope(entry.ppm, entry.t2_ms);
            sweep.entries.push_back(std::move(entry));
        }
    return sweep;
}

void write_sweep(const SweepResult& sweep, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["schema"] = "spinecho.concentration-sweep/1";
    j["version"] = kVersion;
    j["run_config"] = sweep.sim.config.to_json();
    j["warnings"] = sweep.warnings;
    auto& entries = j["entries"] = nlohmann::ordered_json::array();
    for (const auto& e : sweep.entries) {
        nlohmann::ordered_json b;
        b["method"] = to_string(e.method);
        b["lf"] = e.lf;
        b["ppm"] = e.ppm;
        b["t2_ms"] = e.t2_ms;
        b["p"] = e.p;
        b["slope"] = e.slope.slope;
        b["slope_stderr"] = e.slope.slope_stderr;
        entries.push_back(std::move(b));
    }
    write_json(j, path);
}

OrderComparison compare_orders(const RunConfig& rc, const std::vector<int>& orders,
                               int reference, int bootstrap_repeats) {
    rc.validate();
    if (orders.empty()) throw std::invalid_argument("compare_orders: no orders");
    std::vector<int> all = orders;
    if (std::find(all.begin(), all.end(), reference) == all.end()) all.push_back(reference);
    for (int order : all) {
        if (order < 1 || order > kMaxOrder)
            throw std::invalid_argument("compare_orders: order out of [1, 4]");
        if (order >= 4)
            for (double ppm : rc.ppm)
                if (ppm > rc.order4_ppm_cap)
                    throw std::invalid_argument(
                        "compare_orders: order 4 at " + std::to_string(ppm) +
                        " ppm exceeds the cost cap of " + std::to_string(rc.order4_ppm_cap) +
                        " ppm; raise order4_ppm_cap explicitly to override");
    }

    // Shared baths: all orders see the same configurations, so cutoffs are
    // the widest over the set.
    OrderComparison cmp;
    cmp.reference = reference;
    for (int order : all) {
        const auto c = default_cutoffs(order, *std::min_element(rc.ppm.begin(), rc.ppm.end()));
        cmp.r_dipole = std::max(cmp.r_dipole, rc.r_dipole > 0.0 ? rc.r_dipole : c.first);
        cmp.r_bath = std::max(cmp.r_bath, rc.r_bath > 0.0 ? rc.r_bath : c.second);
    }

    std::vector<SimulationResult> sims;
    for (int order : all) {
        RunConfig sub = rc;
        sub.order = order;
        sub.r_dipole = cmp.r_dipole;
        sub.r_bath = cmp.r_bath;
        if (!rc.outdir.empty())
            sub.outdir = (std::filesystem::path(rc.outdir) /
                          ("order_" + std::to_string(order)))
                             .string();
        sims.push_back(run_simulation(sub));
    }

    const auto ref_pos = static_cast<std::size_t>(
        std::find(all.begin(), all.end(), reference) - all.begin());

    for (std::size_t pi = 0; pi < rc.ppm.size(); ++pi) {
        OrderComparison::PerPpm block;
        block.ppm = rc.ppm[pi];
        block.orders = all;

        std::vector<const PpmResult*> per_order;
        for (const auto& sim : sims) per_order.push_back(&sim.per_ppm[pi]);

        const FitMethod method = rc.methods.front();
        const double lf = rc.lf.front();
        std::vector<double> t2(all.size(), 0.0);
        for (std::size_t oi = 0; oi < all.size(); ++oi) {
            const FitResult fit = fit_curve(per_order[oi]->average, method, lf, rc.use_abs);
            t2[oi] = fit.t2_ms;
        }
        block.t2_ms = t2;
        for (std::size_t oi = 0; oi < all.size(); ++oi)
            block.ratio.push_back(t2[oi] / t2[ref_pos]);

        // Paired bootstrap over shared configurations.
        const int m = static_cast<int>(per_order[ref_pos]->curves.size());
        std::vector<std::vector<double>> ratios(all.size());
        for (int rep = 0; rep < bootstrap_repeats; ++rep) {
            Rng rng(derive_seed(rc.seed, kStreamOrderBoot, static_cast<std::uint64_t>(rep)));
            std::vector<int> pick(static_cast<std::size_t>(m));
            for (auto& v : pick) v = static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
            std::vector<double> t2_rep(all.size(), 0.0);
            bool ok = true;
            for (std::size_t oi = 0; oi < all.size() && ok; ++oi) {
                CoherenceCurve avg;
                avg.t_ms = per_order[oi]->average.t_ms;
                avg.values.setZero(avg.t_ms.size());
                for (int idx : pick)
                    avg.values += per_order[oi]->curves[static_cast<std::size_t>(idx)].values;
                avg.values /= static_cast<double>(m);
                try {
                    t2_rep[oi] = fit_curve(avg, method, lf, rc.use_abs).t2_ms;
                } catch (const std::exception&) {
                    ok = false;
                }
            }
            if (!ok) continue;
            for (std::size_t oi = 0; oi < all.size(); ++oi)
                ratios[oi].push_back(t2_rep[oi] / t2_rep[ref_pos]);
        }
        for (std::size_t oi = 0; oi < all.size(); ++oi) {
            double mean = 0.0, var = 0.0;
            const auto& r = ratios[oi];
            for (double v : r) mean += v;
            mean = r.empty() ? 0.0 : mean / static_cast<double>(r.size());
            for (double v : r) var += (v - mean) * (v - mean);
            block.ratio_err.push_back(
                r.size() > 1 ? std::sqrt(var / (static_cast<double>(r.size()) - 1.0)) : 0.0);
        }
        cmp.per_ppm.push_back(std::move(block));
    }
    return cmp;
}

void write_order_comparison(const OrderComparison& cmp, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["schema"] = "spinecho.order-comparison/1";
    j["version"] = kVersion;
    j["reference_order"] = cmp.reference;
    j["r_dipole"] = cmp.r_dipole;
    j["r_bath"] = cmp.r_bath;
    auto& blocks = j["per_ppm"] = nlohmann::ordered_json::array();
    for (const auto& b : cmp.per_ppm) {
        nlohmann::ordered_json e;
        e["ppm"] = b.ppm;
        e["orders"] = b.orders;
        e["t2_ms"] = b.t2_ms;
        e["ratio_to_reference"] = b.ratio;
        e["ratio_err"] = b.ratio_err;
        blocks.push_back(std::move(e));
    }
    write_json(j, path);
}

FieldScan field_sensitivity(const RunConfig& rc, const std::vector<double>& fields_gauss) {
    rc.validate();
    if (fields_gauss.empty()) throw std::invalid_argument("field_sensitivity: no field values");

    FieldScan scan;
    scan.ppm = rc.ppm.front();
    for (double b : fields_gauss) {
        RunConfig sub = rc;
        sub.ppm = {scan.ppm};
        sub.b_field = Eigen::Vector3d(0.0, 0.0, b);
        sub.outdir.clear();
        const SimulationResult sim = run_simulation(sub);
        const auto& fits = sim.per_ppm.front().fits;
        scan.field_gauss.push_back(b);
        scan.degenerate_zeeman.push_back(b == 0.0);
        if (!fits.empty() && fits.front().ok) {
            scan.t2_ms.push_back(fits.front().fit.t2_ms);
            scan.p.push_back(fits.front().fit.p);
        } else {
            scan.t2_ms.push_back(std::numeric_limits<double>::quiet_NaN());
            scan.p.push_back(std::numeric_limits<double>::quiet_NaN());
        }
    }
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0, mean = 0.0;
    int n = 0;
    for (double t2 : scan.t2_ms) {
        if (!std::isfinite(t2)) continue;
        lo = std::min(lo, t2);
        hi = std::max(hi, t2);
        mean += t2;
        ++n;
    }
    scan.t2_spread = n > 0 ? (hi - lo) / (mean / n) : 0.0;
    return scan;
}

void write_field_scan(const FieldScan& scan, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["schema"] = "spinecho.field-scan/1";
    j["version"] = kVersion;
    j["ppm"] = scan.ppm;
    auto& rows = j["rows"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < scan.field_gauss.size(); ++i) {
        nlohmann::ordered_json e;
        e["b_gauss"] = scan.field_gauss[i];
        e["t2_ms"] = scan.t2_ms[i];
        e["p"] = scan.p[i];
        if (scan.degenerate_zeeman[i]) e["degenerate_zeeman"] = true;
        rows.push_back(std::move(e));
    }
    j["t2_spread"] = scan.t2_spread;
    write_json(j, path);
}

EnsembleReport bootstrap_report(const std::vector<CoherenceCurve>& curves,
                                const std::vector<int>& sizes, const BootstrapOptions& opts) {
    EnsembleReport report;
    report.members = curves;
    report.average = ensemble_average(curves);
    for (int n : sizes) report.bootstrap.push_back(bootstrap_subsample(curves, n, opts));
    return report;
}

void write_bootstrap_report(const EnsembleReport& report,
                            const std::filesystem::path& outdir) {
    std::filesystem::create_directories(outdir);
    nlohmann::ordered_json j;
    j["schema"] = "spinecho.bootstrap-report/1";
    j["version"] = kVersion;
    j["members"] = static_cast<int>(report.members.size());
    auto& blocks = j["subensembles"] = nlohmann::ordered_json::array();

    for (const auto& b : report.bootstrap) {
        for (const char* quantity : {"t2", "p"}) {
            const Histogram& h = quantity == std::string("t2") ? b.pdf_t2 : b.pdf_p;
            const auto csv = outdir / ("pdf_" + std::string(quantity) + "_N" +
                                       std::to_string(b.subensemble_size) + ".csv");
            std::ofstream out(csv);
            out << "bin_center,density\n";
            char line[64];
            for (std::size_t i = 0; i < h.centers.size(); ++i) {
                std::snprintf(line, sizeof line, "%.17g,%.17g\n", h.centers[i], h.density[i]);
                out << line;
            }
        }
        nlohmann::ordered_json e;
        e["N"] = b.subensemble_size;
        e["repeats"] = b.repeats;
        e["failures"] = b.failures;
        e["reference_t2_ms"] = b.reference_t2;
        e["reference_p"] = b.reference_p;
        for (const char* quantity : {"t2", "p"}) {
            const auto& d = quantity == std::string("t2") ? b.delta_t2 : b.delta_p;
            if (d.empty()) continue;
            nlohmann::ordered_json q;
            q["p5"] = percentile(d, 5.0);
            q["p16"] = percentile(d, 15.865);
            q["p50"] = percentile(d, 50.0);
            q["p84"] = percentile(d, 84.135);
            q["p95"] = percentile(d, 95.0);
            q["half_width"] = half_width(d);
            e[std::string("delta_") + quantity] = std::move(q);
        }
        blocks.push_back(std::move(e));
    }
    write_json(j, outdir / "bootstrap_summary.json");
}

OracleCheck oracle_check(int n_baths, int max_spins, std::uint64_t seed, double tolerance,
                         int n_samples, int n_time_points) {
    if (n_baths < 1) throw std::invalid_argument("oracle_check: n_baths must be >= 1");
    if (max_spins < 2 || max_spins > 4)
        throw std::invalid_argument("oracle_check: max_spins must be in [2, 4]");

    OracleCheck check;
    check.n_baths = n_baths;
    check.tolerance = tolerance;

    const CentralSpin central = CentralSpin::nv();
    const ExternalField field{Vector3d(0.0, 0.0, 100.0)};
    const double r_bath = 40.0;
    // Tuned so the sphere holds ~3 spins on average at 60 ppm.
    const double ppm = 3.0 / expected_spin_count(1.0, r_bath);

    // Representative dilute-bath geometry: spins at least 12 A from the
    // defect and from each other, as in the sub-100-ppm regime. The guards
    // of the truncated expansion stay silent there, so gCCE at full order
    // must reproduce exact diagonalization identically.
    auto acceptable = [](const SpinBathConfiguration& c, int lo, int hi) {
        if (c.size() < lo || c.size() > hi) return false;
        for (int i = 0; i < c.size(); ++i) {
            if (c.spins[static_cast<std::size_t>(i)].position.norm() < 12.0) return false;
            for (int j = i + 1; j < c.size(); ++j)
                if ((c.spins[static_cast<std::size_t>(i)].position -
                     c.spins[static_cast<std::size_t>(j)].position)
                        .norm() < 12.0)
                    return false;
        }
        return true;
    };

    std::uint64_t attempt = 0;
    for (int bath = 0; bath < n_baths; ++bath) {
        SpinBathConfiguration config;
        do {
            config = generate_configuration(
                ppm, r_bath, LatticeSpec{}, derive_seed(seed, kStreamOracle, attempt++),
                "oracle-" + std::to_string(bath));
        } while (!acceptable(config, 2, max_spins));

        const TimeGrid grid = TimeGrid::for_concentration(60.0, n_time_points);
        const NeighborGraph graph = build_neighbor_graph(config, 10.0 * r_bath);
        const ClusterSet set = enumerate_clusters(graph, config.size());

        GcceOptions gcce;
        gcce.n_samples = n_samples;
        gcce.seed = derive_seed(seed, kStreamOracle ^ 0xffULL, static_cast<std::uint64_t>(bath));
        const CoherenceCurve approx = gcce_coherence(config, set, central, field, grid, gcce);

        ExactOptions exact;
        exact.n_samples = n_samples;
        exact.seed = gcce.seed;
        const CoherenceCurve reference = exact_coherence(config, central, field, grid, exact);

        const double dev = (approx.values - reference.values).cwiseAbs().maxCoeff();
        check.max_deviation = std::max(check.max_deviation, dev);
    }
    check.pass = check.max_deviation < tolerance;
    return check;
}

} // namespace spinecho
