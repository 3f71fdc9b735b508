#include "spinecho/workflows.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

#include "spinecho/curve_io.hpp"
#include "spinecho/parallel.hpp"
#include "spinecho/rng.hpp"
#include "spinecho/version.hpp"

namespace spinecho {

namespace {

constexpr std::uint64_t kStreamBathGen = 0x6261746867656eULL; // "bathgen"
constexpr std::uint64_t kStreamMcGen = 0x6d6373616d70ULL;     // "mcsamp"

std::uint64_t ppm_stream(std::uint64_t base, double ppm) {
    return base ^ std::bit_cast<std::uint64_t>(ppm);
}

std::string ppm_tag(double ppm) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", ppm);
    return buf;
}

} // namespace

std::pair<double, double> default_cutoffs(int order, double ppm) {
    if (ppm <= 0.0) return {400.0, 500.0}; // nothing decays; 1 ppm geometry
    static const double kPpm[4] = {0.1, 1.0, 10.0, 100.0};
    static const double kRd2[4] = {850.0, 400.0, 210.0, 105.0};
    static const double kRb2[4] = {1000.0, 500.0, 250.0, 125.0};
    static const double kRd3[4] = {650.0, 300.0, 170.0, 90.0};
    static const double kRb3[4] = {1100.0, 600.0, 340.0, 180.0};
    const double* rd = (order >= 3) ? kRd3 : kRd2;
    const double* rb = (order >= 3) ? kRb3 : kRb2;

    const double lx = std::log(ppm);
    auto interp = [&](const double* table) {
        for (int k = 0; k < 4; ++k)
            if (ppm == kPpm[k]) return table[k];
        int seg = 0;
        while (seg < 2 && ppm > kPpm[seg + 1]) ++seg; // clamp outside => edge slope
        const double x0 = std::log(kPpm[seg]), x1 = std::log(kPpm[seg + 1]);
        const double y0 = std::log(table[seg]), y1 = std::log(table[seg + 1]);
        return std::exp(y0 + (y1 - y0) * (lx - x0) / (x1 - x0));
    };
    return {interp(rd), interp(rb)};
}

void RunConfig::validate() const {
    if (ppm.empty()) throw std::invalid_argument("run config: empty concentration list");
    for (double p : ppm)
        if (p < 0.0 || p > 1e6)
            throw std::invalid_argument("run config: ppm out of [0, 1e6]");
    if (order < 1 || order > kMaxOrder)
        throw std::invalid_argument("run config: order out of [1, 4]");
    if (n_configs < 1) throw std::invalid_argument("run config: n_configs must be >= 1");
    if (n_mc_samples < 1) throw std::invalid_argument("run config: n_mc_samples must be >= 1");
    if (n_time_points < 2) throw std::invalid_argument("run config: need >= 2 time points");
    if (methods.empty()) throw std::invalid_argument("run config: no fit methods");
    if (lf.empty()) throw std::invalid_argument("run config: no truncation levels");
    for (double f : lf)
        if (!(f > 0.0 && f < 1.0))
            throw std::invalid_argument("run config: L_f must lie in (0, 1)");
    if (threads < 1) throw std::invalid_argument("run config: threads must be >= 1");
    if (!b_field.allFinite()) throw std::invalid_argument("run config: non-finite field");
}

nlohmann::ordered_json RunConfig::to_json() const {
    nlohmann::ordered_json j;
    j["ppm"] = ppm;
    j["order"] = order;
    if (r_dipole > 0.0)
        j["r_dipole"] = r_dipole;
    else
        j["r_dipole"] = "auto";
    if (r_bath > 0.0)
        j["r_bath"] = r_bath;
    else
        j["r_bath"] = "auto";
    j["b_field"] = {b_field[0], b_field[1], b_field[2]};
    j["n_configs"] = n_configs;
    j["n_mc_samples"] = n_mc_samples;
    if (t_max_ms > 0.0)
        j["t_max_ms"] = t_max_ms;
    else
        j["t_max_ms"] = "auto";
    j["n_time_points"] = n_time_points;
    std::vector<std::string> names;
    for (auto m : methods) names.push_back(to_string(m));
    j["fit_methods"] = names;
    j["lf"] = lf;
    j["seed"] = seed;
    j["threads"] = threads;
    j["use_abs"] = use_abs;
    j["zfs_splitting"] = zfs_splitting;
    j["order4_ppm_cap"] = order4_ppm_cap;
    j["outdir"] = outdir;
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig rc;
    auto number_or_auto = [](const nlohmann::json& v, double fallback) {
        if (v.is_string()) {
            if (v.get<std::string>() != "auto")
                throw std::invalid_argument("run config: expected number or \"auto\"");
            return fallback;
        }
        return v.get<double>();
    };
    try {
        if (j.contains("ppm")) {
            if (j["ppm"].is_array())
                rc.ppm = j["ppm"].get<std::vector<double>>();
            else
                rc.ppm = {j["ppm"].get<double>()};
        }
        if (j.contains("order")) rc.order = j["order"].get<int>();
        if (j.contains("r_dipole")) rc.r_dipole = number_or_auto(j["r_dipole"], 0.0);
        if (j.contains("r_bath")) rc.r_bath = number_or_auto(j["r_bath"], 0.0);
        if (j.contains("b_field"))
            for (int a = 0; a < 3; ++a) rc.b_field[a] = j["b_field"].at(a).get<double>();
        if (j.contains("n_configs")) rc.n_configs = j["n_configs"].get<int>();
        if (j.contains("n_mc_samples")) rc.n_mc_samples = j["n_mc_samples"].get<int>();
        if (j.contains("t_max_ms")) rc.t_max_ms = number_or_auto(j["t_max_ms"], 0.0);
        if (j.contains("n_time_points")) rc.n_time_points = j["n_time_points"].get<int>();
        if (j.contains("fit_methods")) {
            rc.methods.clear();
            for (const auto& name : j["fit_methods"])
                rc.methods.push_back(fit_method_from_string(name.get<std::string>()));
        }
        if (j.contains("lf")) {
            if (j["lf"].is_array())
                rc.lf = j["lf"].get<std::vector<double>>();
            else
                rc.lf = {j["lf"].get<double>()};
        }
        if (j.contains("seed")) rc.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("threads")) rc.threads = j["threads"].get<int>();
        if (j.contains("use_abs")) rc.use_abs = j["use_abs"].get<bool>();
        if (j.contains("zfs_splitting")) rc.zfs_splitting = j["zfs_splitting"].get<double>();
        if (j.contains("order4_ppm_cap")) rc.order4_ppm_cap = j["order4_ppm_cap"].get<double>();
        if (j.contains("outdir")) rc.outdir = j["outdir"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("run config: malformed field: ") + e.what());
    }
    rc.validate();
    return rc;
}

RunConfig RunConfig::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("run config: cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("run config: " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

namespace {

struct ResolvedPpm {
    double ppm;
    double r_dipole, r_bath;
    TimeGrid grid;
};

ResolvedPpm resolve_ppm(const RunConfig& rc, double ppm) {
    ResolvedPpm r;
    r.ppm = ppm;
    const auto cutoffs = default_cutoffs(rc.order, ppm);
    r.r_dipole = rc.r_dipole > 0.0 ? rc.r_dipole : cutoffs.first;
    r.r_bath = rc.r_bath > 0.0 ? rc.r_bath : cutoffs.second;
    r.grid = rc.t_max_ms > 0.0 ? TimeGrid::linear(rc.t_max_ms, rc.n_time_points)
                               : TimeGrid::for_concentration(ppm, rc.n_time_points);
    return r;
}

bool checkpoint_matches(const CoherenceCurve& curve, const RunConfig& rc,
                        const ResolvedPpm& res, std::uint64_t config_seed,
                        std::uint64_t mc_seed) {
    const auto& m = curve.meta;
    return m.source == "gcce" && m.order == rc.order && m.r_dipole == res.r_dipole &&
           m.r_bath == res.r_bath && m.n_mc_samples == rc.n_mc_samples && m.seed == mc_seed &&
           m.config_seed == config_seed && curve.size() == res.grid.size() &&
           (curve.t_ms - res.grid.t_ms).cwiseAbs().maxCoeff() == 0.0 &&
           (m.b_field - rc.b_field).cwiseAbs().maxCoeff() == 0.0;
}

} // namespace

SimulationResult run_simulation(const RunConfig& rc) {
    rc.validate();
    SimulationResult result;
    result.config = rc;

    const CentralSpin central = CentralSpin::nv(rc.zfs_splitting);
    const ExternalField field{rc.b_field};
    const bool to_disk = !rc.outdir.empty();
    const std::filesystem::path outdir = rc.outdir;
    nlohmann::ordered_json provenance;
    if (to_disk) {
        std::filesystem::create_directories(outdir);
        provenance = nlohmann::ordered_json{{"version", kVersion}, {"run_config", rc.to_json()}};
        std::ofstream cfg(outdir / "run_config.json");
        cfg << rc.to_json().dump(1) << "\n";
    }

    for (double ppm : rc.ppm) {
        const ResolvedPpm res = resolve_ppm(rc, ppm);
        PpmResult out;
        out.ppm = ppm;
        out.r_dipole = res.r_dipole;
        out.r_bath = res.r_bath;

        const std::filesystem::path curve_dir = outdir / "curves" / ("ppm_" + ppm_tag(ppm));
        if (to_disk) std::filesystem::create_directories(curve_dir);

        std::vector<CoherenceCurve> curves(static_cast<std::size_t>(rc.n_configs));
        std::vector<std::string> errors(static_cast<std::size_t>(rc.n_configs));

        const int engine_threads = rc.n_configs == 1 ? rc.threads : 1;
        auto simulate_one = [&](int i) {
            const auto config_seed =
                derive_seed(rc.seed, ppm_stream(kStreamBathGen, ppm),
                            static_cast<std::uint64_t>(i));
            const auto mc_seed = derive_seed(rc.seed, ppm_stream(kStreamMcGen, ppm),
                                             static_cast<std::uint64_t>(i));
            const std::filesystem::path curve_path =
                curve_dir / ("cfg_" + std::to_string(i) + ".csv");

            if (to_disk && std::filesystem::exists(curve_path) &&
                std::filesystem::exists(curve_sidecar_path(curve_path))) {
                try {
                    CoherenceCurve cached = load_curve(curve_path);
                    if (checkpoint_matches(cached, rc, res, config_seed, mc_seed)) {
                        curves[static_cast<std::size_t>(i)] = std::move(cached);
                        return;
                    }
                } catch (const std::exception&) {
                    // stale or corrupt checkpoint: recompute below
                }
            }

            SpinBathConfiguration config = generate_configuration(
                ppm, res.r_bath, LatticeSpec{}, config_seed,
                "ppm" + ppm_tag(ppm) + "-cfg" + std::to_string(i));
            const NeighborGraph graph = build_neighbor_graph(config, res.r_dipole);
            const ClusterSet set = enumerate_clusters(graph, rc.order);
            GcceOptions opts;
            opts.n_samples = rc.n_mc_samples;
            opts.seed = mc_seed;
            opts.threads = engine_threads;
            CoherenceCurve curve = gcce_coherence(config, set, central, field, res.grid, opts);
            if (to_disk) save_curve(curve, curve_path, &provenance);
            curves[static_cast<std::size_t>(i)] = std::move(curve);
        };

        auto worker = [&](int i) {
            try {
                simulate_one(i);
            } catch (const std::exception& first) {
                try {
                    simulate_one(i); // one retry
                } catch (const std::exception& second) {
                    errors[static_cast<std::size_t>(i)] =
                        std::string(first.what()) + " / retry: " + second.what();
                }
            }
        };
        parallel_for(rc.n_configs, rc.threads, worker);

        for (int i = 0; i < rc.n_configs; ++i) {
            if (!errors[static_cast<std::size_t>(i)].empty()) {
                ++out.failed_configs;
                out.failure_messages.push_back("cfg " + std::to_string(i) + ": " +
                                               errors[static_cast<std::size_t>(i)]);
            } else {
                out.curves.push_back(std::move(curves[static_cast<std::size_t>(i)]));
            }
        }
        if (out.failed_configs > 0 &&
            static_cast<double>(out.failed_configs) > 0.01 * rc.n_configs) {
            std::string msg = "run_simulation: " + std::to_string(out.failed_configs) + "/" +
                              std::to_string(rc.n_configs) + " configurations failed at " +
                              ppm_tag(ppm) + " ppm";
            for (const auto& f : out.failure_messages) msg += "\n  " + f;
            throw ComputeFailure(msg);
        }

        double total_spins = 0.0;
        for (const auto& c : out.curves) total_spins += c.meta.n_bath_spins;
        out.mean_bath_spins = out.curves.empty() ? 0.0 : total_spins / out.curves.size();

        out.average = ensemble_average(out.curves);
        if (to_disk)
            save_curve(out.average, outdir / ("average_ppm_" + ppm_tag(ppm) + ".csv"),
                       &provenance);

        for (FitMethod method : rc.methods)
            for (double lf : rc.lf) {
                FitEntry entry;
                entry.method = method;
                entry.lf = lf;
                try {
                    entry.fit = fit_curve(out.average, method, lf, rc.use_abs);
                    entry.ok = true;
                } catch (const std::exception& e) {
                    entry.error = e.what();
                }
                out.fits.push_back(std::move(entry));
            }

        result.per_ppm.push_back(std::move(out));
    }

    if (to_disk) write_summary(result, outdir);
    return result;
}

namespace {

nlohmann::ordered_json fit_entry_json(const FitEntry& e) {
    nlohmann::ordered_json j;
    j["method"] = to_string(e.method);
    j["lf"] = e.lf;
    if (e.ok) {
        j["t2_ms"] = e.fit.t2_ms;
        j["t2_us"] = e.fit.t2_ms * 1e3;
        j["p"] = e.fit.p;
        j["covariance"] = {{e.fit.covariance(0, 0), e.fit.covariance(0, 1)},
                           {e.fit.covariance(1, 0), e.fit.covariance(1, 1)}};
        j["points_used"] = e.fit.points_used;
        j["residual_norm"] = e.fit.residual_norm;
        j["converged"] = e.fit.converged;
        if (std::isfinite(e.fit.early_point_sensitivity))
            j["early_point_sensitivity"] = e.fit.early_point_sensitivity;
    } else {
        j["error"] = e.error;
    }
    return j;
}

} // namespace

nlohmann::ordered_json summary_json(const SimulationResult& result) {
    nlohmann::ordered_json j;
    j["schema"] = "spinecho.run-summary/1";
    j["version"] = kVersion;
    j["run_config"] = result.config.to_json();
    auto& blocks = j["results"] = nlohmann::ordered_json::array();
    for (const auto& p : result.per_ppm) {
        nlohmann::ordered_json b;
        b["ppm"] = p.ppm;
        b["r_dipole"] = p.r_dipole;
        b["r_bath"] = p.r_bath;
        b["n_members"] = static_cast<int>(p.curves.size());
        b["mean_bath_spins"] = p.mean_bath_spins;
        b["failed_configs"] = p.failed_configs;
        b["failures"] = p.failure_messages;
        std::int64_t guards = 0;
        for (const auto& c : p.curves) guards += c.meta.divergence_guard_count;
        b["divergence_guard_count"] = guards;
        b["max_imag_residual"] = p.average.meta.max_imag_residual;
        auto& fits = b["fits"] = nlohmann::ordered_json::array();
        for (const auto& e : p.fits) fits.push_back(fit_entry_json(e));
        blocks.push_back(std::move(b));
    }
    return j;
}

void write_summary(const SimulationResult& result, const std::filesystem::path& outdir) {
    std::filesystem::create_directories(outdir);
    std::ofstream out(outdir / "summary.json");
    if (!out)
        throw std::runtime_error("write_summary: cannot open " +
                                 (outdir / "summary.json").string());
    out << summary_json(result).dump(1) << "\n";
}

} // namespace spinecho
