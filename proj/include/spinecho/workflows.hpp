#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "spinecho/ensemble.hpp"

namespace spinecho {

/// Raised when the per-run failure threshold is crossed (CLI exit code 3).
struct ComputeFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Converged cutoff defaults (r_dipole, r_bath) in Angstrom per cluster
/// order and concentration; log-log interpolated between the tabulated
/// concentrations 0.1, 1, 10, 100 ppm and extrapolated with the edge slopes
/// outside. Order 1 uses the order-2 table, order 4 the order-3 table.
std::pair<double, double> default_cutoffs(int order, double ppm);

struct RunConfig {
    std::vector<double> ppm{1.0};
    int order = 2;
    double r_dipole = 0.0; // <= 0: default_cutoffs
    double r_bath = 0.0;   // <= 0: default_cutoffs
    Eigen::Vector3d b_field{0.0, 0.0, 100.0};
    int n_configs = 100;
    int n_mc_samples = 128;
    double t_max_ms = 0.0; // <= 0: TimeGrid::for_concentration
    int n_time_points = 101;
    std::vector<FitMethod> methods{FitMethod::Exponential};
    std::vector<double> lf{0.4};
    std::uint64_t seed = 1;
    int threads = 1;
    bool use_abs = false; // fit |L| instead of Re L
    double zfs_splitting = kNvZfsSplitting;
    double order4_ppm_cap = 1.0; // compare_orders refuses order 4 above this
    std::string outdir;          // empty: nothing written to disk

    void validate() const;
    nlohmann::ordered_json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig from_json_file(const std::filesystem::path& path);
};

struct FitEntry {
    FitMethod method = FitMethod::Exponential;
    double lf = 0.4;
    bool ok = false;
    std::string error;
    FitResult fit;
};

struct PpmResult {
    double ppm = 0.0;
    double r_dipole = 0.0, r_bath = 0.0;
    double mean_bath_spins = 0.0;
    std::vector<CoherenceCurve> curves; // successful members
    CoherenceCurve average;
    std::vector<FitEntry> fits; // methods x lf
    int failed_configs = 0;
    std::vector<std::string> failure_messages;
};

struct SimulationResult {
    RunConfig config;
    std::vector<PpmResult> per_ppm;
};

/// End-to-end run: generate baths, compute gCCE curves (with per-
/// configuration checkpoint files when outdir is set, making runs
/// resumable), average and fit. A failed configuration is retried once and
/// then recorded; the run aborts (ComputeFailure) when more than 1% of the
/// configurations fail.
SimulationResult run_simulation(const RunConfig& rc);

void write_summary(const SimulationResult& result, const std::filesystem::path& outdir);
nlohmann::ordered_json summary_json(const SimulationResult& result);

// --- convergence scan ---

struct ScanPoint {
    double value = 0.0; // grid value (Angstrom or order)
    double t2_ms = 0.0;
    double p = 0.0;
    bool fit_ok = false;
};

struct ConvergenceScan {
    struct PerPpm {
        double ppm = 0.0;
        std::vector<ScanPoint> r_dipole_scan;
        std::vector<ScanPoint> r_bath_scan;
        std::vector<ScanPoint> order_scan;
        double converged_r_dipole = 0.0; // 0: not bracketed by the grid
        double converged_r_bath = 0.0;
        int converged_order = 0;
    };
    RunConfig base;
    std::vector<PerPpm> per_ppm;
};

/// Successive-change criterion: the smallest grid value beyond which both
/// T2 and p change by less than 5% between consecutive grid points (fits at
/// L_f = 0.4, exponential).
ConvergenceScan scan_convergence(const RunConfig& base, const std::vector<double>& r_dipole_grid,
                                 const std::vector<double>& r_bath_grid,
                                 const std::vector<int>& orders = {});
void write_scan(const ConvergenceScan& scan, const std::filesystem::path& path);

// --- concentration sweep ---

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    int n = 0;
};

/// Least-squares line through (log10 x, log10 y). Throws on duplicate
/// abscissae (degenerate regression).
SlopeFit loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct SweepResult {
    struct Entry {
        FitMethod method;
        double lf;
        std::vector<double> ppm, t2_ms, p;
        SlopeFit slope;
    };
    SimulationResult sim;
    std::vector<Entry> entries;
    std::vector<std::string> warnings;
};

/// T2 vs concentration power law; requires at least three distinct
/// concentrations. Failed members are skipped with a warning.
SweepResult sweep_concentration(const RunConfig& rc);
void write_sweep(const SweepResult& sweep, const std::filesystem::path& path);

// --- order comparison ---

struct OrderComparison {
    struct PerPpm {
        double ppm = 0.0;
        std::vector<int> orders;
        std::vector<double> t2_ms;
        std::vector<double> ratio;     // T2(order) / T2(reference)
        std::vector<double> ratio_err; // bootstrap std over shared baths
    };
    int reference = 0;
    double r_dipole = 0.0, r_bath = 0.0; // shared cutoffs (max over orders)
    std::vector<PerPpm> per_ppm;
};

/// Orders share the bath configurations (same seeds and the widest cutoffs
/// of the set). Refuses order 4 above rc.order4_ppm_cap.
OrderComparison compare_orders(const RunConfig& rc, const std::vector<int>& orders,
                               int reference, int bootstrap_repeats = 100);
void write_order_comparison(const OrderComparison& cmp, const std::filesystem::path& path);

// --- field scan ---

struct FieldScan {
    double ppm = 0.0;
    std::vector<double> field_gauss;
    std::vector<double> t2_ms, p;
    std::vector<bool> degenerate_zeeman; // flags B = 0 entries
    double t2_spread = 0.0;              // (max - min) / mean over the scan
};

/// T2 versus field magnitude (z axis) at fixed bath seeds.
FieldScan field_sensitivity(const RunConfig& rc, const std::vector<double>& fields_gauss);
void write_field_scan(const FieldScan& scan, const std::filesystem::path& path);

// --- bootstrap report ---

EnsembleReport bootstrap_report(const std::vector<CoherenceCurve>& curves,
                                const std::vector<int>& sizes, const BootstrapOptions& opts);
/// Histogram CSVs (bin_center, density) per (N, quantity) plus a JSON
/// summary with a percentile table.
void write_bootstrap_report(const EnsembleReport& report,
                            const std::filesystem::path& outdir);

// --- oracle check ---

struct OracleCheck {
    int n_baths = 0;
    double max_deviation = 0.0;
    double tolerance = 1e-8;
    bool pass = false;
};

/// Random small baths (2..max_spins spins), gCCE at order = bath size with
/// everything inside one cluster versus exact diagonalization on the same
/// bath-state samples.
OracleCheck oracle_check(int n_baths, int max_spins, std::uint64_t seed,
                         double tolerance = 1e-8, int n_samples = 8, int n_time_points = 21);

} // namespace spinecho
