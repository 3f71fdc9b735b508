#pragma once

#include <cstdint>
#include <vector>

#include "spinecho/coherence.hpp"
#include "spinecho/fit.hpp"

namespace spinecho {

/// Pointwise arithmetic mean of curves sharing one time grid.
CoherenceCurve ensemble_average(const std::vector<CoherenceCurve>& curves);

/// Normalized histogram (sum of density * bin_width = 1), Freedman-Diaconis
/// binning.
struct Histogram {
    std::vector<double> centers;
    std::vector<double> density;
    double bin_width = 0.0;

    double integral() const;
};

Histogram make_pdf(const std::vector<double>& samples);

/// Half of the central 68.27% interval of the samples.
double half_width(std::vector<double> samples);
double percentile(std::vector<double> samples, double q); // q in [0,100]

struct BootstrapOptions {
    int repeats = 200;
    FitMethod method = FitMethod::Exponential;
    double lf = 0.4;
    std::uint64_t seed = 0;
    bool use_abs = false;
};

/// Finite-ensemble uncertainty by subsampling: draw N distinct members,
/// average, fit, and record the relative deviations from the full-ensemble
/// fit. Fit failures are counted, never silently dropped.
struct BootstrapResult {
    int subensemble_size = 0;
    int repeats = 0;
    int failures = 0;
    double reference_t2 = 0.0;
    double reference_p = 0.0;
    std::vector<double> delta_t2; // (T2^(N) - T2^(max)) / T2^(max)
    std::vector<double> delta_p;
    Histogram pdf_t2;
    Histogram pdf_p;
};

BootstrapResult bootstrap_subsample(const std::vector<CoherenceCurve>& curves, int n_pick,
                                    const BootstrapOptions& opts);

/// Full finite-ensemble report: members, their mean, and the bootstrap PDFs
/// for each requested subensemble size.
struct EnsembleReport {
    std::vector<CoherenceCurve> members;
    CoherenceCurve average;
    std::vector<BootstrapResult> bootstrap;
};

} // namespace spinecho
