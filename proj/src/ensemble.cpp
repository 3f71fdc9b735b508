#include "spinecho/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "spinecho/rng.hpp"

namespace spinecho {

namespace {
constexpr std::uint64_t kStreamBootstrap = 0x626f6f74u; // "boot"
}

CoherenceCurve ensemble_average(const std::vector<CoherenceCurve>& curves) {
    if (curves.empty()) throw std::invalid_argument("ensemble_average: no curves");
    const auto& first = curves.front();
    for (const auto& c : curves)
        if (c.t_ms.size() != first.t_ms.size() || (c.t_ms - first.t_ms).cwiseAbs().maxCoeff() != 0.0)
            throw std::invalid_argument("ensemble_average: mismatched time grids");

    CoherenceCurve avg;
    avg.t_ms = first.t_ms;
    avg.values.setZero(first.values.size());
    for (const auto& c : curves) avg.values += c.values;
    avg.values /= static_cast<double>(curves.size());

    avg.meta = first.meta;
    avg.meta.source = "ensemble-average";
    avg.meta.config_id = "";
    avg.meta.config_seed = 0;
    avg.meta.member_count = static_cast<int>(curves.size());
    avg.meta.member_config_seeds.clear();
    avg.meta.divergence_guard_count = 0;
    for (const auto& c : curves) {
        avg.meta.member_config_seeds.push_back(c.meta.config_seed);
        avg.meta.divergence_guard_count += c.meta.divergence_guard_count;
    }
    avg.meta.max_imag_residual = avg.values.imag().cwiseAbs().maxCoeff();
    return avg;
}

double Histogram::integral() const {
    double sum = 0.0;
    for (double d : density) sum += d * bin_width;
    return sum;
}

Histogram make_pdf(const std::vector<double>& samples) {
    if (samples.empty()) throw std::invalid_argument("make_pdf: no samples");
    std::vector<double> s = samples;
    std::sort(s.begin(), s.end());
    const int n = static_cast<int>(s.size());
    const double lo = s.front(), hi = s.back();
    const double q1 = percentile(s, 25.0), q3 = percentile(s, 75.0);
    double width = 2.0 * (q3 - q1) / std::cbrt(static_cast<double>(n));
    if (width <= 0.0) width = (hi - lo) > 0.0 ? (hi - lo) / 10.0 : 1e-12;
    int bins = static_cast<int>(std::ceil((hi - lo) / width));
    bins = std::clamp(bins, 1, 10000);
    width = (hi - lo) > 0.0 ? (hi - lo) / bins : width;

    Histogram h;
    h.bin_width = width;
    h.centers.resize(static_cast<std::size_t>(bins));
    h.density.assign(static_cast<std::size_t>(bins), 0.0);
    for (int b = 0; b < bins; ++b) h.centers[static_cast<std::size_t>(b)] = lo + (b + 0.5) * width;
    for (double v : s) {
        int b = static_cast<int>((v - lo) / width);
        b = std::clamp(b, 0, bins - 1);
        h.density[static_cast<std::size_t>(b)] += 1.0;
    }
    for (auto& d : h.density) d /= n * width;
    return h;
}

double percentile(std::vector<double> samples, double q) {
    if (samples.empty()) throw std::invalid_argument("percentile: no samples");
    std::sort(samples.begin(), samples.end());
    const double pos = q / 100.0 * (static_cast<double>(samples.size()) - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return samples[lo] * (1.0 - frac) + samples[hi] * frac;
}

double half_width(std::vector<double> samples) {
    return 0.5 * (percentile(samples, 84.135) - percentile(samples, 15.865));
}

BootstrapResult bootstrap_subsample(const std::vector<CoherenceCurve>& curves, int n_pick,
                                    const BootstrapOptions& opts) {
    const int m = static_cast<int>(curves.size());
    if (n_pick < 1 || n_pick > m)
        throw std::invalid_argument("bootstrap_subsample: subensemble size out of range");
    if (opts.repeats < 1) throw std::invalid_argument("bootstrap_subsample: repeats must be >= 1");

    BootstrapResult res;
    res.subensemble_size = n_pick;
    res.repeats = opts.repeats;

    const CoherenceCurve full = ensemble_average(curves);
    const FitResult ref = fit_curve(full, opts.method, opts.lf, opts.use_abs);
    res.reference_t2 = ref.t2_ms;
    res.reference_p = ref.p;

    std::vector<int> indices(static_cast<std::size_t>(m));
    std::iota(indices.begin(), indices.end(), 0);

    CoherenceCurve sub;
    sub.t_ms = full.t_ms;
    for (int rep = 0; rep < opts.repeats; ++rep) {
        Rng rng(derive_seed(opts.seed, kStreamBootstrap, static_cast<std::uint64_t>(rep)));
        // Partial Fisher-Yates: first n_pick entries become the subensemble.
        for (int i = 0; i < n_pick; ++i) {
            const auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(m - i)));
            std::swap(indices[static_cast<std::size_t>(i)], indices[static_cast<std::size_t>(j)]);
        }
        // Summation in index order keeps the average independent of the
        // shuffle; the full-set subsample then reproduces the reference
        // fit exactly.
        std::sort(indices.begin(), indices.begin() + n_pick);
        sub.values.setZero(full.values.size());
        for (int i = 0; i < n_pick; ++i)
            sub.values += curves[static_cast<std::size_t>(indices[static_cast<std::size_t>(i)])].values;
        sub.values /= static_cast<double>(n_pick);
        try {
            const FitResult fit = fit_curve(sub, opts.method, opts.lf, opts.use_abs);
            res.delta_t2.push_back((fit.t2_ms - ref.t2_ms) / ref.t2_ms);
            res.delta_p.push_back((fit.p - ref.p) / ref.p);
        } catch (const std::exception&) {
            ++res.failures;
        }
    }
    if (!res.delta_t2.empty()) {
        res.pdf_t2 = make_pdf(res.delta_t2);
        res.pdf_p = make_pdf(res.delta_p);
    }
    return res;
}

} // namespace spinecho
