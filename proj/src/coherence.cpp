#include "spinecho/coherence.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "echo_kernel.hpp"
#include "spinecho/parallel.hpp"
#include "spinecho/rng.hpp"

namespace spinecho {

namespace {

constexpr std::uint64_t kStreamBathState = 0x62617468u; // "bath"

const SpinMatrices<>& half_spin_ops() {
    static const SpinMatrices<> ops = spin_matrices(1);
    return ops;
}

// sum_ab K[a,b] sigma_a (x) sigma_b on two spin-1/2 sites, no allocations.
Eigen::Matrix4cd bath_pair_coupling(const Matrix3d& k) {
    const auto& h = half_spin_ops();
    const MatrixXcd* ops[3] = {&h.x, &h.y, &h.z};
    Eigen::Matrix4cd out = Eigen::Matrix4cd::Zero();
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            if (k(a, b) == 0.0) continue;
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    for (int p = 0; p < 2; ++p)
                        for (int q = 0; q < 2; ++q)
                            out(i * 2 + p, j * 2 + q) +=
                                k(a, b) * (*ops[a])(i, j) * (*ops[b])(p, q);
        }
    return out;
}

// Sample-independent tables for one bath configuration: secular couplings
// for the mean field plus the full central-bath pair operators.
class ClusterEngine {
  public:
    ClusterEngine(const SpinBathConfiguration& config, const CentralSpin& central,
                  const ExternalField& field)
        : config_(&config), central_(central) {
        const int n = config.size();
        hc0_ = central_spin_hamiltonian(central, field);
        kzz_.setZero(n, n);
        azz_.setZero(n);
        a_ops_.resize(static_cast<std::size_t>(n));
        zeeman_bath_.resize(static_cast<std::size_t>(n));
        const auto sc = spin_matrices(static_cast<int>(2 * central.spin));
        const auto& sh = half_spin_ops();
        for (int i = 0; i < n; ++i) {
            const auto& b = config.spins[static_cast<std::size_t>(i)];
            if (b.spin != 0.5)
                throw std::invalid_argument("gcce engine requires spin-1/2 bath spins");
            const Matrix3d a = dipolar_tensor(central.position, b.position, central.gamma,
                                              b.gamma);
            azz_[i] = a(2, 2);
            a_ops_[static_cast<std::size_t>(i)] = pair_coupling_operator(a, sc, sh);
            const Vector3d w = zeeman_term(b.gamma, field);
            zeeman_bath_[static_cast<std::size_t>(i)] =
                w[0] * sh.x + w[1] * sh.y + w[2] * sh.z;
            for (int j = 0; j < i; ++j) {
                const auto& bj = config.spins[static_cast<std::size_t>(j)];
                const Matrix3d k = dipolar_tensor(b.position, bj.position, b.gamma, bj.gamma);
                kzz_(i, j) = kzz_(j, i) = k(2, 2);
            }
        }
    }

    const Eigen::MatrixXd& kzz() const { return kzz_; }
    const Eigen::VectorXd& azz() const { return azz_; }
    const MatrixXcd& central_base() const { return hc0_; }

    /// Echo series of one cluster. `total_bath[i]` and `total_central` are
    /// the secular fields of the full sample; in-cluster contributions are
    /// subtracted here so only outside spins shift the levels.
    void cluster_series(std::span<const int> cluster, const Eigen::VectorXd& z,
                        const Eigen::VectorXd& total_bath, double total_central,
                        const Eigen::VectorXd& t_ms, bool uniform, MatrixXcd& scratch,
                        Complex* out) const {
        const int n = static_cast<int>(cluster.size());
        const int bd = 1 << n;
        const int d = 3 * bd;
        scratch.setZero(d, d);

        std::vector<int> dims(static_cast<std::size_t>(n) + 1, 2);
        dims[0] = 3;

        double central_shift = total_central;
        for (int k = 0; k < n; ++k) central_shift -= azz_[cluster[k]] * z[cluster[k]];

        add_site_operator(scratch, dims, 0, hc0_);
        for (int k = 0; k < n; ++k) {
            const int i = cluster[static_cast<std::size_t>(k)];
            add_site_operator(scratch, dims, k + 1, zeeman_bath_[static_cast<std::size_t>(i)]);
            add_pair_operator(scratch, dims, 0, k + 1, a_ops_[static_cast<std::size_t>(i)]);
            for (int l = k + 1; l < n; ++l) {
                const int j = cluster[static_cast<std::size_t>(l)];
                const Matrix3d kij = dipolar_tensor(
                    config_->spins[static_cast<std::size_t>(i)].position,
                    config_->spins[static_cast<std::size_t>(j)].position,
                    config_->spins[static_cast<std::size_t>(i)].gamma,
                    config_->spins[static_cast<std::size_t>(j)].gamma);
                add_pair_operator(scratch, dims, k + 1, l + 1, bath_pair_coupling(kij));
            }
        }

        // Mean-field z shifts are diagonal: central S_z plus per-spin I_z.
        std::array<double, kMaxClusterSpins> shifts{};
        for (int k = 0; k < n; ++k) {
            const int i = cluster[static_cast<std::size_t>(k)];
            double s = total_bath[i];
            for (int l = 0; l < n; ++l)
                if (l != k) s -= kzz_(i, cluster[static_cast<std::size_t>(l)]) *
                                 z[cluster[static_cast<std::size_t>(l)]];
            shifts[static_cast<std::size_t>(k)] = s;
        }
        for (int idx = 0; idx < d; ++idx) {
            const int c = idx / bd;
            const double mc = (c == 0) ? 1.0 : (c == 1 ? 0.0 : -1.0);
            double diag = central_shift * mc;
            for (int k = 0; k < n; ++k) {
                const int bit = (idx >> (n - 1 - k)) & 1;
                diag += shifts[static_cast<std::size_t>(k)] * (bit == 0 ? 0.5 : -0.5);
            }
            scratch(idx, idx) += diag;
        }

        int state = 0;
        for (int k = 0; k < n; ++k) {
            const int i = cluster[static_cast<std::size_t>(k)];
            if (z[i] < 0.0) state |= 1 << (n - 1 - k);
        }
        detail::echo_series(scratch, state, t_ms, uniform, out);
    }

  private:
    const SpinBathConfiguration* config_;
    CentralSpin central_;
    MatrixXcd hc0_;
    Eigen::MatrixXd kzz_;
    Eigen::VectorXd azz_;
    std::vector<MatrixXcd> a_ops_;       // central-bath, 6x6
    std::vector<MatrixXcd> zeeman_bath_; // 2x2
};

} // namespace

TimeGrid TimeGrid::linear(double t_max_ms, int n_points) {
    if (t_max_ms <= 0.0) throw std::invalid_argument("TimeGrid: t_max must be > 0");
    if (n_points < 2) throw std::invalid_argument("TimeGrid: need at least 2 points");
    TimeGrid g;
    g.t_ms.resize(n_points);
    for (int j = 0; j < n_points; ++j)
        g.t_ms[j] = t_max_ms * static_cast<double>(j) / (n_points - 1);
    return g;
}

TimeGrid TimeGrid::for_concentration(double ppm, int n_points) {
    const double t2_est = 0.0527 / (ppm > 0.0 ? ppm : 1.0); // ms
    return linear(4.0 * t2_est, n_points);
}

bool TimeGrid::uniform_from_zero() const {
    const int n = size();
    if (n < 2) return false;
    const double d0 = (t_ms[n - 1] - t_ms[0]) / (n - 1);
    if (d0 <= 0.0) return false;
    for (int j = 1; j < n; ++j) {
        const double dj = t_ms[j] - t_ms[j - 1];
        if (std::abs(dj - d0) > 1e-9 * d0) return false;
    }
    return true;
}

std::vector<BathStateSample> sample_bath_states(std::uint64_t seed, int n_samples,
                                                int n_spins) {
    if (n_samples < 0) throw std::invalid_argument("sample_bath_states: negative count");
    std::vector<BathStateSample> samples(static_cast<std::size_t>(n_samples));
    for (int s = 0; s < n_samples; ++s) {
        auto& out = samples[static_cast<std::size_t>(s)];
        out.seed = derive_seed(seed, kStreamBathState, static_cast<std::uint64_t>(s));
        Rng rng(out.seed);
        out.z.resize(n_spins);
        for (int i = 0; i < n_spins; ++i) out.z[i] = rng.half_spin_projection();
    }
    return samples;
}

Eigen::MatrixXcd hahn_echo_propagator(const Eigen::MatrixXcd& h, double tau_ms) {
    const auto d = h.rows();
    if (d % 3 != 0 || d == 0)
        throw std::invalid_argument("hahn_echo_propagator: dimension must be 3 * bath_dim");
    const double scale = h.cwiseAbs().maxCoeff();
    if (hermiticity_error(h) > 1e-9 * (1.0 + scale))
        throw std::invalid_argument("hahn_echo_propagator: Hamiltonian is not Hermitian");
    const auto bd = d / 3;

    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h);
    Eigen::VectorXcd phases(d);
    for (Eigen::Index k = 0; k < d; ++k)
        phases[k] = std::polar(1.0, -es.eigenvalues()[k] * tau_ms);
    const MatrixXcd evolve =
        es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();

    MatrixXcd pivoted(d, d);
    pivoted.topRows(bd) = evolve.middleRows(bd, bd);
    pivoted.middleRows(bd, bd) = evolve.topRows(bd);
    pivoted.bottomRows(bd) = evolve.bottomRows(bd);
    return evolve * pivoted;
}

Eigen::VectorXcd cluster_coherence(std::span<const int> cluster,
                                   const SpinBathConfiguration& config,
                                   const CentralSpin& central, const ExternalField& field,
                                   const BathStateSample& sample, const TimeGrid& grid) {
    if (sample.z.size() != config.size())
        throw std::invalid_argument("cluster_coherence: sample size mismatch");
    for (int i : cluster)
        if (i < 0 || i >= config.size())
            throw std::invalid_argument("cluster_coherence: cluster index out of range");
    ClusterEngine engine(config, central, field);
    const Eigen::VectorXd totals = engine.kzz() * sample.z;
    const double total_central = engine.azz().dot(sample.z);
    Eigen::VectorXcd out(grid.size());
    MatrixXcd scratch;
    engine.cluster_series(cluster, sample.z, totals, total_central, grid.t_ms,
                          grid.uniform_from_zero(), scratch, out.data());
    return out;
}

CoherenceCurve gcce_coherence(const SpinBathConfiguration& config, const ClusterSet& set,
                              const CentralSpin& central, const ExternalField& field,
                              const TimeGrid& grid, const GcceOptions& opts) {
    if (opts.n_samples < 1)
        throw std::invalid_argument("gcce_coherence: need at least one bath-state sample");
    if (grid.size() < 1) throw std::invalid_argument("gcce_coherence: empty time grid");

    const int nt = grid.size();
    const int ns = opts.n_samples;
    const bool uniform = grid.uniform_from_zero();
    const ClusterEngine engine(config, central, field);
    const auto samples = sample_bath_states(opts.seed, ns, config.size());

    // The divergence guards only make sense where the expansion is
    // truncated. Components no larger than the order telescope exactly and
    // must stay untouched (pair clusters reproduce the proximity edges, so
    // union-find over them recovers the components).
    std::vector<int> parent(static_cast<std::size_t>(config.size()));
    for (int i = 0; i < config.size(); ++i) parent[static_cast<std::size_t>(i)] = i;
    std::function<int(int)> find = [&](int v) {
        while (parent[static_cast<std::size_t>(v)] != v) {
            parent[static_cast<std::size_t>(v)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
            v = parent[static_cast<std::size_t>(v)];
        }
        return v;
    };
    for (const auto& c : set.clusters)
        if (c.size() == 2) parent[static_cast<std::size_t>(find(c[0]))] = find(c[1]);
    std::vector<int> component_size(static_cast<std::size_t>(config.size()), 0);
    for (int i = 0; i < config.size(); ++i) ++component_size[static_cast<std::size_t>(find(i))];
    std::vector<char> guarded_cluster(set.size(), 0);
    for (std::size_t ci = 0; ci < set.size(); ++ci)
        guarded_cluster[ci] =
            component_size[static_cast<std::size_t>(find(set.clusters[ci][0]))] > set.order;

    MatrixXcd acc(nt, ns);
    std::vector<std::int64_t> guard_counts(static_cast<std::size_t>(ns), 0);

    auto worker = [&](int s) {
        const auto& z = samples[static_cast<std::size_t>(s)].z;
        const Eigen::VectorXd total_bath = engine.kzz() * z;
        const double total_central = engine.azz().dot(z);
        std::int64_t guards = 0;

        // Order-0 factor: bare central spin in the sampled secular field.
        Eigen::VectorXcd l0(nt);
        {
            MatrixXcd h3 = engine.central_base();
            const double mc[3] = {1.0, 0.0, -1.0};
            for (int c = 0; c < 3; ++c) h3(c, c) += total_central * mc[c];
            detail::echo_series(h3, 0, grid.t_ms, uniform, l0.data());
        }

        Eigen::VectorXcd curve = l0;
        std::vector<Eigen::VectorXcd> factors(set.size());
        Eigen::VectorXcd raw(nt);
        MatrixXcd scratch;

        for (std::size_t ci = 0; ci < set.size(); ++ci) {
            engine.cluster_series(set.clusters[ci], z, total_bath, total_central, grid.t_ms,
                                  uniform, scratch, raw.data());
            const bool guard = guarded_cluster[ci];
            Eigen::VectorXcd factor(nt);
            for (int j = 0; j < nt; ++j) {
                Complex denom = l0[j];
                bool degenerate = guard && std::abs(denom) < opts.divergence_floor;
                if (!degenerate) {
                    for (int sub : set.subclusters[ci]) {
                        const Complex f = factors[static_cast<std::size_t>(sub)][j];
                        if (guard && std::abs(f) < opts.divergence_floor) {
                            degenerate = true;
                            break;
                        }
                        denom *= f;
                    }
                }
                Complex value(1.0, 0.0);
                if (!degenerate) {
                    value = raw[j] / denom;
                    const bool bad = !std::isfinite(value.real()) ||
                                     !std::isfinite(value.imag()) ||
                                     (guard && std::abs(value) > opts.divergence_factor_cap);
                    if (bad) {
                        value = Complex(1.0, 0.0);
                        degenerate = true;
                    }
                }
                if (degenerate) ++guards;
                factor[j] = value;
            }
            factors[ci] = std::move(factor);
            curve.array() *= factors[ci].array();
        }
        acc.col(s) = curve;
        guard_counts[static_cast<std::size_t>(s)] = guards;
    };
    parallel_for(ns, opts.threads, worker);

    CoherenceCurve curve;
    curve.t_ms = grid.t_ms;
    curve.values.setZero(nt);
    for (int s = 0; s < ns; ++s) curve.values += acc.col(s);
    curve.values /= static_cast<double>(ns);

    auto& meta = curve.meta;
    meta.source = "gcce";
    meta.order = set.order;
    meta.r_bath = config.r_bath;
    meta.r_dipole = set.r_dipole;
    meta.n_mc_samples = ns;
    meta.seed = opts.seed;
    meta.config_id = config.id;
    meta.config_seed = config.seed;
    meta.n_bath_spins = config.size();
    meta.b_field = field.gauss;
    for (auto g : guard_counts) meta.divergence_guard_count += g;
    meta.max_imag_residual = curve.values.imag().cwiseAbs().maxCoeff();
    return curve;
}

CoherenceCurve exact_coherence(const SpinBathConfiguration& config, const CentralSpin& central,
                               const ExternalField& field, const TimeGrid& grid,
                               const ExactOptions& opts) {
    const int n = config.size();
    if (n > opts.max_spins)
        throw std::length_error("exact_coherence: bath of " + std::to_string(n) +
                                " spins (dimension 3*2^" + std::to_string(n) +
                                ") exceeds the cap of " + std::to_string(opts.max_spins));
    if (opts.n_samples == 0 && n > 20)
        throw std::length_error("exact_coherence: full mixture over 2^" + std::to_string(n) +
                                " bath states is not feasible");

    const MatrixXcd h = cluster_hamiltonian(config.spins, central, field,
                                            MeanFieldShifts::none(), opts.max_spins);
    const detail::SpectralEcho<Eigen::Dynamic> solver(h);
    const bool uniform = grid.uniform_from_zero();
    const int nt = grid.size();

    CoherenceCurve curve;
    curve.t_ms = grid.t_ms;
    curve.values.setZero(nt);
    Eigen::VectorXcd one(nt);

    if (opts.n_samples >= 1) {
        const auto samples = sample_bath_states(opts.seed, opts.n_samples, n);
        for (const auto& sample : samples) {
            int state = 0;
            for (int i = 0; i < n; ++i)
                if (sample.z[i] < 0.0) state |= 1 << (n - 1 - i);
            solver.series(state, grid.t_ms, uniform, one.data());
            curve.values += one;
        }
        curve.values /= static_cast<double>(opts.n_samples);
    } else {
        const int n_states = 1 << n;
        for (int state = 0; state < n_states; ++state) {
            solver.series(state, grid.t_ms, uniform, one.data());
            curve.values += one;
        }
        curve.values /= static_cast<double>(n_states);
    }

    auto& meta = curve.meta;
    meta.source = "exact";
    meta.order = 0;
    meta.r_bath = config.r_bath;
    meta.r_dipole = 0.0;
    meta.n_mc_samples = opts.n_samples;
    meta.seed = opts.seed;
    meta.config_id = config.id;
    meta.config_seed = config.seed;
    meta.n_bath_spins = config.size();
    meta.b_field = field.gauss;
    meta.max_imag_residual = curve.values.imag().cwiseAbs().maxCoeff();
    return curve;
}

} // namespace spinecho
