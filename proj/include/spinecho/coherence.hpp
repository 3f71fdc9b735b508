#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spinecho/bath.hpp"
#include "spinecho/clusters.hpp"
#include "spinecho/hamiltonian.hpp"
#include "spinecho/model.hpp"

namespace spinecho {

/// Hahn echo: free evolution tau, pi pulse on the (m_s = 0, +1) pair, free
/// evolution tau; the curve abscissa is the total time t = 2*tau.
struct PulseSequence {
    double tau_ms = 0.0;
    double total_time() const { return 2.0 * tau_ms; }
};

struct TimeGrid {
    Eigen::VectorXd t_ms; // total times t = 2*tau, strictly increasing

    static TimeGrid linear(double t_max_ms, int n_points = 101);
    /// 0 .. 4 * T2_est with T2_est = 0.0527 ms / ppm (the 1 ppm grid is used
    /// for ppm <= 0, where nothing decays anyway).
    static TimeGrid for_concentration(double ppm, int n_points = 101);

    int size() const { return static_cast<int>(t_ms.size()); }
    bool uniform_from_zero() const;
};

/// One Monte Carlo draw of the bath state: z projection (+-1/2) per bath
/// spin of the configuration.
struct BathStateSample {
    Eigen::VectorXd z;
    std::uint64_t seed = 0;
};

/// Deterministic sample streams: sample k depends only on (seed, k, n_spins).
std::vector<BathStateSample> sample_bath_states(std::uint64_t seed, int n_samples,
                                                int n_spins);

struct CurveMetadata {
    std::string source;       // "gcce" | "exact"
    int order = 0;            // cluster order (0 for exact)
    double r_bath = 0.0;      // Angstrom
    double r_dipole = 0.0;    // Angstrom (0 for exact)
    int n_mc_samples = 0;     // 0 means exact uniform bath mixture
    std::uint64_t seed = 0;   // bath-state sampling seed
    std::string config_id;
    std::uint64_t config_seed = 0;
    int n_bath_spins = 0;
    Eigen::Vector3d b_field = Eigen::Vector3d::Zero(); // G
    std::int64_t divergence_guard_count = 0;
    double max_imag_residual = 0.0;
    // Ensemble averages only: how many members and which bath seeds.
    int member_count = 1;
    std::vector<std::uint64_t> member_config_seeds;
};

/// Normalized Hahn-echo coherence L(t) on a time grid. Values are complex;
/// the physical signal is the real part, the imaginary residual is tracked
/// in the metadata.
struct CoherenceCurve {
    Eigen::VectorXd t_ms;
    Eigen::VectorXcd values;
    CurveMetadata meta;

    int size() const { return static_cast<int>(t_ms.size()); }
};

/// U(2*tau) = exp(-i*H*tau) * Pi * exp(-i*H*tau). Pi exchanges the m_s = 0
/// and +1 central-spin levels and leaves m_s = -1 and the bath alone.
/// H must be Hermitian with rows divisible by 3 (central triplet slowest).
Eigen::MatrixXcd hahn_echo_propagator(const Eigen::MatrixXcd& h, double tau_ms);

/// Raw echo coherence of one cluster for one sampled bath state. Spins
/// outside the cluster enter through their secular (zz) dipolar fields at
/// the sampled projections, static over the echo. The returned values are
/// normalized to 1 at t = 0.
Eigen::VectorXcd cluster_coherence(std::span<const int> cluster,
                                   const SpinBathConfiguration& config,
                                   const CentralSpin& central, const ExternalField& field,
                                   const BathStateSample& sample, const TimeGrid& grid);

struct GcceOptions {
    int n_samples = 128; // Monte Carlo bath states
    std::uint64_t seed = 0;
    // Divergence guards for the truncated expansion. A cluster factor is
    // replaced by 1 (and counted) when a subcluster factor falls below the
    // floor, or when its own magnitude exceeds the cap. Irreducible factors
    // of healthy clusters stay within [0, 1 + eps]; magnitudes beyond the
    // cap only arise from near-zero denominators (a bath spin whose
    // coherence factor crosses zero), where the truncated ratio carries no
    // information.
    double divergence_floor = 1e-10;
    double divergence_factor_cap = 2.0;
    int threads = 1;
};

/// Cluster-factorized Hahn-echo coherence: per sample the coherence is the
/// product of irreducible cluster contributions (each cluster divided by its
/// proper subcluster factors and the bare central-spin factor); the curve is
/// the sample average.
CoherenceCurve gcce_coherence(const SpinBathConfiguration& config, const ClusterSet& set,
                              const CentralSpin& central, const ExternalField& field,
                              const TimeGrid& grid, const GcceOptions& opts);

struct ExactOptions {
    int n_samples = 0; // 0 => exact uniform mixture over all bath states
    std::uint64_t seed = 0;
    int max_spins = 10;
};

/// Brute-force reference: evolves the full central (x) bath space with the
/// complete Hamiltonian (no clusters, no mean field). Refuses baths larger
/// than max_spins.
CoherenceCurve exact_coherence(const SpinBathConfiguration& config, const CentralSpin& central,
                               const ExternalField& field, const TimeGrid& grid,
                               const ExactOptions& opts);

} // namespace spinecho
