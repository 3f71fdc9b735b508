#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "spinecho/model.hpp"
#include "spinecho/spin_ops.hpp"

namespace spinecho {

/// Static z-field offsets produced by spins outside a cluster, sampled at
/// fixed z projections. `central` multiplies S_z, `bath[i]` multiplies the
/// I_z of cluster spin i. rad/ms.
struct MeanFieldShifts {
    double central = 0.0;
    Eigen::VectorXd bath; // empty => all zero

    static MeanFieldShifts none() { return {}; }
};

/// Largest cluster the dense builder accepts (dimension 3 * 2^8).
inline constexpr int kMaxClusterSpins = 8;

/// Full Hamiltonian of the central spin plus a cluster of bath spins:
///   S*D*S + B.gamma_S*S + sum_i S*A_i*I_i + sum_{i>j} I_i*K_ij*I_j
///   + sum_i B.gamma_i*I_i + central_shift*S_z + sum_i shift_i*I_iz
/// Couplings A_i, K_ij are point-dipole tensors from the stored positions.
/// Basis: central spin slowest index (m = +1, 0, -1), bath spins following in
/// cluster order, each ordered m = +1/2, -1/2. rad/ms. Empty cluster gives
/// the bare central-spin Hamiltonian.
MatrixXcd cluster_hamiltonian(std::span<const BathSpin> cluster, const CentralSpin& central,
                              const ExternalField& field,
                              const MeanFieldShifts& shifts = MeanFieldShifts::none(),
                              int max_spins = kMaxClusterSpins);

/// 3x3 central-spin part S*D*S + B.gamma*S (no mean field), rad/ms.
MatrixXcd central_spin_hamiltonian(const CentralSpin& central, const ExternalField& field);

/// Two-site coupling sum_{ab} M[a,b] * (left_a (x) right_b) on the product
/// space of the two spins, left slowest.
MatrixXcd pair_coupling_operator(const Eigen::Matrix3d& m, const SpinMatrices<>& left,
                                 const SpinMatrices<>& right);

} // namespace spinecho
