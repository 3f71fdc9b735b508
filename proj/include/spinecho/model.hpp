#pragma once

#include <Eigen/Dense>
#include <numbers>

namespace spinecho {

using Eigen::Matrix3d;
using Eigen::Vector3d;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Unit system: distances in Angstrom, times in ms, magnetic fields in Gauss.
// Every Hamiltonian is stored divided by hbar, i.e. in angular-frequency
// units of rad/ms. Gyromagnetic ratios are rad ms^-1 G^-1.
inline constexpr double kGammaElectron = -17608.597; // rad ms^-1 G^-1

// mu0*hbar/(4*pi) expressed in (rad/ms) * Angstrom^3 per (rad ms^-1 G^-1)^2.
// In this unit system the value coincides numerically with hbar in units of
// 1e-34 J s (CODATA 2018).
inline constexpr double kDipoleConversion = 1.054571817;

struct PhysicalConstants {
    double gamma_e = kGammaElectron;
    double dipole_conversion = kDipoleConversion;
    // All Hamiltonians are H/hbar; nothing downstream multiplies by hbar.
    static constexpr bool angular_frequency_units = true;

    /// Combined point-dipole prefactor -gamma_i*gamma_j*mu0*hbar/(4*pi),
    /// rad/ms for a 1 Angstrom separation.
    double dipole_prefactor(double gamma_i, double gamma_j) const {
        return -gamma_i * gamma_j * dipole_conversion;
    }
};

/// NV ground-state axial zero-field splitting, rad/ms (2.87 GHz).
inline constexpr double kNvZfsSplitting = kTwoPi * 2.87e6;

struct ExternalField {
    Vector3d gauss{0.0, 0.0, 0.0};
};

struct CentralSpin {
    double spin = 1.0;                     // S
    Vector3d position{0.0, 0.0, 0.0};      // Angstrom, NV frame origin
    Matrix3d zfs = Matrix3d::Zero();       // rad/ms, symmetric
    double gamma = kGammaElectron;         // rad ms^-1 G^-1
    // Measured coherence element: m_s labels of the qubit pair.
    int qubit_upper = +1;
    int qubit_lower = 0;

    int dim() const { return static_cast<int>(2 * spin) + 1; }

    /// S = 1 with traceless axial ZFS along z (the [111] trigonal axis is
    /// mapped to z by the NV frame convention).
    static CentralSpin nv(double zfs_splitting = kNvZfsSplitting) {
        CentralSpin c;
        c.zfs = zfs_splitting * (Vector3d(-1.0, -1.0, 2.0) / 3.0).asDiagonal();
        return c;
    }
};

struct BathSpin {
    Vector3d position{0.0, 0.0, 0.0}; // Angstrom, NV frame
    double spin = 0.5;                // I
    double gamma = kGammaElectron;    // rad ms^-1 G^-1

    int dim() const { return static_cast<int>(2 * spin) + 1; }
};

struct InteractionTensor {
    enum class Role { CentralBath, BathBath };
    Matrix3d mat = Matrix3d::Zero(); // rad/ms, symmetric traceless
    Role role = Role::BathBath;
};

/// Point magnetic dipole-dipole coupling tensor between spins at r_i and r_j:
/// -gamma_i*gamma_j*(mu0*hbar/4pi) * [3 r^ (x) r^ - 1] / |r|^3, rad/ms.
/// Throws std::domain_error on coincident positions.
Matrix3d dipolar_tensor(const Vector3d& r_i, const Vector3d& r_j, double gamma_i,
                        double gamma_j);

InteractionTensor central_bath_coupling(const CentralSpin& c, const BathSpin& b);
InteractionTensor bath_bath_coupling(const BathSpin& a, const BathSpin& b);

/// gamma * B, rad/ms; the coefficient vector of the spin operator in the
/// Zeeman term.
Vector3d zeeman_term(double gamma, const ExternalField& field);

/// Orthogonal matrix taking cubic lattice coordinates to the NV frame:
/// [111]/sqrt(3) -> z, [1-10]/sqrt(2) -> x, [11-2]/sqrt(6) -> y.
Matrix3d nv_frame_rotation();

Vector3d rotate_to_nv_frame(const Vector3d& cubic);

} // namespace spinecho
