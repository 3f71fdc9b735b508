#pragma once

// Internal spectral Hahn-echo kernel. Not installed.

#include <Eigen/Dense>
#include <cmath>
#include <complex>

#include "spinecho/spin_ops.hpp"

namespace spinecho::detail {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;

/// Evaluates the echo coherence series for one Hermitian Hamiltonian on the
/// central (x) bath product space (central triplet slowest index). The
/// Hamiltonian is diagonalized once; each bath basis state then costs
/// O(T * d^2). On uniform tau grids the phase factors advance by a constant
/// per-step multiplication instead of trig calls.
template <int D>
class SpectralEcho {
  public:
    using Mat = Eigen::Matrix<Complex, D, D>;
    using CVec = Eigen::Matrix<Complex, D, 1>;
    using RVec = Eigen::Matrix<double, D, 1>;

    explicit SpectralEcho(const Eigen::Ref<const MatrixXcd>& h) {
        dim_ = static_cast<int>(h.rows());
        bath_dim_ = dim_ / 3;
        Mat hm(dim_, dim_);
        hm = h;
        Eigen::SelfAdjointEigenSolver<Mat> es(hm);
        evals_ = es.eigenvalues();
        v_ = es.eigenvectors();
        Mat pv(dim_, dim_);
        pv.topRows(bath_dim_) = v_.middleRows(bath_dim_, bath_dim_);
        pv.middleRows(bath_dim_, bath_dim_) = v_.topRows(bath_dim_);
        if (dim_ > 2 * bath_dim_)
            pv.bottomRows(dim_ - 2 * bath_dim_) = v_.bottomRows(dim_ - 2 * bath_dim_);
        w_ = v_.adjoint() * pv;
    }

    /// L(t_j) for the initial state (|m=+1, b> + |m=0, b>)/sqrt(2), b the
    /// bath basis index. Normalized so that tau = 0 gives exactly the t = 0
    /// coherence of 1 in exact arithmetic.
    void series(int bath_state, const Eigen::VectorXd& t_ms, bool uniform_spacing,
                Complex* out) const {
        const int nt = static_cast<int>(t_ms.size());
        if (nt == 0) return;
        const int d = dim_;
        const int bd = bath_dim_;

        CVec vt(d), phase(d), step(d), y(d), inner(d);
        for (int k = 0; k < d; ++k)
            vt[k] = (std::conj(v_(bath_state, k)) +
                     std::conj(v_(bd + bath_state, k))) *
                    kInvSqrt2;

        const double tau0 = 0.5 * t_ms[0];
        for (int k = 0; k < d; ++k) phase[k] = std::polar(1.0, -evals_[k] * tau0);
        if (uniform_spacing && nt > 1) {
            const double dtau = 0.5 * (t_ms[nt - 1] - t_ms[0]) / (nt - 1);
            for (int k = 0; k < d; ++k) step[k] = std::polar(1.0, -evals_[k] * dtau);
        }

        Eigen::Matrix<Complex, AmpRows, 1> amp(2 * bd);
        for (int j = 0; j < nt; ++j) {
            if (j > 0) {
                if (uniform_spacing) {
                    phase.array() *= step.array();
                } else {
                    const double tau = 0.5 * t_ms[j];
                    for (int k = 0; k < d; ++k) phase[k] = std::polar(1.0, -evals_[k] * tau);
                }
            }
            y.array() = phase.array() * vt.array();
            inner.noalias() = w_ * y;
            y.array() = phase.array() * inner.array();
            if constexpr (D == Eigen::Dynamic) {
                amp.noalias() = v_.topRows(2 * bd) * y;
            } else {
                amp.noalias() = v_.template topRows<AmpRows>() * y;
            }
            Complex acc(0.0, 0.0);
            for (int q = 0; q < bd; ++q) acc += amp[q] * std::conj(amp[bd + q]);
            out[j] = 2.0 * acc;
        }
    }

    int dim() const { return dim_; }

  private:
    static constexpr int AmpRows = (D == Eigen::Dynamic) ? Eigen::Dynamic : 2 * (D / 3);

    Mat v_, w_;
    RVec evals_;
    int dim_ = 0, bath_dim_ = 0;
};

/// Dispatch over the cluster dimensions that occur in practice; anything
/// else falls back to the dynamic-size path.
inline void echo_series(const MatrixXcd& h, int bath_state, const Eigen::VectorXd& t_ms,
                        bool uniform_spacing, Complex* out) {
    switch (h.rows()) {
        case 3: SpectralEcho<3>(h).series(bath_state, t_ms, uniform_spacing, out); break;
        case 6: SpectralEcho<6>(h).series(bath_state, t_ms, uniform_spacing, out); break;
        case 12: SpectralEcho<12>(h).series(bath_state, t_ms, uniform_spacing, out); break;
        case 24: SpectralEcho<24>(h).series(bath_state, t_ms, uniform_spacing, out); break;
        case 48: SpectralEcho<48>(h).series(bath_state, t_ms, uniform_spacing, out); break;
        default:
            SpectralEcho<Eigen::Dynamic>(h).series(bath_state, t_ms, uniform_spacing, out);
            break;
    }
}

} // namespace spinecho::detail
