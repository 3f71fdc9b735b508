#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <vector>

namespace spinecho {

using Complex = std::complex<double>;
using MatrixXcd = Eigen::MatrixXcd;

/// Ladder-operator spin matrices for spin j = two_j/2.
/// Basis ordering is m = j, j-1, ..., -j (row 0 is the highest projection);
/// this ordering is part of the serialization and Kronecker contract.
template <typename Real = double>
struct SpinMatrices {
    using Mat = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;
    Mat x, y, z;

    int dim() const { return static_cast<int>(z.rows()); }
};

template <typename Real = double>
SpinMatrices<Real> spin_matrices(int two_j) {
    if (two_j < 0) throw std::invalid_argument("spin_matrices: two_j must be >= 0");
    const int d = two_j + 1;
    const Real j = Real(two_j) / Real(2);
    SpinMatrices<Real> s;
    s.x.setZero(d, d);
    s.y.setZero(d, d);
    s.z.setZero(d, d);
    for (int r = 0; r < d; ++r) {
        const Real m = j - Real(r);
        s.z(r, r) = m;
        if (r > 0) {
            // <m+1| S+ |m> with m = j - r
            const Real c = std::sqrt(j * (j + 1) - m * (m + 1));
            s.x(r - 1, r) += c / Real(2);
            s.x(r, r - 1) += c / Real(2);
            s.y(r - 1, r) += std::complex<Real>(0, -c / Real(2));
            s.y(r, r - 1) += std::complex<Real>(0, c / Real(2));
        }
    }
    return s;
}

/// Kronecker product, first argument slowest index.
template <typename DerivedA, typename DerivedB>
auto kron(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
    using Scalar = typename DerivedA::Scalar;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(a.rows() * b.rows(),
                                                              a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

template <typename Derived>
double hermiticity_error(const Eigen::MatrixBase<Derived>& m) {
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

template <typename Derived>
double unitarity_error(const Eigen::MatrixBase<Derived>& u) {
    using Scalar = typename Derived::Scalar;
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    const Mat prod = u.adjoint() * u;
    return (prod - Mat::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff();
}

/// Accumulate a one-site operator into a many-site matrix.
/// `dims` lists the per-site dimensions in Kronecker order (slowest first);
/// `op` is dims[site] x dims[site].
void add_site_operator(Eigen::Ref<MatrixXcd> h, const std::vector<int>& dims, int site,
                       const MatrixXcd& op);

/// Accumulate a two-site operator given on the product space
/// (dims[site_a] * dims[site_b]) with site_a the slower index. Requires
/// site_a < site_b.
void add_pair_operator(Eigen::Ref<MatrixXcd> h, const std::vector<int>& dims, int site_a,
                       int site_b, const MatrixXcd& op);

} // namespace spinecho
