#include "spinecho/hamiltonian.hpp"

#include <stdexcept>

namespace spinecho {

MatrixXcd pair_coupling_operator(const Eigen::Matrix3d& m, const SpinMatrices<>& left,
                                 const SpinMatrices<>& right) {
    const MatrixXcd* l[3] = {&left.x, &left.y, &left.z};
    const MatrixXcd* r[3] = {&right.x, &right.y, &right.z};
    const int d = left.dim() * right.dim();
    MatrixXcd out = MatrixXcd::Zero(d, d);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            if (m(a, b) == 0.0) continue;
            out += m(a, b) * kron(*l[a], *r[b]);
        }
    return out;
}

MatrixXcd central_spin_hamiltonian(const CentralSpin& central, const ExternalField& field) {
    const auto s = spin_matrices(static_cast<int>(2 * central.spin));
    const MatrixXcd* ops[3] = {&s.x, &s.y, &s.z};
    const int d = central.dim();
    MatrixXcd h = MatrixXcd::Zero(d, d);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            if (central.zfs(a, b) == 0.0) continue;
            h += central.zfs(a, b) * (*ops[a] * *ops[b]);
        }
    const Vector3d w = zeeman_term(central.gamma, field);
    for (int a = 0; a < 3; ++a) {
        if (w[a] == 0.0) continue;
        h += w[a] * *ops[a];
    }
    return h;
}

MatrixXcd cluster_hamiltonian(std::span<const BathSpin> cluster, const CentralSpin& central,
                              const ExternalField& field, const MeanFieldShifts& shifts,
                              int max_spins) {
    const int n = static_cast<int>(cluster.size());
    if (n > max_spins)
        throw std::length_error("cluster_hamiltonian: cluster exceeds the dimension guard");
    if (shifts.bath.size() != 0 && shifts.bath.size() != n)
        throw std::invalid_argument("cluster_hamiltonian: mean-field shift count mismatch");

    const auto sc = spin_matrices(static_cast<int>(2 * central.spin));
    std::vector<int> dims(static_cast<std::size_t>(n) + 1);
    dims[0] = central.dim();
    std::vector<SpinMatrices<>> bath_ops(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        bath_ops[static_cast<std::size_t>(i)] =
            spin_matrices(static_cast<int>(2 * cluster[static_cast<std::size_t>(i)].spin));
        dims[static_cast<std::size_t>(i) + 1] = cluster[static_cast<std::size_t>(i)].dim();
    }
    int dim = 1;
    for (int d : dims) dim *= d;

    MatrixXcd h = MatrixXcd::Zero(dim, dim);

    MatrixXcd hc = central_spin_hamiltonian(central, field);
    if (shifts.central != 0.0) hc += shifts.central * sc.z;
    add_site_operator(h, dims, 0, hc);

    for (int i = 0; i < n; ++i) {
        const auto& b = cluster[static_cast<std::size_t>(i)];
        const auto& ops = bath_ops[static_cast<std::size_t>(i)];
        const Vector3d w = zeeman_term(b.gamma, field);
        MatrixXcd hb = w[0] * ops.x + w[1] * ops.y + w[2] * ops.z;
        if (shifts.bath.size() == n) hb += shifts.bath[i] * ops.z;
        add_site_operator(h, dims, i + 1, hb);

        const Matrix3d a_i = dipolar_tensor(central.position, b.position, central.gamma, b.gamma);
        add_pair_operator(h, dims, 0, i + 1, pair_coupling_operator(a_i, sc, ops));
    }

    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const auto& bi = cluster[static_cast<std::size_t>(i)];
            const auto& bj = cluster[static_cast<std::size_t>(j)];
            const Matrix3d k_ij = dipolar_tensor(bi.position, bj.position, bi.gamma, bj.gamma);
            add_pair_operator(h, dims, i + 1, j + 1,
                              pair_coupling_operator(k_ij, bath_ops[static_cast<std::size_t>(i)],
                                                     bath_ops[static_cast<std::size_t>(j)]));
        }

    return h;
}

} // namespace spinecho
