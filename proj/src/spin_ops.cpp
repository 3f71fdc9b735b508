#include "spinecho/spin_ops.hpp"

namespace spinecho {

namespace {

// Products of the site dimensions before/after a site index.
inline int dim_product(const std::vector<int>& dims, int lo, int hi) {
    int p = 1;
    for (int k = lo; k < hi; ++k) p *= dims[static_cast<std::size_t>(k)];
    return p;
}

} // namespace

void add_site_operator(Eigen::Ref<MatrixXcd> h, const std::vector<int>& dims, int site,
                       const MatrixXcd& op) {
    const int n = static_cast<int>(dims.size());
    if (site < 0 || site >= n) throw std::invalid_argument("add_site_operator: bad site");
    const int d = dims[static_cast<std::size_t>(site)];
    if (op.rows() != d || op.cols() != d)
        throw std::invalid_argument("add_site_operator: operator dimension mismatch");
    const int pre = dim_product(dims, 0, site);
    const int suf = dim_product(dims, site + 1, n);
    for (int p = 0; p < pre; ++p)
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                const Complex v = op(a, b);
                if (v == Complex(0.0)) continue;
                const int row0 = (p * d + a) * suf;
                const int col0 = (p * d + b) * suf;
                for (int s = 0; s < suf; ++s) h(row0 + s, col0 + s) += v;
            }
}

void add_pair_operator(Eigen::Ref<MatrixXcd> h, const std::vector<int>& dims, int site_a,
                       int site_b, const MatrixXcd& op) {
    const int n = static_cast<int>(dims.size());
    if (!(0 <= site_a && site_a < site_b && site_b < n))
        throw std::invalid_argument("add_pair_operator: bad site pair");
    const int da = dims[static_cast<std::size_t>(site_a)];
    const int db = dims[static_cast<std::size_t>(site_b)];
    if (op.rows() != da * db || op.cols() != da * db)
        throw std::invalid_argument("add_pair_operator: operator dimension mismatch");
    const int pre = dim_product(dims, 0, site_a);
    const int mid = dim_product(dims, site_a + 1, site_b);
    const int suf = dim_product(dims, site_b + 1, n);
    for (int p = 0; p < pre; ++p)
        for (int a = 0; a < da; ++a)
            for (int a2 = 0; a2 < da; ++a2)
                for (int m = 0; m < mid; ++m)
                    for (int b = 0; b < db; ++b)
                        for (int b2 = 0; b2 < db; ++b2) {
                            const Complex v = op(a * db + b, a2 * db + b2);
                            if (v == Complex(0.0)) continue;
                            const int row0 = (((p * da + a) * mid + m) * db + b) * suf;
                            const int col0 = (((p * da + a2) * mid + m) * db + b2) * suf;
                            for (int s = 0; s < suf; ++s) h(row0 + s, col0 + s) += v;
                        }
}

} // namespace spinecho
