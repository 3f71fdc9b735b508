#include <doctest.h>

#include "spinecho/coherence.hpp"
#include "spinecho/rng.hpp"

using namespace spinecho;

namespace {

const ExternalField kB100{Vector3d(0.0, 0.0, 100.0)};

SpinBathConfiguration config_from_positions(const std::vector<Vector3d>& positions,
                                            double r_bath = 1e3) {
    SpinBathConfiguration config;
    config.r_bath = r_bath;
    for (const auto& p : positions) {
        BathSpin s;
        s.position = p;
        config.spins.push_back(s);
    }
    return config;
}

// A random bath with typical inter-spin distances, all spins mutually within
// r_dipole when a large radius is used.
SpinBathConfiguration random_bath(Rng& rng, int n_spins, double box = 120.0) {
    std::vector<Vector3d> pos;
    while (static_cast<int>(pos.size()) < n_spins) {
        const Vector3d p(box * (rng.next_double() - 0.5), box * (rng.next_double() - 0.5),
                         box * (rng.next_double() - 0.5));
        if (p.norm() < 15.0) continue; // keep couplings moderate
        bool close = false;
        for (const auto& q : pos) close = close || (p - q).norm() < 10.0;
        if (!close) pos.push_back(p);
    }
    return config_from_positions(pos);
}

ClusterSet full_cluster_set(const SpinBathConfiguration& config, int order) {
    return enumerate_clusters(build_neighbor_graph(config, 1e5), order);
}

} // namespace

TEST_CASE("hahn echo propagator at H = 0 is the bare pulse") {
    const MatrixXcd h = MatrixXcd::Zero(6, 6);
    const MatrixXcd u = hahn_echo_propagator(h, 0.37);
    MatrixXcd pi_pulse = MatrixXcd::Zero(6, 6);
    pi_pulse.block(0, 2, 2, 2).setIdentity(); // swap m = +1 and m = 0 blocks
    pi_pulse.block(2, 0, 2, 2).setIdentity();
    pi_pulse.block(4, 4, 2, 2).setIdentity(); // m = -1 untouched
    CHECK((u - pi_pulse).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("hahn echo propagator is unitary") {
    Rng rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        const int bd = 1 << (1 + static_cast<int>(rng.below(3)));
        const int d = 3 * bd;
        MatrixXcd a(d, d);
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c)
                a(r, c) = Complex(rng.next_double() - 0.5, rng.next_double() - 0.5);
        const MatrixXcd h = 1e5 * (a + a.adjoint());
        const MatrixXcd u = hahn_echo_propagator(h, 1e-4);
        CHECK(unitarity_error(u) < 1e-10);
    }
}

TEST_CASE("hahn echo propagator rejects non-Hermitian input") {
    MatrixXcd h = MatrixXcd::Zero(3, 3);
    h(0, 1) = Complex(1.0, 0.0); // not mirrored
    CHECK_THROWS_AS(hahn_echo_propagator(h, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(hahn_echo_propagator(MatrixXcd::Zero(4, 4), 0.1), std::invalid_argument);
}

TEST_CASE("central-spin-only echo refocuses exactly for diagonal Hamiltonians") {
    // H diagonal in the central basis: the two qubit phases cancel and the
    // coherence element keeps magnitude 1.
    const CentralSpin nv = CentralSpin::nv();
    MatrixXcd h = MatrixXcd::Zero(3, 3);
    h(0, 0) = nv.zfs(2, 2) + 12345.0;
    h(1, 1) = -777.0;
    h(2, 2) = 2.0;
    const MatrixXcd u = hahn_echo_propagator(h, 0.013);
    const Eigen::Vector3cd psi0(Complex(1.0, 0.0) / std::sqrt(2.0),
                                Complex(1.0, 0.0) / std::sqrt(2.0), Complex(0.0, 0.0));
    const Eigen::Vector3cd psi = u * psi0;
    const Complex coherence = 2.0 * psi[0] * std::conj(psi[1]);
    CHECK(std::abs(coherence) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("empty cluster factor stays at unit magnitude") {
    const CentralSpin nv = CentralSpin::nv();
    const auto config = config_from_positions({Vector3d(0, 0, 40), Vector3d(30, 0, 0)});
    const auto samples = sample_bath_states(9, 1, config.size());
    const auto grid = TimeGrid::for_concentration(10.0);
    const auto values = cluster_coherence({}, config, nv, kB100, samples[0], grid);
    for (int j = 0; j < grid.size(); ++j)
        CHECK(std::abs(values[j]) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("a quasi-static bath spin refocuses to |1 - L| < 1e-3") {
    const CentralSpin nv = CentralSpin::nv();
    Rng rng(31);
    for (int trial = 0; trial < 5; ++trial) {
        Vector3d p(0, 0, 0);
        while (p.norm() < 30.0)
            p = Vector3d(120 * (rng.next_double() - 0.5), 120 * (rng.next_double() - 0.5),
                         120 * (rng.next_double() - 0.5));
        const auto config = config_from_positions({p});
        const auto set = full_cluster_set(config, 1);
        GcceOptions opts;
        opts.n_samples = 2;
        opts.seed = 100 + trial;
        const auto curve = gcce_coherence(config, set, nv, kB100,
                                          TimeGrid::for_concentration(1.0), opts);
        for (int j = 0; j < curve.size(); ++j)
            CHECK(std::abs(1.0 - curve.values[j].real()) < 1e-3);
    }
}

TEST_CASE("two-spin cluster equals exact diagonalization on the same bath") {
    const CentralSpin nv = CentralSpin::nv();
    Rng rng(37);
    const auto config = random_bath(rng, 2);
    const auto grid = TimeGrid::for_concentration(20.0);
    const auto samples = sample_bath_states(55, 1, 2);

    const std::vector<int> cluster{0, 1};
    const auto values = cluster_coherence(cluster, config, nv, kB100, samples[0], grid);

    ExactOptions exact;
    exact.n_samples = 1;
    exact.seed = 55;
    const auto reference = exact_coherence(config, nv, kB100, grid, exact);
    CHECK((values - reference.values).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("non-interacting spins factorize into singleton contributions") {
    const CentralSpin nv = CentralSpin::nv();
    // the second spin is so distant that its residual couplings (~1e-3
    // rad/ms) cannot move the coherence above the 1e-8 level on this grid
    const auto config =
        config_from_positions({Vector3d(0, 0, 60), Vector3d(0, 0, -9000)}, 1e4);
    const auto set = enumerate_clusters(build_neighbor_graph(config, 100.0), 2);
    CHECK(set.size() == 2); // singletons only

    GcceOptions opts;
    opts.n_samples = 4;
    opts.seed = 77;
    const auto grid = TimeGrid::for_concentration(5.0);
    const auto approx = gcce_coherence(config, set, nv, kB100, grid, opts);

    ExactOptions exact;
    exact.n_samples = 4;
    exact.seed = 77;
    const auto reference = exact_coherence(config, nv, kB100, grid, exact);
    CHECK((approx.values - reference.values).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("gcce at order = bath size matches exact diagonalization") {
    const CentralSpin nv = CentralSpin::nv();
    Rng rng(41);
    for (int n = 2; n <= 4; ++n) {
        const auto config = random_bath(rng, n);
        const auto set = full_cluster_set(config, n);
        GcceOptions opts;
        opts.n_samples = 3;
        opts.seed = 900 + n;
        const auto grid = TimeGrid::for_concentration(30.0, 41);
        const auto approx = gcce_coherence(config, set, nv, kB100, grid, opts);

        ExactOptions exact;
        exact.n_samples = 3;
        exact.seed = 900 + n;
        const auto reference = exact_coherence(config, nv, kB100, grid, exact);
        CHECK((approx.values - reference.values).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("factorization telescopes to the maximal cluster") {
    // Single maximal cluster: the product of irreducible factors must give
    // back the raw coherence of that cluster, sample by sample.
    const CentralSpin nv = CentralSpin::nv();
    Rng rng(43);
    const auto config = random_bath(rng, 3);
    const auto set = full_cluster_set(config, 3);
    const auto grid = TimeGrid::for_concentration(25.0, 31);

    GcceOptions opts;
    opts.n_samples = 2;
    opts.seed = 4242;
    const auto gcce = gcce_coherence(config, set, nv, kB100, grid, opts);

    const auto samples = sample_bath_states(4242, 2, 3);
    Eigen::VectorXcd mean = Eigen::VectorXcd::Zero(grid.size());
    const std::vector<int> maximal{0, 1, 2};
    for (const auto& s : samples)
        mean += cluster_coherence(maximal, config, nv, kB100, s, grid);
    mean /= 2.0;
    CHECK((gcce.values - mean).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gcce output is deterministic in the seed") {
    const CentralSpin nv = CentralSpin::nv();
    Rng rng(47);
    const auto config = random_bath(rng, 3);
    const auto set = full_cluster_set(config, 2);
    const auto grid = TimeGrid::for_concentration(10.0, 21);
    GcceOptions opts;
    opts.n_samples = 5;
    opts.seed = 1001;
    const auto a = gcce_coherence(config, set, nv, kB100, grid, opts);
    const auto b = gcce_coherence(config, set, nv, kB100, grid, opts);
    REQUIRE(a.size() == b.size());
    for (int j = 0; j < a.size(); ++j) CHECK(a.values[j] == b.values[j]);

    opts.threads = 3; // same bits under a different schedule
    const auto c = gcce_coherence(config, set, nv, kB100, grid, opts);
    for (int j = 0; j < a.size(); ++j) CHECK(a.values[j] == c.values[j]);
}

TEST_CASE("normalization and bounds") {
    const CentralSpin nv = CentralSpin::nv();
    Rng rng(53);
    const auto config = random_bath(rng, 4);
    const auto grid = TimeGrid::for_concentration(40.0, 26);

    ExactOptions exact; // full uniform mixture
    const auto curve = exact_coherence(config, nv, kB100, grid, exact);
    CHECK(curve.values[0].real() == doctest::Approx(1.0).epsilon(1e-12));
    for (int j = 0; j < curve.size(); ++j) CHECK(std::abs(curve.values[j]) <= 1.0 + 1e-10);

    const auto set = full_cluster_set(config, 2);
    GcceOptions opts;
    opts.n_samples = 3;
    const auto approx = gcce_coherence(config, set, nv, kB100, grid, opts);
    CHECK(approx.values[0].real() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("empty bath keeps full coherence") {
    const CentralSpin nv = CentralSpin::nv();
    const SpinBathConfiguration config = config_from_positions({});
    const auto grid = TimeGrid::for_concentration(1.0, 11);

    const auto exact = exact_coherence(config, nv, kB100, grid, ExactOptions{});
    GcceOptions opts;
    opts.n_samples = 1;
    const auto gcce = gcce_coherence(config, full_cluster_set(config, 2), nv, kB100, grid, opts);
    for (int j = 0; j < grid.size(); ++j) {
        CHECK(std::abs(exact.values[j] - 1.0) < 1e-10);
        CHECK(std::abs(gcce.values[j] - 1.0) < 1e-10);
    }
}

TEST_CASE("exact oracle refuses oversized baths") {
    Rng rng(59);
    const auto config = random_bath(rng, 5, 300.0);
    ExactOptions opts;
    opts.max_spins = 4;
    CHECK_THROWS_AS(exact_coherence(config, CentralSpin::nv(), kB100,
                                    TimeGrid::for_concentration(1.0, 5), opts),
                    std::length_error);
}

TEST_CASE("bath state samples are reproducible and unbiased") {
    const auto a = sample_bath_states(123, 50, 20);
    const auto b = sample_bath_states(123, 50, 20);
    REQUIRE(a.size() == 50);
    double sum = 0.0;
    for (std::size_t s = 0; s < a.size(); ++s) {
        CHECK(a[s].z == b[s].z);
        CHECK(a[s].seed == b[s].seed);
        for (int i = 0; i < 20; ++i) {
            CHECK(std::abs(a[s].z[i]) == 0.5);
            sum += a[s].z[i];
        }
    }
    CHECK(std::abs(sum) < 50.0); // loose 3-sigma bound on 1000 coin flips
}

TEST_CASE("time grid construction") {
    const auto grid = TimeGrid::for_concentration(1.0);
    CHECK(grid.size() == 101);
    CHECK(grid.t_ms[0] == 0.0);
    CHECK(grid.t_ms[100] == doctest::Approx(4.0 * 0.0527));
    CHECK(grid.uniform_from_zero());
    CHECK_THROWS_AS(TimeGrid::linear(-1.0, 11), std::invalid_argument);
    CHECK_THROWS_AS(TimeGrid::linear(1.0, 1), std::invalid_argument);
}

TEST_CASE("pulse sequence vocabulary") {
    const PulseSequence seq{0.35};
    CHECK(seq.total_time() == doctest::Approx(0.7));
}
