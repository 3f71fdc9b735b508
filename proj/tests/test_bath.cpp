#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "spinecho/bath.hpp"
#include "spinecho/model.hpp"
#include "spinecho/rng.hpp"

using namespace spinecho;

namespace {

namespace fs = std::filesystem;

fs::path temp_dir() {
    const auto dir = fs::temp_directory_path() / "spinecho-bath-tests";
    fs::create_directories(dir);
    return dir;
}

// Upper 1% point of chi^2 with k degrees of freedom (Wilson-Hilferty).
double chi2_99(int k) {
    const double z = 2.3263478740408408; // N(0,1) 99% quantile
    const double a = 2.0 / (9.0 * k);
    const double c = 1.0 - a + z * std::sqrt(a);
    return k * c * c * c;
}

} // namespace

TEST_CASE("expected spin count reproduces the tabulated bath sizes") {
    CHECK(expected_spin_count(0.1, 1000.0) == doctest::Approx(74.0).epsilon(0.01));
    CHECK(expected_spin_count(1.0, 500.0) == doctest::Approx(92.0).epsilon(0.01));
    CHECK(expected_spin_count(0.0, 500.0) == 0.0);
    // density formula: (8/a^3) (4pi/3) r^3 ppm 1e-6
    const LatticeSpec lat;
    const double direct = lat.site_density() * 4.0 / 3.0 * std::numbers::pi * 1e9 * 0.1e-6;
    CHECK(expected_spin_count(0.1, 1000.0) == doctest::Approx(direct).epsilon(1e-14));
}

TEST_CASE("generation is deterministic in the seed") {
    const auto a = generate_configuration(10.0, 150.0, LatticeSpec{}, 1234);
    const auto b = generate_configuration(10.0, 150.0, LatticeSpec{}, 1234);
    REQUIRE(a.size() == b.size());
    for (int i = 0; i < a.size(); ++i) {
        CHECK(a.spins[i].position == b.spins[i].position);
        CHECK(a.spins[i].gamma == b.spins[i].gamma);
    }
    const auto c = generate_configuration(10.0, 150.0, LatticeSpec{}, 1235);
    REQUIRE(c.size() > 0);
    CHECK(a.spins[0].position != c.spins[0].position); // different seed, different sites
}

TEST_CASE("positions lie on lattice sites inside the sphere, no duplicates") {
    const auto config = generate_configuration(50.0, 120.0, LatticeSpec{}, 99);
    REQUIRE(config.size() > 10);
    const Matrix3d inv = nv_frame_rotation().transpose();
    const double quarter = config.lattice.a / 4.0;
    std::set<std::array<long, 3>> seen;
    for (const auto& s : config.spins) {
        CHECK(s.position.norm() <= 120.0 + 1e-9);
        const Vector3d cubic = inv * s.position;
        std::array<long, 3> key{};
        for (int a = 0; a < 3; ++a) {
            const double q = cubic[a] / quarter;
            key[static_cast<std::size_t>(a)] = std::lround(q);
            CHECK(std::abs(q - std::round(q)) * quarter < 1e-9);
        }
        CHECK(seen.insert(key).second);
        // the defect sites stay empty
        CHECK(!(key[0] == 0 && key[1] == 0 && key[2] == 0));
        CHECK(!(key[0] == 1 && key[1] == 1 && key[2] == 1));
    }
}

TEST_CASE("count statistics match the binomial model at 0.1 ppm, 1000 A") {
    const int n_seeds = 500;
    double sum = 0.0, sum2 = 0.0;
    for (int s = 0; s < n_seeds; ++s) {
        const auto config = generate_configuration(0.1, 1000.0, LatticeSpec{}, 7000 + s);
        sum += config.size();
        sum2 += static_cast<double>(config.size()) * config.size();
    }
    const double mean = sum / n_seeds;
    const double sigma = std::sqrt(sum2 / n_seeds - mean * mean);
    CHECK(std::abs(mean - 74.0) < 3.0);
    CHECK(std::abs(sigma - 8.0) < 2.0);
}

TEST_CASE("chi-square sanity against the binomial count distribution") {
    const double ppm = 8.0, r = 100.0;
    const LatticeSpec lat;
    const auto n_sites = static_cast<long long>(
        std::llround(lat.site_density() * 4.0 / 3.0 * std::numbers::pi * r * r * r));
    const double p = ppm * 1e-6;

    const int n_seeds = 2000;
    std::vector<int> counts(64, 0);
    for (int s = 0; s < n_seeds; ++s) {
        const auto config = generate_configuration(ppm, r, lat, 31000 + s);
        counts[static_cast<std::size_t>(std::min(config.size(), 63))]++;
    }

    // Binomial pmf via the Poisson-limit-safe recurrence, bins merged to an
    // expected count of at least 5.
    const double lambda = n_sites * p;
    std::vector<double> pmf(64, 0.0);
    double logp0 = n_sites * std::log1p(-p);
    pmf[0] = std::exp(logp0);
    for (int k = 1; k < 63; ++k)
        pmf[static_cast<std::size_t>(k)] =
            pmf[static_cast<std::size_t>(k - 1)] * ((n_sites - k + 1) * p / (k * (1 - p)));
    pmf[63] = 1.0;
    for (int k = 0; k < 63; ++k) pmf[63] -= pmf[static_cast<std::size_t>(k)];
    CHECK(lambda == doctest::Approx(5.89).epsilon(0.01));

    double chi2 = 0.0;
    int dof = -1; // one constraint: total count
    double obs_acc = 0.0, exp_acc = 0.0;
    for (int k = 0; k < 64; ++k) {
        obs_acc += counts[static_cast<std::size_t>(k)];
        exp_acc += n_seeds * pmf[static_cast<std::size_t>(k)];
        if (exp_acc >= 5.0 || k == 63) {
            chi2 += (obs_acc - exp_acc) * (obs_acc - exp_acc) / exp_acc;
            ++dof;
            obs_acc = exp_acc = 0.0;
        }
    }
    CHECK(chi2 < chi2_99(std::max(dof, 1)));
}

TEST_CASE("configurations survive a JSON round trip") {
    const auto dir = temp_dir();
    const auto path = dir / "roundtrip.json";
    const auto config = generate_configuration(20.0, 110.0, LatticeSpec{}, 5, "rt-test");
    save_configuration(config, path);
    const auto loaded = load_configuration(path);
    CHECK(loaded.id == config.id);
    CHECK(loaded.seed == config.seed);
    CHECK(loaded.ppm == config.ppm);
    CHECK(loaded.r_bath == config.r_bath);
    REQUIRE(loaded.size() == config.size());
    for (int i = 0; i < config.size(); ++i) {
        CHECK(loaded.spins[i].position == config.spins[i].position); // bit exact
        CHECK(loaded.spins[i].spin == config.spins[i].spin);
        CHECK(loaded.spins[i].gamma == config.spins[i].gamma);
    }
}

TEST_CASE("empty configuration round trips") {
    const auto dir = temp_dir();
    const auto path = dir / "empty.json";
    const auto config = generate_configuration(0.0, 200.0, LatticeSpec{}, 6);
    CHECK(config.size() == 0);
    save_configuration(config, path);
    CHECK(load_configuration(path).size() == 0);
}

TEST_CASE("loading rejects spins outside the bath radius") {
    const auto dir = temp_dir();
    const auto path = dir / "outside.json";
    auto config = generate_configuration(20.0, 110.0, LatticeSpec{}, 7);
    REQUIRE(config.size() > 0);
    config.r_bath = config.spins[0].position.norm() * 0.5; // invalidates spin 0
    save_configuration(config, path);
    CHECK_THROWS_WITH_AS(load_configuration(path),
                         doctest::Contains("outside the r_bath sphere"), std::runtime_error);
}

TEST_CASE("malformed files give diagnostics") {
    const auto dir = temp_dir();
    const auto path = dir / "broken.json";
    {
        std::ofstream out(path);
        out << "{ \"schema\": \"spinecho.bath-configuration/1\", \"id\": ";
    }
    CHECK_THROWS_AS(load_configuration(path), std::runtime_error);
    {
        std::ofstream out(path);
        out << "{ \"schema\": \"spinecho.bath-configuration/1\", \"id\": \"x\" }";
    }
    CHECK_THROWS_WITH_AS(load_configuration(path), doctest::Contains("field"),
                         std::runtime_error);
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(generate_configuration(-1.0, 100.0, LatticeSpec{}, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(generate_configuration(1.0, 0.0, LatticeSpec{}, 0), std::invalid_argument);
    // a sphere larger than half the supercell would be clipped
    CHECK_THROWS_AS(generate_configuration(1.0, 2500.0, LatticeSpec{}, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(expected_spin_count(1.0, -5.0), std::invalid_argument);
}
