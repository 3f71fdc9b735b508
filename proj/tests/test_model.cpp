#include <doctest.h>

#include "spinecho/model.hpp"
#include "spinecho/rng.hpp"

using namespace spinecho;

TEST_CASE("dipolar tensor of two electrons 10 A apart along z") {
    const Vector3d a(0.0, 0.0, 0.0), b(0.0, 0.0, 10.0);
    const Matrix3d k = dipolar_tensor(a, b, kGammaElectron, kGammaElectron);

    // (mu0/4pi) gamma_e^2 hbar / r^3 is about 2pi * 52 MHz at 1 nm; the zz
    // component carries the factor (3 - 1) = 2.
    CHECK(k(2, 2) < 0.0);
    CHECK(std::abs(k(2, 2)) == doctest::Approx(6.54e5).epsilon(2e-3));
    CHECK(k(0, 0) == doctest::Approx(-k(2, 2) / 2.0));
    CHECK(k(1, 1) == doctest::Approx(-k(2, 2) / 2.0));
    CHECK(std::abs(k(0, 1)) < 1e-12);
}

TEST_CASE("dipolar tensor is symmetric traceless and swap invariant") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const Vector3d a(rng.next_double() * 50, rng.next_double() * 50, rng.next_double() * 50);
        Vector3d b = a;
        while ((a - b).norm() < 1.0)
            b = Vector3d(rng.next_double() * 50, rng.next_double() * 50, rng.next_double() * 50);
        const Matrix3d k = dipolar_tensor(a, b, kGammaElectron, kGammaElectron);
        const double scale = k.cwiseAbs().maxCoeff();
        CHECK(std::abs(k.trace()) < 1e-12 * scale);
        CHECK((k - k.transpose()).cwiseAbs().maxCoeff() < 1e-12 * scale);
        const Matrix3d swapped = dipolar_tensor(b, a, kGammaElectron, kGammaElectron);
        CHECK((k - swapped).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("dipolar tensor scales as r^-3 under dilation") {
    const Vector3d a(1.0, -2.0, 0.5), b(4.0, 3.0, -1.0);
    const Matrix3d k1 = dipolar_tensor(a, b, kGammaElectron, kGammaElectron);
    const double lambda = 3.7;
    const Matrix3d k2 = dipolar_tensor(lambda * a, lambda * b, kGammaElectron, kGammaElectron);
    const Matrix3d expected = k1 / (lambda * lambda * lambda);
    CHECK((k2 - expected).cwiseAbs().maxCoeff() < 1e-12 * k1.cwiseAbs().maxCoeff());
}

TEST_CASE("dipolar tensor rejects coincident positions") {
    const Vector3d a(1.0, 1.0, 1.0);
    CHECK_THROWS_AS(dipolar_tensor(a, a, kGammaElectron, kGammaElectron), std::domain_error);
}

TEST_CASE("zeeman term") {
    const ExternalField b100{Vector3d(0.0, 0.0, 100.0)};
    const Vector3d w = zeeman_term(kGammaElectron, b100);
    CHECK(w[0] == 0.0);
    CHECK(w[1] == 0.0);
    CHECK(w[2] == doctest::Approx(-1.7608597e6).epsilon(1e-12));

    CHECK(zeeman_term(kGammaElectron, ExternalField{Vector3d::Zero()}).norm() == 0.0);

    const Vector3d w1 = zeeman_term(kGammaElectron, ExternalField{Vector3d(0.0, 0.0, 1.0)});
    CHECK(w[2] == doctest::Approx(100.0 * w1[2]));
}

TEST_CASE("NV frame rotation maps [111] to z and preserves lengths") {
    const Vector3d v111 = Vector3d(1.0, 1.0, 1.0).normalized();
    const Vector3d z = rotate_to_nv_frame(v111);
    CHECK((z - Vector3d(0.0, 0.0, 1.0)).norm() < 1e-14);

    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const Vector3d v(rng.next_double() - 0.5, rng.next_double() - 0.5,
                         rng.next_double() - 0.5);
        CHECK(rotate_to_nv_frame(v).norm() == doctest::Approx(v.norm()).epsilon(1e-13));
    }

    const Vector3d perp = rotate_to_nv_frame(Vector3d(1.0, -1.0, 0.0).normalized());
    CHECK(perp.norm() == doctest::Approx(1.0));
    CHECK(std::abs(perp[2]) < 1e-14);

    const Matrix3d r = nv_frame_rotation();
    CHECK((r * r.transpose() - Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(r.determinant() == doctest::Approx(1.0));
}

TEST_CASE("default NV central spin") {
    const CentralSpin nv = CentralSpin::nv();
    CHECK(nv.spin == 1.0);
    CHECK(nv.dim() == 3);
    CHECK((nv.zfs - nv.zfs.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(std::abs(nv.zfs.trace()) < 1e-6);
    // axial splitting between m = +-1 and m = 0 is 2pi * 2.87e6 rad/ms
    CHECK(nv.zfs(2, 2) - nv.zfs(0, 0) == doctest::Approx(kNvZfsSplitting).epsilon(1e-12));
    CHECK(nv.qubit_lower == 0);
    CHECK(nv.qubit_upper == 1);
}

TEST_CASE("coupling role tags") {
    CentralSpin c = CentralSpin::nv();
    BathSpin b;
    b.position = Vector3d(0.0, 0.0, 25.0);
    const InteractionTensor a = central_bath_coupling(c, b);
    CHECK(a.role == InteractionTensor::Role::CentralBath);
    BathSpin b2;
    b2.position = Vector3d(12.0, 0.0, 25.0);
    const InteractionTensor k = bath_bath_coupling(b, b2);
    CHECK(k.role == InteractionTensor::Role::BathBath);
    CHECK(std::abs(k.mat.trace()) < 1e-12 * k.mat.cwiseAbs().maxCoeff());
}
