#include "spinecho/model.hpp"

#include <cmath>
#include <stdexcept>

namespace spinecho {

Matrix3d dipolar_tensor(const Vector3d& r_i, const Vector3d& r_j, double gamma_i,
                        double gamma_j) {
    const Vector3d r = r_j - r_i;
    const double dist = r.norm();
    if (dist <= 0.0)
        throw std::domain_error("dipolar_tensor: coincident spin positions");
    const Vector3d u = r / dist;
    const double pref = PhysicalConstants{}.dipole_prefactor(gamma_i, gamma_j) /
                        (dist * dist * dist);
    return pref * (3.0 * u * u.transpose() - Matrix3d::Identity());
}

InteractionTensor central_bath_coupling(const CentralSpin& c, const BathSpin& b) {
    return {dipolar_tensor(c.position, b.position, c.gamma, b.gamma),
            InteractionTensor::Role::CentralBath};
}

InteractionTensor bath_bath_coupling(const BathSpin& a, const BathSpin& b) {
    return {dipolar_tensor(a.position, b.position, a.gamma, b.gamma),
            InteractionTensor::Role::BathBath};
}

Vector3d zeeman_term(double gamma, const ExternalField& field) {
    return gamma * field.gauss;
}

Matrix3d nv_frame_rotation() {
    Matrix3d r;
    r.row(0) = Vector3d(1.0, -1.0, 0.0).normalized();
    r.row(1) = Vector3d(1.0, 1.0, -2.0).normalized();
    r.row(2) = Vector3d(1.0, 1.0, 1.0).normalized();
    return r;
}

Vector3d rotate_to_nv_frame(const Vector3d& cubic) {
    return nv_frame_rotation() * cubic;
}

} // namespace spinecho
