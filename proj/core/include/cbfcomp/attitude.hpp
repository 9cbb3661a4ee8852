#pragma once

#include <vector>

#include "cbfcomp/barriers.hpp"

namespace cbfcomp {

/// Rotation matrix of a unit scalar-last quaternion (body to inertial).
Matrix rotation_matrix(const Vector& q);

/// R(q) a via the quaternion sandwich q (a, 0) q*.
Vector rotation_oracle(const Vector& q, const Vector& a_hat);

/// Symmetric P with q'Pq = b' R(q) a - cos(theta) for unit q. Positive means
/// the body axis a points within theta of b (forbidden).
Matrix cone_matrix(const Vector& a_hat, const Vector& b_hat, double theta);

class ConeConstraint final : public QuadraticFormConstraint {
public:
    ConeConstraint(Vector a_hat, Vector b_hat, double theta, std::string label = "cone");

    std::string family() const override { return "cone"; }
    nlohmann::json params() const override;

    const Vector& a_hat() const { return a_; }
    const Vector& b_hat() const { return b_; }
    double theta() const { return theta_; }

private:
    Vector a_;
    Vector b_;
    double theta_;
};

/// The six pieces +-omega_i - omega_max of |omega|_inf <= omega_max.
std::vector<VelocityPtr> rate_limit_constraints(double omega_max, int dim = 3);

/// Quaternion distance respecting the double cover.
double quaternion_distance(const Vector& q1, const Vector& q2);

/// q1 (x) q2, scalar-last Hamilton product.
Vector quaternion_multiply(const Vector& q1, const Vector& q2);
Vector quaternion_conjugate(const Vector& q);

}  // namespace cbfcomp
