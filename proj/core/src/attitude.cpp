#include "cbfcomp/attitude.hpp"

#include <cmath>
#include <numbers>

namespace cbfcomp {

namespace {

Matrix skew(const Eigen::Vector3d& v)
{
    Matrix S(3, 3);
    S << 0.0, -v[2], v[1],
        v[2], 0.0, -v[0],
        -v[1], v[0], 0.0;
    return S;
}

void require_unit(const Vector& v, int dim, const char* what)
{
    if (v.size() != dim) throw DimensionError(std::string(what) + ": wrong dimension");
    if (std::abs(v.norm() - 1.0) > 1e-9) {
        throw std::invalid_argument(std::string(what) + ": expected a unit vector");
    }
}

}  // namespace

Matrix rotation_matrix(const Vector& q)
{
    if (q.size() != 4) throw DimensionError("rotation_matrix: quaternion must have 4 entries");
    const Eigen::Vector3d v = q.head<3>();
    const double s = q[3];
    Matrix R = (s * s - v.squaredNorm()) * Matrix::Identity(3, 3);
    R += 2.0 * v * v.transpose();
    R += 2.0 * s * skew(v);
    return R;
}

Vector quaternion_multiply(const Vector& a, const Vector& b)
{
    const Eigen::Vector3d av = a.head<3>();
    const Eigen::Vector3d bv = b.head<3>();
    Vector out(4);
    out.head<3>() = a[3] * bv + b[3] * av + av.cross(bv);
    out[3] = a[3] * b[3] - av.dot(bv);
    return out;
}

Vector quaternion_conjugate(const Vector& q)
{
    Vector c = -q;
    c[3] = q[3];
    return c;
}

Vector rotation_oracle(const Vector& q, const Vector& a_hat)
{
    if (a_hat.size() != 3) throw DimensionError("rotation_oracle: axis must have 3 entries");
    Vector pure = Vector::Zero(4);
    pure.head<3>() = a_hat;
    const Vector r = quaternion_multiply(quaternion_multiply(q, pure), quaternion_conjugate(q));
    return r.head<3>();
}

Matrix cone_matrix(const Vector& a_hat, const Vector& b_hat, double theta)
{
    require_unit(a_hat, 3, "cone_matrix a_hat");
    require_unit(b_hat, 3, "cone_matrix b_hat");
    if (!(theta > 0.0 && theta < std::numbers::pi)) {
        throw std::invalid_argument("cone_matrix: theta must lie in (0, pi)");
    }
    const Eigen::Vector3d a = a_hat;
    const Eigen::Vector3d b = b_hat;
    const double ab = a.dot(b);
    const Eigen::Vector3d axb = a.cross(b);
    Matrix P = Matrix::Zero(4, 4);
    P.topLeftCorner(3, 3) = a * b.transpose() + b * a.transpose() - ab * Matrix::Identity(3, 3);
    P.block(0, 3, 3, 1) = axb;
    P.block(3, 0, 1, 3) = axb.transpose();
    P(3, 3) = ab;
    P -= std::cos(theta) * Matrix::Identity(4, 4);
    return P;
}

ConeConstraint::ConeConstraint(Vector a_hat, Vector b_hat, double theta, std::string label)
    : QuadraticFormConstraint(cone_matrix(a_hat, b_hat, theta), std::move(label)),
      a_(std::move(a_hat)), b_(std::move(b_hat)), theta_(theta)
{
}

nlohmann::json ConeConstraint::params() const
{
    return {{"a_hat", {a_[0], a_[1], a_[2]}},
            {"b_hat", {b_[0], b_[1], b_[2]}},
            {"theta_deg", theta_ * 180.0 / std::numbers::pi}};
}

std::vector<VelocityPtr> rate_limit_constraints(double omega_max, int dim)
{
    if (!(omega_max > 0.0)) throw std::invalid_argument("omega_max must be positive");
    std::vector<VelocityPtr> out;
    const char* names[] = {"x", "y", "z", "w"};
    for (int i = 0; i < dim; ++i) {
        for (double sg : {1.0, -1.0}) {
            Vector l = Vector::Zero(dim);
            l[i] = sg;
            const std::string label = std::string("rate_") + (sg > 0 ? "+" : "-") +
                                      (i < 4 ? names[i] : std::to_string(i).c_str());
            out.push_back(std::make_shared<AffineVelocityConstraint>(l, -omega_max, label));
        }
    }
    return out;
}

double quaternion_distance(const Vector& q1, const Vector& q2)
{
    return std::min((q1 - q2).norm(), (q1 + q2).norm());
}

}  // namespace cbfcomp
