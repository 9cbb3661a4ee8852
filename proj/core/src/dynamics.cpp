#include "cbfcomp/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cbfcomp {

void SecondOrderSystem::require_state(const Vector& q, const Vector& v, const char* context) const
{
    if (q.size() != n1() || v.size() != n2()) {
        throw DimensionError(std::string(context) + ": state dimension mismatch for " + name());
    }
}

Flow flow(const SecondOrderSystem& sys, const Vector& q, const Vector& v, const Vector& u)
{
    sys.require_state(q, v, "flow");
    if (u.size() != sys.m()) throw DimensionError("flow: input dimension mismatch");
    return {sys.g1(q) * v, sys.f(q, v) + sys.g2(q) * u};
}

DoubleIntegrator::DoubleIntegrator(int dim) : dim_(dim)
{
    if (dim <= 0) throw std::invalid_argument("DoubleIntegrator: dimension must be positive");
}

Vector DoubleIntegrator::f(const Vector&, const Vector&) const { return Vector::Zero(dim_); }
Matrix DoubleIntegrator::g1(const Vector&) const { return Matrix::Identity(dim_, dim_); }
Matrix DoubleIntegrator::g2(const Vector&) const { return Matrix::Identity(dim_, dim_); }
Matrix DoubleIntegrator::jac_f_q(const Vector&, const Vector&) const
{
    return Matrix::Zero(dim_, dim_);
}
Matrix DoubleIntegrator::jac_f_v(const Vector&, const Vector&) const
{
    return Matrix::Zero(dim_, dim_);
}
Vector DoubleIntegrator::dir_deriv_g1(const Vector&, const Vector&, const Vector&) const
{
    return Vector::Zero(dim_);
}

Matrix AttitudeSystem::omega_matrix(const Vector& w)
{
    Matrix O(4, 4);
    O << 0.0, w[2], -w[1], w[0],
        -w[2], 0.0, w[0], w[1],
        w[1], -w[0], 0.0, w[2],
        -w[0], -w[1], -w[2], 0.0;
    return O;
}

Vector AttitudeSystem::f(const Vector&, const Vector&) const { return Vector::Zero(3); }

Matrix AttitudeSystem::g1(const Vector& q) const
{
    Matrix X(4, 3);
    X << q[3], -q[2], q[1],
        q[2], q[3], -q[0],
        -q[1], q[0], q[3],
        -q[0], -q[1], -q[2];
    return 0.5 * X;
}

Matrix AttitudeSystem::g2(const Vector&) const { return Matrix::Identity(3, 3); }
Matrix AttitudeSystem::jac_f_q(const Vector&, const Vector&) const { return Matrix::Zero(3, 4); }
Matrix AttitudeSystem::jac_f_v(const Vector&, const Vector&) const { return Matrix::Zero(3, 3); }

Vector AttitudeSystem::dir_deriv_g1(const Vector&, const Vector& v, const Vector& w) const
{
    // g1 is linear in q
    return g1(w) * v;
}

namespace {

struct Worst {
    double error = 0.0;
    std::string what;

    void update(const Matrix& analytic, const Matrix& fd, const std::string& label)
    {
        for (int i = 0; i < analytic.rows(); ++i) {
            for (int j = 0; j < analytic.cols(); ++j) {
                const double e =
                    std::abs(analytic(i, j) - fd(i, j)) / std::max(1.0, std::abs(analytic(i, j)));
                if (e > error) {
                    error = e;
                    what = label;
                }
            }
        }
    }
};

}  // namespace

DerivativeReport check_derivatives(const SecondOrderSystem& sys, int samples, std::uint64_t seed,
                                   double tol)
{
    constexpr double h = 1e-5;
    DerivativeReport report;
    report.samples = samples;
    Worst worst;
    for (int s = 0; s < samples; ++s) {
        Rng rng = stream_rng(seed, static_cast<std::uint64_t>(s));
        Vector q = gaussian_vector(rng, sys.n1());
        if (sys.unit_position()) q.normalize();
        const Vector v = gaussian_vector(rng, sys.n2());
        const Vector w = gaussian_vector(rng, sys.n1());

        Matrix fq(sys.n2(), sys.n1());
        for (int j = 0; j < sys.n1(); ++j) {
            Vector dq = Vector::Zero(sys.n1());
            dq[j] = h;
            fq.col(j) = (sys.f(q + dq, v) - sys.f(q - dq, v)) / (2.0 * h);
        }
        worst.update(sys.jac_f_q(q, v), fq, "jac_f_q");

        Matrix fv(sys.n2(), sys.n2());
        for (int j = 0; j < sys.n2(); ++j) {
            Vector dv = Vector::Zero(sys.n2());
            dv[j] = h;
            fv.col(j) = (sys.f(q, v + dv) - sys.f(q, v - dv)) / (2.0 * h);
        }
        worst.update(sys.jac_f_v(q, v), fv, "jac_f_v");

        const Vector dg = (sys.g1(q + h * w) * v - sys.g1(q - h * w) * v) / (2.0 * h);
        worst.update(sys.dir_deriv_g1(q, v, w), dg, "dir_deriv_g1");
    }
    report.max_error = worst.error;
    report.worst = worst.what;
    report.pass = worst.error <= tol;
    return report;
}

std::unique_ptr<SecondOrderSystem> make_system(const std::string& name)
{
    if (name == "double_integrator") return std::make_unique<DoubleIntegrator>(2);
    if (name == "attitude") return std::make_unique<AttitudeSystem>();
    throw std::invalid_argument("unknown system '" + name + "'");
}

}  // namespace cbfcomp
