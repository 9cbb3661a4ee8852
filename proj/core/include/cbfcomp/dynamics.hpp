#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include "cbfcomp/geometry.hpp"
#include "cbfcomp/sampling.hpp"

namespace cbfcomp {

struct State {
    Vector q;
    Vector v;
};

using StateSampler = std::function<State(Rng&)>;

/// q' = g1(q) v,  v' = f(q, v) + g2(q) u.
class SecondOrderSystem {
public:
    virtual ~SecondOrderSystem() = default;

    virtual std::string name() const = 0;
    virtual int n1() const = 0;
    virtual int n2() const = 0;
    virtual int m() const = 0;

    virtual Vector f(const Vector& q, const Vector& v) const = 0;
    virtual Matrix g1(const Vector& q) const = 0;
    virtual Matrix g2(const Vector& q) const = 0;

    virtual Matrix jac_f_q(const Vector& q, const Vector& v) const = 0;
    virtual Matrix jac_f_v(const Vector& q, const Vector& v) const = 0;

    /// d/ds [g1(q + s w) v] at s = 0.
    virtual Vector dir_deriv_g1(const Vector& q, const Vector& v, const Vector& w) const = 0;

    /// Positions live on the unit sphere (quaternions); integrators renormalize.
    virtual bool unit_position() const { return false; }

    void require_state(const Vector& q, const Vector& v, const char* context) const;
};

struct Flow {
    Vector qdot;
    Vector vdot;
};

Flow flow(const SecondOrderSystem& sys, const Vector& q, const Vector& v, const Vector& u);

/// q' = v, v' = u in R^dim.
class DoubleIntegrator final : public SecondOrderSystem {
public:
    explicit DoubleIntegrator(int dim = 2);

    std::string name() const override { return "double_integrator"; }
    int n1() const override { return dim_; }
    int n2() const override { return dim_; }
    int m() const override { return dim_; }

    Vector f(const Vector& q, const Vector& v) const override;
    Matrix g1(const Vector& q) const override;
    Matrix g2(const Vector& q) const override;
    Matrix jac_f_q(const Vector& q, const Vector& v) const override;
    Matrix jac_f_v(const Vector& q, const Vector& v) const override;
    Vector dir_deriv_g1(const Vector& q, const Vector& v, const Vector& w) const override;

private:
    int dim_;
};

/// Unit-inertia rigid body, scalar-last quaternion q = (q1, q2, q3, q4) and
/// body rates omega: q' = 0.5 * Xi(q) omega, omega' = u.
class AttitudeSystem final : public SecondOrderSystem {
public:
    std::string name() const override { return "attitude"; }
    int n1() const override { return 4; }
    int n2() const override { return 3; }
    int m() const override { return 3; }

    Vector f(const Vector& q, const Vector& v) const override;
    Matrix g1(const Vector& q) const override;
    Matrix g2(const Vector& q) const override;
    Matrix jac_f_q(const Vector& q, const Vector& v) const override;
    Matrix jac_f_v(const Vector& q, const Vector& v) const override;
    Vector dir_deriv_g1(const Vector& q, const Vector& v, const Vector& w) const override;
    bool unit_position() const override { return true; }

    /// 4x4 rate matrix with q' = 0.5 * omega_matrix(omega) * q.
    static Matrix omega_matrix(const Vector& omega);
};

struct DerivativeReport {
    int samples = 0;
    double max_error = 0.0;
    std::string worst;  ///< which derivative produced max_error
    bool pass = false;
};

/// Compares analytic derivatives to central differences (step 1e-5) at
/// random states. The error is |analytic - fd| / max(1, |analytic|),
/// elementwise.
DerivativeReport check_derivatives(const SecondOrderSystem& sys, int samples, std::uint64_t seed,
                                   double tol = 1e-5);

std::unique_ptr<SecondOrderSystem> make_system(const std::string& name);

}  // namespace cbfcomp
