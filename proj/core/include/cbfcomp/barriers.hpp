#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbfcomp/cbf_row.hpp"
#include "cbfcomp/control_set.hpp"
#include "cbfcomp/dynamics.hpp"

namespace cbfcomp {

/// kappa(q) <= 0 is safe.
class PositionConstraint {
public:
    explicit PositionConstraint(std::string label) : label_(std::move(label)) {}
    virtual ~PositionConstraint() = default;

    virtual int dimension() const = 0;
    virtual double value(const Vector& q) const = 0;
    virtual Vector gradient(const Vector& q) const = 0;
    virtual Matrix hessian(const Vector& q) const = 0;

    virtual std::string family() const = 0;
    virtual nlohmann::json params() const = 0;

    const std::string& label() const { return label_; }

private:
    std::string label_;
};

/// kappa(q) = p . q + d
class HalfPlaneConstraint final : public PositionConstraint {
public:
    HalfPlaneConstraint(Vector p, double d, std::string label = "half_plane");

    int dimension() const override { return static_cast<int>(p_.size()); }
    double value(const Vector& q) const override;
    Vector gradient(const Vector& q) const override;
    Matrix hessian(const Vector& q) const override;
    std::string family() const override { return "half_plane"; }
    nlohmann::json params() const override;

    const Vector& normal() const { return p_; }
    double offset() const { return d_; }

private:
    Vector p_;
    double d_;
};

/// kappa(q) = q' P q with P symmetric.
class QuadraticFormConstraint : public PositionConstraint {
public:
    QuadraticFormConstraint(Matrix P, std::string label = "quadratic");

    int dimension() const override { return static_cast<int>(P_.rows()); }
    double value(const Vector& q) const override;
    Vector gradient(const Vector& q) const override;
    Matrix hessian(const Vector& q) const override;
    std::string family() const override { return "quadratic"; }
    nlohmann::json params() const override;

    const Matrix& matrix() const { return P_; }

private:
    Matrix P_;
};

/// eta(v) <= 0 is safe.
class VelocityConstraint {
public:
    explicit VelocityConstraint(std::string label) : label_(std::move(label)) {}
    virtual ~VelocityConstraint() = default;

    virtual int dimension() const = 0;
    virtual double value(const Vector& v) const = 0;
    virtual Vector gradient(const Vector& v) const = 0;
    virtual std::string family() const = 0;
    virtual nlohmann::json params() const = 0;

    const std::string& label() const { return label_; }

private:
    std::string label_;
};

/// eta(v) = l . v + e
class AffineVelocityConstraint final : public VelocityConstraint {
public:
    AffineVelocityConstraint(Vector l, double e, std::string label = "affine_velocity");

    int dimension() const override { return static_cast<int>(l_.size()); }
    double value(const Vector& v) const override;
    Vector gradient(const Vector& v) const override;
    std::string family() const override { return "affine_velocity"; }
    nlohmann::json params() const override;

    const Vector& direction() const { return l_; }
    double offset() const { return e_; }

private:
    Vector l_;
    double e_;
};

using PositionPtr = std::shared_ptr<const PositionConstraint>;
using VelocityPtr = std::shared_ptr<const VelocityConstraint>;

struct SafeSet {
    std::vector<PositionPtr> position;
    std::vector<VelocityPtr> velocity;

    bool contains(const Vector& q, const Vector& v, double tol = 0.0) const;
};

enum class BarrierKind { HighOrder, Direct };

class SingularBarrierError : public std::domain_error {
public:
    explicit SingularBarrierError(const std::string& what) : std::domain_error(what) {}
};

/// h(q, v) <= 0 is the barrier set. HighOrder: h = kappa_dot - sqrt(max(-c kappa, 0)),
/// Direct: h = eta(v). The class-K gain is alpha(s) = alpha_slope * s.
class Barrier {
public:
    static Barrier high_order(PositionPtr kappa, double c, double alpha_slope = 1.0,
                              std::string label = "");
    static Barrier direct(VelocityPtr eta, double alpha_slope = 1.0, std::string label = "");

    BarrierKind kind() const { return kind_; }
    double coefficient() const { return c_; }
    double alpha_slope() const { return alpha_slope_; }
    double alpha(double s) const { return alpha_slope_ * s; }
    const PositionPtr& position() const { return kappa_; }
    const VelocityPtr& velocity() const { return eta_; }
    const std::string& label() const { return label_; }

    Barrier with_coefficient(double c) const;

    nlohmann::json to_json() const;

private:
    Barrier() = default;

    BarrierKind kind_ = BarrierKind::Direct;
    PositionPtr kappa_;
    VelocityPtr eta_;
    double c_ = 0.0;
    double alpha_slope_ = 1.0;
    std::string label_;
};

inline constexpr double kSingularBand = 1e-9;

double kappa_dot(const Barrier& b, const SecondOrderSystem& sys, const Vector& q, const Vector& v);

double barrier_value(const Barrier& b, const SecondOrderSystem& sys, const Vector& q,
                     const Vector& v);

struct BarrierGradients {
    Vector dq;  ///< row gradient w.r.t. q, length n1
    Vector dv;  ///< row gradient w.r.t. v, length n2
};

/// Throws SingularBarrierError for HighOrder barriers with |kappa| < eps_sing,
/// where the square-root term is not differentiable. For kappa > 0 the clamped
/// form h = kappa_dot is differentiated.
BarrierGradients barrier_gradients(const Barrier& b, const SecondOrderSystem& sys, const Vector& q,
                                   const Vector& v, double eps_sing = kSingularBand);

/// A u <= b equivalent to hdot <= alpha(-h) at (q, v). Within the singular
/// band -kappa < eps_sing the square-root term is dropped, which at kappa = 0
/// leaves the boundary condition kappa_ddot <= alpha(-h).
CbfRow cbf_row(const Barrier& b, const SecondOrderSystem& sys, const Vector& q, const Vector& v,
               double eps_sing = kSingularBand);

std::vector<CbfRow> cbf_rows(std::span<const Barrier> barriers, const SecondOrderSystem& sys,
                             const Vector& q, const Vector& v);

/// Row direction A = (dh/dv) g2 only, which does not depend on c.
Vector input_direction(const Barrier& b, const SecondOrderSystem& sys, const Vector& q,
                       const Vector& v);

struct InterferenceReport {
    int trials = 0;
    double min_dot = 0.0;
    State worst;
    bool pass = false;
};

InterferenceReport noninterfering(const Barrier& b1, const Barrier& b2,
                                  const SecondOrderSystem& sys, const StateSampler& region,
                                  int trials, std::uint64_t seed, double tol_dot = 1e-10);

struct ScbfReport {
    int checked = 0;   ///< samples that fell into the barrier set
    int failures = 0;
    double worst_margin = 0.0;   ///< min of b - A u* over checked samples
    State worst;
    bool pass = false;
};

/// At every sampled state with h <= 0, tests u* = -c A' on the boundary of U'
/// (the best input of that form) against A u <= b.
ScbfReport scbf_check(const Barrier& b, const SecondOrderSystem& sys, const StateSampler& X,
                      const ControlSet& inner, int trials, std::uint64_t seed,
                      double tol = 1e-9);

/// Margin b - A u* of the SCBF test at one state.
double scbf_margin(const Barrier& b, const SecondOrderSystem& sys, const Vector& q,
                   const Vector& v, const ControlSet& inner);

/// Plain CBF test over `inner`: some u in inner satisfies A u <= b. Used when the
/// inner set only has the quadrant extension property.
ScbfReport cbf_check(const Barrier& b, const SecondOrderSystem& sys, const StateSampler& X,
                     const ControlSet& inner, int trials, std::uint64_t seed, double tol = 1e-9);

/// Margin b + support_inner(-A) of the plain CBF test at one state.
double cbf_margin(const Barrier& b, const SecondOrderSystem& sys, const Vector& q,
                  const Vector& v, const ControlSet& inner);

}  // namespace cbfcomp
