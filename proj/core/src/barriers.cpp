#include "cbfcomp/barriers.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cbfcomp {

namespace {

nlohmann::json to_json_array(const Vector& v)
{
    auto a = nlohmann::json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

nlohmann::json to_json_matrix(const Matrix& M)
{
    auto rows = nlohmann::json::array();
    for (int i = 0; i < M.rows(); ++i) rows.push_back(to_json_array(M.row(i).transpose()));
    return rows;
}

}  // namespace

HalfPlaneConstraint::HalfPlaneConstraint(Vector p, double d, std::string label)
    : PositionConstraint(std::move(label)), p_(std::move(p)), d_(d)
{
    if (p_.size() == 0 || !p_.allFinite() || p_.norm() == 0.0 || !std::isfinite(d_)) {
        throw std::invalid_argument("half_plane: normal must be finite and nonzero");
    }
}

double HalfPlaneConstraint::value(const Vector& q) const
{
    if (q.size() != p_.size()) throw DimensionError("half_plane: dimension mismatch");
    return p_.dot(q) + d_;
}

Vector HalfPlaneConstraint::gradient(const Vector&) const { return p_; }

Matrix HalfPlaneConstraint::hessian(const Vector&) const
{
    return Matrix::Zero(p_.size(), p_.size());
}

nlohmann::json HalfPlaneConstraint::params() const
{
    return {{"normal", to_json_array(p_)}, {"offset", d_}};
}

QuadraticFormConstraint::QuadraticFormConstraint(Matrix P, std::string label)
    : PositionConstraint(std::move(label)), P_(std::move(P))
{
    if (P_.rows() == 0 || P_.rows() != P_.cols() || !P_.allFinite()) {
        throw std::invalid_argument("quadratic: matrix must be square and finite");
    }
    if ((P_ - P_.transpose()).lpNorm<Eigen::Infinity>() > 1e-12 * (1.0 + P_.norm())) {
        throw std::invalid_argument("quadratic: matrix must be symmetric");
    }
    P_ = 0.5 * (P_ + P_.transpose()).eval();
}

double QuadraticFormConstraint::value(const Vector& q) const
{
    if (q.size() != P_.rows()) throw DimensionError("quadratic: dimension mismatch");
    return q.dot(P_ * q);
}

Vector QuadraticFormConstraint::gradient(const Vector& q) const { return 2.0 * (P_ * q); }
Matrix QuadraticFormConstraint::hessian(const Vector&) const { return 2.0 * P_; }

nlohmann::json QuadraticFormConstraint::params() const
{
    return {{"matrix", to_json_matrix(P_)}};
}

AffineVelocityConstraint::AffineVelocityConstraint(Vector l, double e, std::string label)
    : VelocityConstraint(std::move(label)), l_(std::move(l)), e_(e)
{
    if (l_.size() == 0 || !l_.allFinite() || !std::isfinite(e_)) {
        throw std::invalid_argument("affine_velocity: parameters must be finite");
    }
}

double AffineVelocityConstraint::value(const Vector& v) const
{
    if (v.size() != l_.size()) throw DimensionError("affine_velocity: dimension mismatch");
    return l_.dot(v) + e_;
}

Vector AffineVelocityConstraint::gradient(const Vector&) const { return l_; }

nlohmann::json AffineVelocityConstraint::params() const
{
    return {{"direction", to_json_array(l_)}, {"offset", e_}};
}

bool SafeSet::contains(const Vector& q, const Vector& v, double tol) const
{
    for (const auto& k : position) {
        if (k->value(q) > tol) return false;
    }
    for (const auto& e : velocity) {
        if (e->value(v) > tol) return false;
    }
    return true;
}

Barrier Barrier::high_order(PositionPtr kappa, double c, double alpha_slope, std::string label)
{
    if (!kappa) throw std::invalid_argument("high_order barrier needs a constraint");
    if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("barrier coefficient c must be positive");
    if (!(alpha_slope > 0.0)) throw std::invalid_argument("alpha slope must be positive");
    Barrier b;
    b.kind_ = BarrierKind::HighOrder;
    b.label_ = label.empty() ? "h_" + kappa->label() : std::move(label);
    b.kappa_ = std::move(kappa);
    b.c_ = c;
    b.alpha_slope_ = alpha_slope;
    return b;
}

Barrier Barrier::direct(VelocityPtr eta, double alpha_slope, std::string label)
{
    if (!eta) throw std::invalid_argument("direct barrier needs a constraint");
    if (!(alpha_slope > 0.0)) throw std::invalid_argument("alpha slope must be positive");
    Barrier b;
    b.kind_ = BarrierKind::Direct;
    b.label_ = label.empty() ? "h_" + eta->label() : std::move(label);
    b.eta_ = std::move(eta);
    b.alpha_slope_ = alpha_slope;
    return b;
}

Barrier Barrier::with_coefficient(double c) const
{
    if (kind_ != BarrierKind::HighOrder) throw std::logic_error("direct barriers have no coefficient");
    return high_order(kappa_, c, alpha_slope_, label_);
}

nlohmann::json Barrier::to_json() const
{
    nlohmann::json j;
    j["label"] = label_;
    j["alpha_slope"] = alpha_slope_;
    if (kind_ == BarrierKind::HighOrder) {
        j["kind"] = "high_order";
        j["c"] = c_;
        j["constraint"] = {{"family", kappa_->family()}, {"label", kappa_->label()},
                           {"params", kappa_->params()}};
    } else {
        j["kind"] = "direct";
        j["constraint"] = {{"family", eta_->family()}, {"label", eta_->label()},
                           {"params", eta_->params()}};
    }
    return j;
}

double kappa_dot(const Barrier& b, const SecondOrderSystem& sys, const Vector& q, const Vector& v)
{
    if (b.kind() != BarrierKind::HighOrder) return 0.0;
    return b.position()->gradient(q).dot(sys.g1(q) * v);
}

double barrier_value(const Barrier& b, const SecondOrderSystem& sys, const Vector& q,
                     const Vector& v)
{
    sys.require_state(q, v, "barrier_value");
    if (b.kind() == BarrierKind::Direct) return b.velocity()->value(v);
    const double k = b.position()->value(q);
    return kappa_dot(b, sys, q, v) - std::sqrt(std::max(-b.coefficient() * k, 0.0));
}

namespace {

// Gradient of kappa_dot = grad(kappa) g1(q) v with respect to q.
Vector grad_q_kappa_dot(const PositionConstraint& kappa, const SecondOrderSystem& sys,
                        const Vector& q, const Vector& v)
{
    const Vector gk = kappa.gradient(q);
    Vector out = kappa.hessian(q) * (sys.g1(q) * v);
    Vector e = Vector::Zero(sys.n1());
    for (int i = 0; i < sys.n1(); ++i) {
        e[i] = 1.0;
        out[i] += gk.dot(sys.dir_deriv_g1(q, v, e));
        e[i] = 0.0;
    }
    return out;
}

}  // namespace

BarrierGradients barrier_gradients(const Barrier& b, const SecondOrderSystem& sys, const Vector& q,
                                   const Vector& v, double eps_sing)
{
    sys.require_state(q, v, "barrier_gradients");
    if (b.kind() == BarrierKind::Direct) {
        return {Vector::Zero(sys.n1()), b.velocity()->gradient(v)};
    }
    const auto& kappa = *b.position();
    const double k = kappa.value(q);
    if (std::abs(k) < eps_sing) {
        throw SingularBarrierError("barrier_gradients: '" + b.label() +
                                   "' is not differentiable at kappa = 0");
    }
    BarrierGradients g;
    g.dv = sys.g1(q).transpose() * kappa.gradient(q);
    g.dq = grad_q_kappa_dot(kappa, sys, q, v);
    if (k < 0.0) {
        const double c = b.coefficient();
        g.dq += (c / (2.0 * std::sqrt(-c * k))) * kappa.gradient(q);
    }
    return g;
}

Vector input_direction(const Barrier& b, const SecondOrderSystem& sys, const Vector& q,
                       const Vector& v)
{
    if (b.kind() == BarrierKind::Direct) return sys.g2(q).transpose() * b.velocity()->gradient(v);
    const Vector dv = sys.g1(q).transpose() * b.position()->gradient(q);
    return sys.g2(q).transpose() * dv;
}

CbfRow cbf_row(const Barrier& b, const SecondOrderSystem& sys, const Vector& q, const Vector& v,
               double eps_sing)
{
    sys.require_state(q, v, "cbf_row");
    const double h = barrier_value(b, sys, q, v);
    CbfRow row;
    row.alpha_term = b.alpha(-h) + 0.0;
    const Vector f = sys.f(q, v);

    if (b.kind() == BarrierKind::Direct) {
        const Vector ge = b.velocity()->gradient(v);
        row.A = sys.g2(q).transpose() * ge;
        row.b = row.alpha_term - ge.dot(f);
        return row;
    }

    const auto& kappa = *b.position();
    const double k = kappa.value(q);
    const Matrix g1 = sys.g1(q);
    const Vector qdot = g1 * v;
    const Vector dv = g1.transpose() * kappa.gradient(q);
    row.A = sys.g2(q).transpose() * dv;

    double drift = grad_q_kappa_dot(kappa, sys, q, v).dot(qdot) + dv.dot(f);
    if (-k >= eps_sing) {
        const double c = b.coefficient();
        drift += c * kappa.gradient(q).dot(qdot) / (2.0 * std::sqrt(-c * k));
    }
    row.b = row.alpha_term - drift;
    return row;
}

std::vector<CbfRow> cbf_rows(std::span<const Barrier> barriers, const SecondOrderSystem& sys,
                             const Vector& q, const Vector& v)
{
    std::vector<CbfRow> rows;
    rows.reserve(barriers.size());
    for (const auto& b : barriers) rows.push_back(cbf_row(b, sys, q, v));
    return rows;
}

InterferenceReport noninterfering(const Barrier& b1, const Barrier& b2,
                                  const SecondOrderSystem& sys, const StateSampler& region,
                                  int trials, std::uint64_t seed, double tol_dot)
{
    InterferenceReport r;
    r.trials = trials;
    r.min_dot = std::numeric_limits<double>::infinity();
    for (int t = 0; t < trials; ++t) {
        Rng rng = stream_rng(seed, static_cast<std::uint64_t>(t));
        State s = region(rng);
        const double d = input_direction(b1, sys, s.q, s.v).dot(input_direction(b2, sys, s.q, s.v));
        if (d < r.min_dot) {
            r.min_dot = d;
            r.worst = std::move(s);
        }
    }
    if (trials == 0) r.min_dot = 0.0;
    r.pass = r.min_dot >= -tol_dot;
    return r;
}

double scbf_margin(const Barrier& b, const SecondOrderSystem& sys, const Vector& q,
                   const Vector& v, const ControlSet& inner)
{
    const CbfRow row = cbf_row(b, sys, q, v);
    const double n = row.A.norm();
    if (n == 0.0) return row.b;
    const Vector dir = -row.A / n;
    const Vector u = inner.radial_extent(dir) * dir;
    return row.b - row.A.dot(u);
}

namespace {

template <class Margin>
ScbfReport sampled_check(const Barrier& b, const SecondOrderSystem& sys, const StateSampler& X,
                         int trials, std::uint64_t seed, double tol, Margin margin)
{
    ScbfReport r;
    r.worst_margin = std::numeric_limits<double>::infinity();
    for (int t = 0; t < trials; ++t) {
        Rng rng = stream_rng(seed, static_cast<std::uint64_t>(t));
        State s = X(rng);
        if (barrier_value(b, sys, s.q, s.v) > 0.0) continue;
        ++r.checked;
        const double m = margin(s);
        if (m < -tol) ++r.failures;
        if (m < r.worst_margin) {
            r.worst_margin = m;
            r.worst = std::move(s);
        }
    }
    if (r.checked == 0) r.worst_margin = 0.0;
    r.pass = r.failures == 0;
    return r;
}

}  // namespace

ScbfReport scbf_check(const Barrier& b, const SecondOrderSystem& sys, const StateSampler& X,
                      const ControlSet& inner, int trials, std::uint64_t seed, double tol)
{
    return sampled_check(b, sys, X, trials, seed, tol,
                         [&](const State& s) { return scbf_margin(b, sys, s.q, s.v, inner); });
}

double cbf_margin(const Barrier& b, const SecondOrderSystem& sys, const Vector& q,
                  const Vector& v, const ControlSet& inner)
{
    const CbfRow row = cbf_row(b, sys, q, v);
    return row.b + inner.support(-row.A);
}

ScbfReport cbf_check(const Barrier& b, const SecondOrderSystem& sys, const StateSampler& X,
                     const ControlSet& inner, int trials, std::uint64_t seed, double tol)
{
    return sampled_check(b, sys, X, trials, seed, tol,
                         [&](const State& s) { return cbf_margin(b, sys, s.q, s.v, inner); });
}

}  // namespace cbfcomp
