#include "cbfcomp/control_set.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cbfcomp/dense_solvers.hpp"
#include "cbfcomp/feasibility.hpp"

namespace cbfcomp {

std::string to_string(SetKind kind)
{
    switch (kind) {
    case SetKind::InfBall: return "inf_ball";
    case SetKind::OneBall: return "one_ball";
    case SetKind::TwoBall: return "two_ball";
    case SetKind::WeightedInfBall: return "weighted_inf_ball";
    case SetKind::WeightedOneBall: return "weighted_one_ball";
    case SetKind::Polytope: return "polytope";
    }
    return "unknown";
}

std::string to_string(ExtensionKind kind)
{
    return kind == ExtensionKind::OEP ? "OEP" : "QEP";
}

namespace {

void require_gamma(double gamma)
{
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw ControlSetError("control set radius must be positive and finite");
    }
}

void require_weights(const Vector& a)
{
    if (a.size() == 0) throw ControlSetError("weights must be nonempty");
    for (int i = 0; i < a.size(); ++i) {
        if (a[i] == 0.0 || !std::isfinite(a[i])) {
            throw ControlSetError("weights must be nonzero and finite");
        }
    }
}

}  // namespace

ControlSet ControlSet::inf_ball(int dim, double gamma)
{
    if (dim <= 0) throw ControlSetError("dimension must be positive");
    require_gamma(gamma);
    ControlSet s;
    s.kind_ = SetKind::InfBall;
    s.dim_ = dim;
    s.gamma_ = gamma;
    s.weights_ = Vector::Ones(dim);
    return s;
}

ControlSet ControlSet::one_ball(int dim, double gamma)
{
    ControlSet s = inf_ball(dim, gamma);
    s.kind_ = SetKind::OneBall;
    return s;
}

ControlSet ControlSet::two_ball(int dim, double gamma)
{
    ControlSet s = inf_ball(dim, gamma);
    s.kind_ = SetKind::TwoBall;
    return s;
}

ControlSet ControlSet::weighted_inf_ball(Vector weights, double gamma)
{
    require_weights(weights);
    require_gamma(gamma);
    ControlSet s;
    s.kind_ = SetKind::WeightedInfBall;
    s.dim_ = static_cast<int>(weights.size());
    s.gamma_ = gamma;
    s.weights_ = weights.cwiseAbs();
    return s;
}

ControlSet ControlSet::weighted_one_ball(Vector weights, double gamma)
{
    ControlSet s = weighted_inf_ball(std::move(weights), gamma);
    s.kind_ = SetKind::WeightedOneBall;
    return s;
}

ControlSet ControlSet::polytope(Matrix rows, Vector offsets)
{
    if (rows.rows() == 0 || rows.cols() == 0) throw ControlSetError("polytope needs rows");
    if (rows.rows() != offsets.size()) throw ControlSetError("polytope rows/offsets mismatch");
    if (!rows.allFinite() || !offsets.allFinite()) throw ControlSetError("polytope not finite");
    if (offsets.minCoeff() < 0.0) throw ControlSetError("polytope must contain the origin");
    ControlSet s;
    s.kind_ = SetKind::Polytope;
    s.dim_ = static_cast<int>(rows.cols());
    s.gamma_ = 1.0;
    s.rows_ = std::move(rows);
    s.offsets_ = std::move(offsets);
    // Boundedness: every axis direction must have finite support.
    for (int i = 0; i < s.dim_; ++i) {
        for (double sg : {1.0, -1.0}) {
            Vector d = Vector::Zero(s.dim_);
            d[i] = -sg;
            const auto r = dense::solve_lp(d, s.rows_, s.offsets_);
            if (r.status != dense::LpStatus::Optimal) throw ControlSetError("polytope unbounded");
        }
    }
    return s;
}

void ControlSet::require_dim(const Vector& u, const char* context) const
{
    if (u.size() != dim_) {
        throw DimensionError(std::string(context) + ": expected dimension " +
                             std::to_string(dim_) + ", got " + std::to_string(u.size()));
    }
}

double ControlSet::gauge(const Vector& u) const
{
    require_dim(u, "ControlSet::gauge");
    switch (kind_) {
    case SetKind::InfBall: return u.lpNorm<Eigen::Infinity>() / gamma_;
    case SetKind::OneBall: return u.lpNorm<1>() / gamma_;
    case SetKind::TwoBall: return u.norm() / gamma_;
    case SetKind::WeightedInfBall:
        return weights_.cwiseProduct(u).lpNorm<Eigen::Infinity>() / gamma_;
    case SetKind::WeightedOneBall: return weights_.cwiseProduct(u).lpNorm<1>() / gamma_;
    case SetKind::Polytope: {
        double g = 0.0;
        for (int i = 0; i < rows_.rows(); ++i) {
            const double a = rows_.row(i).dot(u);
            if (a <= 0.0) continue;
            if (offsets_[i] <= 0.0) return std::numeric_limits<double>::infinity();
            g = std::max(g, a / offsets_[i]);
        }
        return g;
    }
    }
    return 0.0;
}

bool ControlSet::contains(const Vector& u, double tol) const
{
    require_dim(u, "ControlSet::contains");
    if (kind_ == SetKind::Polytope) return (rows_ * u - offsets_).maxCoeff() <= tol;
    return gauge(u) * gamma_ <= gamma_ + tol;
}

double ControlSet::support(const Vector& d) const
{
    require_dim(d, "ControlSet::support");
    switch (kind_) {
    case SetKind::InfBall: return gamma_ * d.lpNorm<1>();
    case SetKind::OneBall: return gamma_ * d.lpNorm<Eigen::Infinity>();
    case SetKind::TwoBall: return gamma_ * d.norm();
    case SetKind::WeightedInfBall: return gamma_ * d.cwiseQuotient(weights_).lpNorm<1>();
    case SetKind::WeightedOneBall:
        return gamma_ * d.cwiseQuotient(weights_).lpNorm<Eigen::Infinity>();
    case SetKind::Polytope: return d.dot(support_point(d));
    }
    return 0.0;
}

Vector ControlSet::support_point(const Vector& d) const
{
    require_dim(d, "ControlSet::support_point");
    Vector p = Vector::Zero(dim_);
    switch (kind_) {
    case SetKind::InfBall:
    case SetKind::WeightedInfBall:
        for (int i = 0; i < dim_; ++i) {
            p[i] = (d[i] >= 0.0 ? 1.0 : -1.0) * gamma_ / weights_[i];
        }
        return p;
    case SetKind::OneBall:
    case SetKind::WeightedOneBall: {
        int best = 0;
        for (int i = 1; i < dim_; ++i) {
            if (std::abs(d[i]) / weights_[i] > std::abs(d[best]) / weights_[best]) best = i;
        }
        p[best] = (d[best] >= 0.0 ? 1.0 : -1.0) * gamma_ / weights_[best];
        return p;
    }
    case SetKind::TwoBall: {
        const double n = d.norm();
        if (n > 0.0) p = gamma_ * d / n;
        return p;
    }
    case SetKind::Polytope: {
        const auto r = dense::solve_lp(-d, rows_, offsets_);
        return r.x;
    }
    }
    return p;
}

double ControlSet::radial_extent(const Vector& direction) const
{
    const double g = gauge(direction);
    if (g <= 0.0) return std::numeric_limits<double>::infinity();
    return 1.0 / g;
}

void ControlSet::halfspaces(Matrix& G, Vector& h) const
{
    switch (kind_) {
    case SetKind::InfBall:
    case SetKind::WeightedInfBall:
        G = Matrix::Zero(2 * dim_, dim_);
        h = Vector::Constant(2 * dim_, gamma_);
        for (int i = 0; i < dim_; ++i) {
            G(2 * i, i) = weights_[i];
            G(2 * i + 1, i) = -weights_[i];
        }
        return;
    case SetKind::OneBall:
    case SetKind::WeightedOneBall: {
        const int n = 1 << dim_;
        G.resize(n, dim_);
        h = Vector::Constant(n, gamma_);
        for (int s = 0; s < n; ++s) {
            for (int i = 0; i < dim_; ++i) {
                G(s, i) = ((s >> i) & 1 ? -1.0 : 1.0) * weights_[i];
            }
        }
        return;
    }
    case SetKind::Polytope:
        G = rows_;
        h = offsets_;
        return;
    case SetKind::TwoBall: break;
    }
    throw ControlSetError("two_ball has no finite half-space description");
}

Vector ControlSet::sample_interior(Rng& rng) const
{
    Vector lo(dim_), hi(dim_);
    for (int i = 0; i < dim_; ++i) {
        Vector e = Vector::Zero(dim_);
        e[i] = 1.0;
        hi[i] = support(e);
        lo[i] = -support(-e);
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (;;) {
        Vector u(dim_);
        for (int i = 0; i < dim_; ++i) u[i] = lo[i] + (hi[i] - lo[i]) * unit(rng);
        if (contains(u, 0.0)) return u;
    }
}

Vector ControlSet::sample_boundary(Rng& rng) const
{
    const Vector d = random_unit_vector(rng, dim_);
    return radial_extent(d) * d;
}

ControlSet ControlSet::scaled(double factor) const
{
    require_gamma(factor);
    ControlSet s = *this;
    if (kind_ == SetKind::Polytope) {
        s.offsets_ *= factor;
    } else {
        s.gamma_ *= factor;
    }
    return s;
}

std::string ControlSet::describe() const
{
    std::ostringstream os;
    os << to_string(kind_) << "(m=" << dim_;
    if (kind_ == SetKind::Polytope) {
        os << ", rows=" << rows_.rows() << ")";
        return os.str();
    }
    os << ", gamma=" << gamma_;
    if (kind_ == SetKind::WeightedInfBall || kind_ == SetKind::WeightedOneBall) {
        os << ", a=[";
        for (int i = 0; i < dim_; ++i) os << (i ? "," : "") << weights_[i];
        os << "]";
    }
    os << ")";
    return os.str();
}

// ---------------------------------------------------------------------------
// inner sets

ControlSet gamma_star_candidate(const ControlSet& outer, double s)
{
    const int m = outer.dimension();
    switch (outer.kind()) {
    case SetKind::InfBall: return ControlSet::one_ball(m, s);
    case SetKind::WeightedInfBall: return ControlSet::weighted_one_ball(outer.weights(), s);
    case SetKind::OneBall: return ControlSet::inf_ball(m, s / m);
    case SetKind::TwoBall: return ControlSet::two_ball(m, s);
    default: break;
    }
    throw ControlSetError("no inner-set family for " + to_string(outer.kind()));
}

namespace {

// Worst outer gauge of the intersection point of the hyperplanes with unit
// normals `cols of Q`, each touching `inner` at an extreme offset.
double worst_corner_gauge(const Matrix& Q, const ControlSet& inner, const ControlSet& outer)
{
    const int m = static_cast<int>(Q.cols());
    std::vector<double> sup_pos(static_cast<std::size_t>(m)), sup_neg(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        sup_pos[static_cast<std::size_t>(i)] = inner.support(Q.col(i));
        sup_neg[static_cast<std::size_t>(i)] = -inner.support(-Q.col(i));
    }
    double worst = 0.0;
    for (int pattern = 0; pattern < (1 << m); ++pattern) {
        Vector p = Vector::Zero(m);
        for (int i = 0; i < m; ++i) {
            const double t = (pattern >> i) & 1 ? sup_neg[static_cast<std::size_t>(i)]
                                                : sup_pos[static_cast<std::size_t>(i)];
            p += t * Q.col(i);
        }
        worst = std::max(worst, outer.gauge(p));
    }
    return worst;
}

Matrix perturb_orthogonal(const Matrix& Q, double step, Rng& rng)
{
    const int m = static_cast<int>(Q.rows());
    Matrix S(m, m);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) S(i, j) = n(rng);
    }
    S = (0.5 * step * (S - S.transpose())).eval();
    // Cayley transform keeps the result exactly orthogonal.
    const Matrix I = Matrix::Identity(m, m);
    const Matrix C = (I - S).partialPivLu().solve(I + S);
    return Q * C;
}

}  // namespace

double compute_gamma_star(const ControlSet& outer, int samples, std::uint64_t seed)
{
    const int m = outer.dimension();
    const ControlSet unit = gamma_star_candidate(outer, 1.0);
    samples = std::max(samples, 1);

    struct Scored {
        double value;
        int index;
        Matrix Q;
    };
    std::vector<Scored> top;
    constexpr std::size_t kKeep = 8;
    double worst = 0.0;
    for (int t = 0; t < samples; ++t) {
        Rng rng = stream_rng(seed, static_cast<std::uint64_t>(t));
        Matrix Q = random_orthogonal(rng, m);
        const double g = worst_corner_gauge(Q, unit, outer);
        worst = std::max(worst, g);
        if (top.size() < kKeep || g > top.back().value) {
            top.push_back({g, t, std::move(Q)});
            std::sort(top.begin(), top.end(),
                      [](const Scored& a, const Scored& b) { return a.value > b.value; });
            if (top.size() > kKeep) top.pop_back();
        }
    }
    // axis-aligned configuration
    {
        const double g = worst_corner_gauge(Matrix::Identity(m, m), unit, outer);
        worst = std::max(worst, g);
    }

    for (const auto& start : top) {
        Rng rng = stream_rng(seed ^ 0xa5a5a5a5ULL, static_cast<std::uint64_t>(start.index));
        Matrix Q = start.Q;
        double g = start.value;
        double step = 0.2;
        while (step > 1e-7) {
            bool improved = false;
            for (int k = 0; k < 12; ++k) {
                Matrix cand = perturb_orthogonal(Q, step, rng);
                const double gc = worst_corner_gauge(cand, unit, outer);
                if (gc > g) {
                    g = gc;
                    Q = std::move(cand);
                    improved = true;
                }
            }
            if (!improved) step *= 0.5;
        }
        worst = std::max(worst, g);
    }
    return std::min(outer.gamma(), 1.0 / worst);
}

ControlSet inner_qep_set(const ControlSet& outer, int gamma_star_samples)
{
    const int m = outer.dimension();
    switch (outer.kind()) {
    case SetKind::InfBall:
        if (m == 2) return ControlSet::one_ball(m, 2.0 * outer.gamma() / (1.0 + std::sqrt(2.0)));
        return gamma_star_candidate(outer, compute_gamma_star(outer, gamma_star_samples));
    case SetKind::TwoBall: return ControlSet::two_ball(m, outer.gamma() / std::sqrt(double(m)));
    case SetKind::OneBall:
    case SetKind::WeightedInfBall:
        return gamma_star_candidate(outer, compute_gamma_star(outer, gamma_star_samples));
    default: break;
    }
    throw ControlSetError("no quadrant-extension inner set for " + to_string(outer.kind()));
}

ControlSet closed_form_oep_set(const ControlSet& outer)
{
    const int m = outer.dimension();
    switch (outer.kind()) {
    case SetKind::InfBall: return ControlSet::one_ball(m, outer.gamma());
    case SetKind::OneBall: return ControlSet::inf_ball(m, outer.gamma() / m);
    case SetKind::TwoBall: return ControlSet::two_ball(m, outer.gamma() / std::sqrt(double(m)));
    default: break;
    }
    throw ControlSetError("no closed-form orthogonal-extension set for " + to_string(outer.kind()));
}

ControlSet inner_oep_set(const ControlSet& outer, int gamma_star_samples)
{
    const int m = outer.dimension();
    switch (outer.kind()) {
    case SetKind::InfBall:
    case SetKind::OneBall:
        if (m <= 2) return closed_form_oep_set(outer);
        // the closed forms lose the property for m >= 3; a QEP set has it
        return inner_qep_set(outer, gamma_star_samples);
    case SetKind::TwoBall: return closed_form_oep_set(outer);
    case SetKind::WeightedInfBall: return inner_qep_set(outer, gamma_star_samples);
    default: break;
    }
    throw ControlSetError("no orthogonal-extension inner set for " + to_string(outer.kind()));
}

// ---------------------------------------------------------------------------
// witnesses

Vector oep_witness(std::span<const Vector> vectors, double dot_tol)
{
    if (vectors.empty()) throw WitnessError("oep_witness needs at least one vector");
    for (const auto& v : vectors) require_same_dimension(v, vectors.front(), "oep_witness");
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        for (std::size_t j = i + 1; j < vectors.size(); ++j) {
            const double scale = std::max(1.0, vectors[i].norm() * vectors[j].norm());
            if (vectors[i].dot(vectors[j]) < -dot_tol * scale) {
                throw WitnessError("oep_witness: inputs " + std::to_string(i) + " and " +
                                   std::to_string(j) + " have a negative dot product");
            }
        }
    }
    std::vector<Vector> sorted(vectors.begin(), vectors.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const Vector& a, const Vector& b) { return a.norm() > b.norm(); });

    Vector z = Vector::Zero(sorted.front().size());
    std::vector<Vector> previous;
    for (const auto& w : sorted) {
        z += gram_schmidt_residual(w, previous);
        previous.push_back(w);
    }
    return z;
}

std::optional<Vector> joint_witness(std::span<const CbfRow> rows, const ControlSet& U)
{
    return lp_feasible(rows, U);
}

ExtensionReport verify_extension_property(const ControlSet& inner, const ControlSet& outer,
                                          ExtensionKind kind, int trials,
                                          std::uint64_t rng_seed)
{
    if (inner.dimension() != outer.dimension()) {
        throw DimensionError("verify_extension_property: dimension mismatch");
    }
    const int m = inner.dimension();
    ExtensionReport report;
    report.trials = trials;
    report.worst_margin = std::numeric_limits<double>::infinity();
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    for (int t = 0; t < trials; ++t) {
        Rng rng = stream_rng(rng_seed, static_cast<std::uint64_t>(t));
        Vector point;
        std::vector<Vector> inputs;
        if (kind == ExtensionKind::OEP) {
            std::uniform_int_distribution<int> count(1, m);
            const int k = count(rng);
            while (static_cast<int>(inputs.size()) < k) {
                Vector w = unit(rng) < 0.7 ? inner.sample_boundary(rng) : inner.sample_interior(rng);
                bool ok = true;
                for (const auto& prev : inputs) ok = ok && prev.dot(w) >= 0.0;
                if (ok) inputs.push_back(std::move(w));
            }
            point = oep_witness(inputs);
        } else {
            const Matrix Q = random_orthogonal(rng, m);
            point = Vector::Zero(m);
            for (int i = 0; i < m; ++i) {
                Vector x = unit(rng) < 0.7 ? inner.sample_boundary(rng) : inner.sample_interior(rng);
                // Push the touching point out to an extreme offset half the time.
                if (unit(rng) < 0.5) {
                    const double sg = Q.col(i).dot(x) >= 0.0 ? 1.0 : -1.0;
                    x = inner.support_point(sg * Q.col(i));
                }
                point += Q.col(i).dot(x) * Q.col(i);
                inputs.push_back(x);
            }
        }
        const double margin = 1.0 - outer.gauge(point);
        if (!outer.contains(point)) ++report.violations;
        if (margin < report.worst_margin) {
            report.worst_margin = margin;
            report.worst_point = point;
            report.worst_inputs = inputs;
        }
    }
    if (trials == 0) report.worst_margin = 0.0;
    return report;
}

}  // namespace cbfcomp
