#include "cbfcomp/feasibility.hpp"

#include <algorithm>
#include <cmath>

#include "cbfcomp/dense_solvers.hpp"

namespace cbfcomp {

namespace {

double rhs_of(const CbfRow& r, RhsMode mode) { return mode == RhsMode::Nagumo ? r.nagumo_rhs() : r.b; }

void stack_rows(std::span<const CbfRow> rows, RhsMode mode, int m, Matrix& G, Vector& h)
{
    G.resize(static_cast<int>(rows.size()), m);
    h.resize(static_cast<int>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (rows[k].A.size() != m) throw DimensionError("lp_feasible: row dimension mismatch");
        G.row(static_cast<int>(k)) = rows[k].A.transpose();
        h[static_cast<int>(k)] = rhs_of(rows[k], mode);
    }
}

// Minimum-norm point of {G u <= h}, or nullopt.
std::optional<Vector> min_norm_point(const Matrix& G, const Vector& h, int m, double tol)
{
    const auto r = dense::solve_qp(2.0 * Matrix::Identity(m, m), Vector::Zero(m), G, h,
                                   std::nullopt, tol);
    if (r.status == dense::QpStatus::Infeasible) return std::nullopt;
    return r.x;
}

}  // namespace

std::optional<Vector> lp_feasible(std::span<const CbfRow> rows, const ControlSet& U, RhsMode mode,
                                  double tol)
{
    const int m = U.dimension();
    Matrix Gr;
    Vector hr;
    stack_rows(rows, mode, m, Gr, hr);

    if (!U.is_polyhedral()) {
        if (rows.empty()) return Vector::Zero(m);
        auto u = min_norm_point(Gr, hr, m, 1e-12);
        if (!u) return std::nullopt;
        if (u->norm() > U.gamma() + tol) return std::nullopt;
        return u;
    }

    Matrix Gu;
    Vector hu;
    U.halfspaces(Gu, hu);
    Matrix G(Gu.rows() + Gr.rows(), m);
    Vector h(hu.size() + hr.size());
    G << Gu, Gr;
    h << hu, hr;
    return dense::find_feasible_point(G, h, tol);
}

namespace {

struct Reduced {
    std::vector<int> soft;  ///< rows whose alpha_term > 0 carry a free delta_k
    std::vector<int> hard;
};

Reduced classify(const std::vector<CbfRow>& rows)
{
    Reduced r;
    for (int k = 0; k < static_cast<int>(rows.size()); ++k) {
        (rows[static_cast<std::size_t>(k)].alpha_term > 0.0 ? r.soft : r.hard).push_back(k);
    }
    return r;
}

struct Assembled {
    Matrix H;
    Vector c;
    Matrix G;
    Vector h;
};

// Variables x = (u, delta_soft). `ball_mu` adds mu |u|^2 for the 2-ball dual.
Assembled assemble(const QpProblem& p, const Vector& J, const Reduced& red, double ball_mu,
                   bool include_U)
{
    const int m = static_cast<int>(p.u_nom.size());
    const int s = static_cast<int>(red.soft.size());
    const int n = m + s;
    Assembled a;
    a.H = Matrix::Zero(n, n);
    a.H.topLeftCorner(m, m) = 2.0 * (1.0 + ball_mu) * Matrix::Identity(m, m);
    a.c = Vector::Zero(n);
    a.c.head(m) = -2.0 * p.u_nom;
    for (int i = 0; i < s; ++i) a.c[m + i] = J[red.soft[static_cast<std::size_t>(i)]];

    Matrix Gu;
    Vector hu;
    if (include_U) p.U.halfspaces(Gu, hu);
    const int nu = include_U ? static_cast<int>(Gu.rows()) : 0;
    const int nrows = nu + 2 * s + static_cast<int>(red.hard.size());
    a.G = Matrix::Zero(nrows, n);
    a.h = Vector::Zero(nrows);
    int r = 0;
    for (int i = 0; i < nu; ++i, ++r) {
        a.G.block(r, 0, 1, m) = Gu.row(i);
        a.h[r] = hu[i];
    }
    for (int i = 0; i < s; ++i) {
        const CbfRow& row = p.rows[static_cast<std::size_t>(red.soft[static_cast<std::size_t>(i)])];
        a.G.block(r, 0, 1, m) = row.A.transpose();
        a.G(r, m + i) = -row.alpha_term;
        a.h[r++] = row.nagumo_rhs();
        a.G(r, m + i) = -1.0;
        a.h[r++] = -1.0;
    }
    for (int k : red.hard) {
        const CbfRow& row = p.rows[static_cast<std::size_t>(k)];
        a.G.block(r, 0, 1, m) = row.A.transpose();
        a.h[r++] = row.b;
    }
    return a;
}

Vector initial_point(const QpProblem& p, const Reduced& red, const Vector& u0)
{
    const int m = static_cast<int>(u0.size());
    Vector x(m + static_cast<int>(red.soft.size()));
    x.head(m) = u0;
    for (std::size_t i = 0; i < red.soft.size(); ++i) {
        const CbfRow& row = p.rows[static_cast<std::size_t>(red.soft[i])];
        x[m + static_cast<int>(i)] =
            std::max(1.0, (row.A.dot(u0) - row.nagumo_rhs()) / row.alpha_term) * (1.0 + 1e-12);
    }
    return x;
}

QpSolution finish(const QpProblem& p, const Vector& J, const Reduced& red, const Vector& x,
                  int iterations)
{
    const int m = static_cast<int>(p.u_nom.size());
    QpSolution s;
    s.status = QpStatus::Optimal;
    s.u = x.head(m);
    s.delta = Vector::Ones(static_cast<int>(p.rows.size()));
    for (std::size_t i = 0; i < red.soft.size(); ++i) {
        s.delta[red.soft[i]] = std::max(1.0, x[m + static_cast<int>(i)]);
    }
    s.objective = (s.u - p.u_nom).squaredNorm() + J.dot(s.delta);
    s.iterations = iterations;
    return s;
}

}  // namespace

QpSolution solve_safety_qp(const QpProblem& p)
{
    const int m = p.U.dimension();
    if (p.u_nom.size() != m) throw DimensionError("solve_safety_qp: u_nom dimension mismatch");
    const int M = static_cast<int>(p.rows.size());
    Vector J = p.slack_weights.size() == 0 ? Vector::Constant(M, kDefaultSlackWeight)
                                           : p.slack_weights;
    if (J.size() != M) throw DimensionError("solve_safety_qp: slack weight count mismatch");
    if (M > 0 && J.minCoeff() <= 0.0) throw std::invalid_argument("slack weights must be positive");

    const Reduced red = classify(p.rows);
    std::vector<CbfRow> hard_rows;
    for (int k : red.hard) hard_rows.push_back(p.rows[static_cast<std::size_t>(k)]);
    const auto u0 = lp_feasible(hard_rows, p.U);
    if (!u0) {
        QpSolution s;
        s.delta = Vector::Ones(M);
        return s;
    }

    if (p.U.is_polyhedral()) {
        const Assembled a = assemble(p, J, red, 0.0, true);
        const auto r = dense::solve_qp(a.H, a.c, a.G, a.h, initial_point(p, red, *u0));
        if (r.status == dense::QpStatus::Infeasible) {
            QpSolution s;
            s.delta = Vector::Ones(M);
            return s;
        }
        return finish(p, J, red, r.x, r.iterations);
    }

    // 2-ball: the norm of the minimizer of the mu-penalized problem is
    // nonincreasing in mu, so bisect the multiplier of |u|^2 <= gamma^2.
    const double radius = p.U.gamma();
    int iterations = 0;
    auto solve_mu = [&](double mu) {
        const Assembled a = assemble(p, J, red, mu, false);
        const auto r = dense::solve_qp(a.H, a.c, a.G, a.h, initial_point(p, red, *u0));
        iterations += r.iterations;
        return r.x;
    };
    Vector x = solve_mu(0.0);
    if (x.head(m).norm() <= radius * (1.0 + 1e-12)) return finish(p, J, red, x, iterations);

    double lo = 0.0;
    double hi = 1.0;
    Vector x_hi = solve_mu(hi);
    for (int i = 0; i < 200 && x_hi.head(m).norm() > radius * (1.0 + 1e-12); ++i) {
        lo = hi;
        hi *= 4.0;
        x_hi = solve_mu(hi);
    }
    for (int i = 0; i < 100 && hi - lo > 1e-13 * (1.0 + hi); ++i) {
        const double mid = 0.5 * (lo + hi);
        Vector xm = solve_mu(mid);
        if (xm.head(m).norm() > radius) {
            lo = mid;
        } else {
            hi = mid;
            x_hi = std::move(xm);
        }
    }
    if (x_hi.head(m).norm() > radius) x_hi.head(m) *= radius / x_hi.head(m).norm();
    return finish(p, J, red, x_hi, iterations);
}

std::vector<int> active_set(std::span<const Barrier> barriers, const SecondOrderSystem& sys,
                            const Vector& q, const Vector& v, double eps_active)
{
    if (!(eps_active > 0.0)) throw std::invalid_argument("eps_active must be positive");
    std::vector<int> out;
    for (int k = 0; k < static_cast<int>(barriers.size()); ++k) {
        if (std::abs(barrier_value(barriers[static_cast<std::size_t>(k)], sys, q, v)) <= eps_active) {
            out.push_back(k);
        }
    }
    return out;
}

}  // namespace cbfcomp
