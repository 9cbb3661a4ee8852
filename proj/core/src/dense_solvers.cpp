#include "cbfcomp/dense_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace cbfcomp::dense {

namespace {

constexpr double kPivotTol = 1e-11;

struct NormalizedRows {
    Matrix G;
    Vector h;
    std::vector<int> source;  // original row index of each kept row
    bool trivially_infeasible = false;
};

NormalizedRows normalize_rows(const Matrix& G, const Vector& h, double tol)
{
    NormalizedRows out;
    const int n = static_cast<int>(G.cols());
    std::vector<int> keep;
    std::vector<double> scale;
    for (int i = 0; i < G.rows(); ++i) {
        const double s = G.row(i).lpNorm<Eigen::Infinity>();
        if (s < 1e-14) {
            if (h[i] < -tol) out.trivially_infeasible = true;
            continue;
        }
        keep.push_back(i);
        scale.push_back(s);
    }
    out.G.resize(static_cast<int>(keep.size()), n);
    out.h.resize(static_cast<int>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        const int i = keep[k];
        out.G.row(static_cast<int>(k)) = G.row(i) / scale[k];
        out.h[static_cast<int>(k)] = h[i] / scale[k];
    }
    out.source = std::move(keep);
    return out;
}

/// Dense simplex tableau over nonnegative variables. Row r of `T` holds the
/// constraint coefficients with the right-hand side in the last column; the
/// objective row is stored separately as reduced costs.
class Tableau {
public:
    Tableau(Matrix T, std::vector<int> basis) : T_(std::move(T)), basis_(std::move(basis)) {}

    int rows() const { return static_cast<int>(T_.rows()); }
    int cols() const { return static_cast<int>(T_.cols()) - 1; }
    const std::vector<int>& basis() const { return basis_; }
    double rhs(int r) const { return T_(r, cols()); }
    double coeff(int r, int j) const { return T_(r, j); }

    /// Minimizes cost.x over the current tableau, never letting a column in
    /// `blocked` enter. Returns false when unbounded.
    bool minimize(const Vector& cost, const std::vector<bool>& blocked, int max_pivots)
    {
        for (int it = 0; it < max_pivots; ++it) {
            const Vector reduced = reduced_costs(cost);
            int enter = -1;
            for (int j = 0; j < cols(); ++j) {
                if (blocked[static_cast<std::size_t>(j)]) continue;
                if (reduced[j] < -1e-12) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) return true;

            int leave = -1;
            double best = std::numeric_limits<double>::infinity();
            for (int r = 0; r < rows(); ++r) {
                const double a = T_(r, enter);
                if (a <= kPivotTol) continue;
                const double ratio = std::max(0.0, rhs(r)) / a;
                if (ratio < best - 1e-14 ||
                    (std::abs(ratio - best) <= 1e-14 && leave >= 0 &&
                     basis_[static_cast<std::size_t>(r)] <
                         basis_[static_cast<std::size_t>(leave)])) {
                    best = ratio;
                    leave = r;
                }
            }
            if (leave < 0) return false;
            pivot(leave, enter);
        }
        return true;
    }

    Vector reduced_costs(const Vector& cost) const
    {
        Vector cb(rows());
        for (int r = 0; r < rows(); ++r) cb[r] = cost[basis_[static_cast<std::size_t>(r)]];
        Vector red = cost;
        red.noalias() -= T_.leftCols(cols()).transpose() * cb;
        return red;
    }

    Vector values() const
    {
        Vector x = Vector::Zero(cols());
        for (int r = 0; r < rows(); ++r) x[basis_[static_cast<std::size_t>(r)]] = rhs(r);
        return x;
    }

    void pivot(int r, int c)
    {
        const double p = T_(r, c);
        T_.row(r) /= p;
        for (int i = 0; i < rows(); ++i) {
            if (i == r) continue;
            const double f = T_(i, c);
            if (f != 0.0) T_.row(i) -= f * T_.row(r);
        }
        basis_[static_cast<std::size_t>(r)] = c;
    }

private:
    Matrix T_;
    std::vector<int> basis_;
};

}  // namespace

LpResult solve_lp(const Vector& c, const Matrix& G_in, const Vector& h_in, double tol)
{
    const int n = static_cast<int>(G_in.cols());
    LpResult result;
    const NormalizedRows rows = normalize_rows(G_in, h_in, tol);
    if (rows.trivially_infeasible) return result;

    const int r = static_cast<int>(rows.G.rows());
    if (r == 0) {
        if (c.norm() > 0.0) {
            result.status = LpStatus::Unbounded;
            result.x = Vector::Zero(n);
            return result;
        }
        result.status = LpStatus::Optimal;
        result.x = Vector::Zero(n);
        return result;
    }

    int n_art = 0;
    for (int i = 0; i < r; ++i) n_art += rows.h[i] < 0.0 ? 1 : 0;
    const int n_cols = 2 * n + r + n_art;
    Matrix T = Matrix::Zero(r, n_cols + 1);
    std::vector<int> basis(static_cast<std::size_t>(r));
    int art = 0;
    for (int i = 0; i < r; ++i) {
        const double sign = rows.h[i] < 0.0 ? -1.0 : 1.0;
        T.block(i, 0, 1, n) = sign * rows.G.row(i);
        T.block(i, n, 1, n) = -sign * rows.G.row(i);
        T(i, 2 * n + i) = sign;
        T(i, n_cols) = sign * rows.h[i];
        if (sign < 0.0) {
            const int col = 2 * n + r + art++;
            T(i, col) = 1.0;
            basis[static_cast<std::size_t>(i)] = col;
        } else {
            basis[static_cast<std::size_t>(i)] = 2 * n + i;
        }
    }

    Tableau tab(std::move(T), std::move(basis));
    const int max_pivots = 50 * (n_cols + r) + 100;
    std::vector<bool> blocked(static_cast<std::size_t>(n_cols), false);

    if (n_art > 0) {
        Vector phase1 = Vector::Zero(n_cols);
        for (int j = 2 * n + r; j < n_cols; ++j) phase1[j] = 1.0;
        tab.minimize(phase1, blocked, max_pivots);
        const Vector v = tab.values();
        double infeas = 0.0;
        for (int j = 2 * n + r; j < n_cols; ++j) infeas += v[j];
        if (infeas > tol) return result;

        // Drive zero-level artificials out of the basis where possible.
        for (int row = 0; row < tab.rows(); ++row) {
            const int b = tab.basis()[static_cast<std::size_t>(row)];
            if (b < 2 * n + r) continue;
            for (int j = 0; j < 2 * n + r; ++j) {
                if (std::abs(tab.coeff(row, j)) > 1e-9) {
                    tab.pivot(row, j);
                    break;
                }
            }
        }
        for (int j = 2 * n + r; j < n_cols; ++j) blocked[static_cast<std::size_t>(j)] = true;
    }

    Vector cost = Vector::Zero(n_cols);
    cost.head(n) = c;
    cost.segment(n, n) = -c;
    const bool bounded = tab.minimize(cost, blocked, max_pivots);
    const Vector v = tab.values();
    result.x = v.head(n) - v.segment(n, n);
    result.objective = c.dot(result.x);
    result.status = bounded ? LpStatus::Optimal : LpStatus::Unbounded;
    return result;
}

std::optional<Vector> find_feasible_point(const Matrix& G, const Vector& h, double tol)
{
    const LpResult r = solve_lp(Vector::Zero(G.cols()), G, h, tol);
    if (r.status == LpStatus::Infeasible) return std::nullopt;
    return r.x;
}

namespace {

/// Orthonormal basis of null(A) for a full-row-rank A (possibly 0 rows).
Matrix null_space(const Matrix& A, int n)
{
    if (A.rows() == 0) return Matrix::Identity(n, n);
    Eigen::HouseholderQR<Matrix> qr(A.transpose());
    const Matrix Q = qr.householderQ();
    return Q.rightCols(n - static_cast<int>(A.rows()));
}

Matrix gather_rows(const Matrix& G, const std::vector<int>& idx)
{
    Matrix out(static_cast<int>(idx.size()), G.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<int>(k)) = G.row(idx[k]);
    return out;
}

bool independent_of(const Matrix& G, const std::vector<int>& working, int candidate)
{
    if (working.empty()) return G.row(candidate).norm() > 1e-12;
    std::vector<int> trial = working;
    trial.push_back(candidate);
    const Matrix A = gather_rows(G, trial);
    Eigen::ColPivHouseholderQR<Matrix> qr(A.transpose());
    qr.setThreshold(1e-10);
    return qr.rank() == static_cast<Eigen::Index>(trial.size());
}

}  // namespace

QpResult solve_qp(const Matrix& H, const Vector& c, const Matrix& G_in, const Vector& h_in,
                  const std::optional<Vector>& x0, double tol)
{
    const int n = static_cast<int>(c.size());
    QpResult result;

    const NormalizedRows rows = normalize_rows(G_in, h_in, tol);
    if (rows.trivially_infeasible) return result;
    const Matrix& G = rows.G;
    const Vector& h = rows.h;
    const int r = static_cast<int>(G.rows());

    Vector x;
    if (x0 && x0->size() == n && (r == 0 || ((G * *x0 - h).maxCoeff() <= tol))) {
        x = *x0;
    } else {
        const auto start = find_feasible_point(G, h, 1e-9);
        if (!start) return result;
        x = *start;
    }

    const double hscale = std::max(1.0, H.lpNorm<Eigen::Infinity>());
    const double active_tol = 1e-9;
    std::vector<int> working;
    for (int i = 0; i < r; ++i) {
        if (std::abs(G.row(i).dot(x) - h[i]) <= active_tol && independent_of(G, working, i)) {
            working.push_back(i);
        }
    }

    const int max_iter = 40 * (n + r) + 200;
    for (int it = 0; it < max_iter; ++it) {
        result.iterations = it + 1;
        const Vector g = H * x + c;
        const Matrix Aw = gather_rows(G, working);
        const Matrix Z = null_space(Aw, n);

        Vector p = Vector::Zero(n);
        bool ray = false;
        if (Z.cols() > 0) {
            const Matrix Hr = Z.transpose() * H * Z;
            const Vector gr = Z.transpose() * g;
            Eigen::SelfAdjointEigenSolver<Matrix> es(Hr);
            const Vector& lam = es.eigenvalues();
            const Matrix& V = es.eigenvectors();
            Vector pr = Vector::Zero(Z.cols());
            Vector dr = Vector::Zero(Z.cols());
            const double gscale = std::max(1.0, g.norm());
            for (int k = 0; k < Z.cols(); ++k) {
                const double proj = V.col(k).dot(gr);
                if (lam[k] > 1e-12 * hscale) {
                    pr -= (proj / lam[k]) * V.col(k);
                } else if (std::abs(proj) > 1e-12 * gscale) {
                    dr -= proj * V.col(k);
                }
            }
            if (dr.norm() > 0.0) {
                p = Z * dr;
                ray = true;
            } else {
                p = Z * pr;
            }
        }

        if (!ray && p.norm() <= 1e-13 * (1.0 + x.norm())) {
            if (working.empty()) break;
            // Multipliers: Aw' lambda = -g, dual feasibility requires lambda >= 0.
            const Vector lambda =
                Aw.transpose().colPivHouseholderQr().solve(-g);
            int drop = -1;
            double most_negative = -1e-10 * std::max(1.0, g.norm());
            for (std::size_t k = 0; k < working.size(); ++k) {
                if (lambda[static_cast<int>(k)] < most_negative) {
                    most_negative = lambda[static_cast<int>(k)];
                    drop = static_cast<int>(k);
                }
            }
            if (drop < 0) break;
            working.erase(working.begin() + drop);
            continue;
        }

        double alpha = ray ? std::numeric_limits<double>::infinity() : 1.0;
        int blocking = -1;
        for (int i = 0; i < r; ++i) {
            if (std::find(working.begin(), working.end(), i) != working.end()) continue;
            const double gp = G.row(i).dot(p);
            if (gp <= 1e-14) continue;
            const double step = std::max(0.0, (h[i] - G.row(i).dot(x)) / gp);
            if (step < alpha) {
                alpha = step;
                blocking = i;
            }
        }
        if (!std::isfinite(alpha)) {
            // Unbounded below; callers guarantee this cannot happen.
            result.status = QpStatus::IterationLimit;
            result.x = x;
            result.objective = 0.5 * x.dot(H * x) + c.dot(x);
            return result;
        }
        x += alpha * p;
        if (blocking >= 0) working.push_back(blocking);
        if (it + 1 == max_iter) {
            result.status = QpStatus::IterationLimit;
            result.x = x;
            result.objective = 0.5 * x.dot(H * x) + c.dot(x);
            return result;
        }
    }

    result.status = QpStatus::Optimal;
    result.x = x;
    result.objective = 0.5 * x.dot(H * x) + c.dot(x);
    return result;
}

}  // namespace cbfcomp::dense
