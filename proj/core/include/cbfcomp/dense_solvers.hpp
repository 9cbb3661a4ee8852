#pragma once

#include <optional>

#include "cbfcomp/geometry.hpp"

namespace cbfcomp::dense {

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
    LpStatus status = LpStatus::Infeasible;
    Vector x;
    double objective = 0.0;
};

/// minimize c.x subject to G x <= h, x free. Dense two-phase tableau simplex
/// with Bland's rule. Rows are normalized internally; `tol` is the phase-1
/// infeasibility threshold on normalized rows.
LpResult solve_lp(const Vector& c, const Matrix& G, const Vector& h, double tol = 1e-9);

/// Any x with G x <= h (within tol on normalized rows), or nullopt.
std::optional<Vector> find_feasible_point(const Matrix& G, const Vector& h, double tol = 1e-9);

enum class QpStatus { Optimal, Infeasible, IterationLimit };

struct QpResult {
    QpStatus status = QpStatus::Infeasible;
    Vector x;
    double objective = 0.0;  ///< 0.5 x'Hx + c'x
    int iterations = 0;
};

/// minimize 0.5 x'Hx + c'x subject to G x <= h with H symmetric positive
/// semidefinite and the objective bounded below on the feasible set.
/// Primal active-set method started from a phase-1 point (or `x0` if it is
/// feasible); zero-curvature directions of the reduced Hessian are followed
/// to the nearest blocking constraint.
QpResult solve_qp(const Matrix& H, const Vector& c, const Matrix& G, const Vector& h,
                  const std::optional<Vector>& x0 = std::nullopt, double tol = 1e-10);

}  // namespace cbfcomp::dense
