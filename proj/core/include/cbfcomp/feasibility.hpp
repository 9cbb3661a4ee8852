#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cbfcomp/barriers.hpp"
#include "cbfcomp/cbf_row.hpp"
#include "cbfcomp/control_set.hpp"

namespace cbfcomp {

enum class RhsMode {
    Normal,  ///< A u <= b
    Nagumo,  ///< A u <= b - alpha(-h), the boundary condition hdot <= 0
};

/// A point u in U with A_k u <= b_k for every row, or nullopt.
std::optional<Vector> lp_feasible(std::span<const CbfRow> rows, const ControlSet& U,
                                  RhsMode mode = RhsMode::Normal, double tol = 1e-9);

inline constexpr double kDefaultSlackWeight = 100.0;
inline constexpr double kDefaultActiveEps = 1e-6;

struct QpProblem {
    Vector u_nom;
    std::vector<CbfRow> rows;
    Vector slack_weights;  ///< J_k > 0; empty means kDefaultSlackWeight for every row
    ControlSet U;
};

enum class QpStatus { Optimal, Infeasible };

struct QpSolution {
    QpStatus status = QpStatus::Infeasible;
    Vector u;
    Vector delta;
    double objective = 0.0;  ///< |u - u_nom|^2 + sum J_k delta_k
    int iterations = 0;
};

/// minimize |u - u_nom|^2 + sum_k J_k delta_k
/// s.t.     A_k u <= delta_k alpha_k + (b_k - alpha_k),  delta_k >= 1,  u in U
/// where alpha_k = alpha(-h_k) is the row's alpha_term.
QpSolution solve_safety_qp(const QpProblem& p);

/// Indices k with |h_k(q, v)| <= eps_active.
std::vector<int> active_set(std::span<const Barrier> barriers, const SecondOrderSystem& sys,
                            const Vector& q, const Vector& v,
                            double eps_active = kDefaultActiveEps);

}  // namespace cbfcomp
