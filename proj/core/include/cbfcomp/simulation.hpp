#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbfcomp/barriers.hpp"
#include "cbfcomp/control_set.hpp"
#include "cbfcomp/dynamics.hpp"
#include "cbfcomp/feasibility.hpp"

namespace cbfcomp {

/// One RK4 step of the flow with u held constant. Quaternion positions are not
/// renormalized here.
State rk4_step(const SecondOrderSystem& sys, const Vector& q, const Vector& v, const Vector& u,
               double dt);

struct NominalController {
    enum class Kind { Zero, Constant, Proportional } kind = Kind::Zero;
    Vector u;         ///< Constant
    Vector q_target;  ///< Proportional
    Vector v_target;  ///< Proportional; empty means zero
    double kp = 1.0;
    double kd = 1.0;

    /// Proportional on quaternions uses the body-frame error 2 vec(q_target* (x) q).
    Vector evaluate(const SecondOrderSystem& sys, const Vector& q, const Vector& v) const;
    nlohmann::json to_json() const;
};

struct SimConfig {
    double dt = 1e-3;
    double t_final = 1.0;
    NominalController nominal;
    State initial;
    int log_stride = 1;
    Vector slack_weights;  ///< empty: kDefaultSlackWeight
    double initial_tol = 1e-9;
};

struct SimRow {
    double t = 0.0;
    Vector q, v, u, delta, h, kappa, eta;
    QpStatus status = QpStatus::Optimal;
    double solve_time = 0.0;
};

struct SimTrace {
    std::vector<SimRow> rows;
    std::vector<std::string> barrier_labels;
    std::vector<std::string> kappa_labels;
    std::vector<std::string> eta_labels;
    int steps = 0;
    int infeasible_steps = 0;
    bool completed = false;
    std::string diagnostic;
    double max_h = -std::numeric_limits<double>::infinity();
    double max_kappa = -std::numeric_limits<double>::infinity();
    double max_eta = -std::numeric_limits<double>::infinity();
};

class SimulationError : public std::invalid_argument {
public:
    explicit SimulationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Closed loop under the slack-augmented safety QP. Maxima are taken over
/// every integration step, not just logged rows. Stops at the first
/// infeasible QP.
SimTrace simulate(const SimConfig& config, std::span<const Barrier> barriers,
                  const SecondOrderSystem& sys, const SafeSet& safe_set, const ControlSet& U);

void write_trace_csv(const SimTrace& trace, std::ostream& os);
nlohmann::json trace_summary(const SimTrace& trace);

}  // namespace cbfcomp
