#include "cbfcomp/simulation.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "cbfcomp/attitude.hpp"

namespace cbfcomp {

State rk4_step(const SecondOrderSystem& sys, const Vector& q, const Vector& v, const Vector& u,
               double dt)
{
    if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
    const Flow k1 = flow(sys, q, v, u);
    const Flow k2 = flow(sys, q + 0.5 * dt * k1.qdot, v + 0.5 * dt * k1.vdot, u);
    const Flow k3 = flow(sys, q + 0.5 * dt * k2.qdot, v + 0.5 * dt * k2.vdot, u);
    const Flow k4 = flow(sys, q + dt * k3.qdot, v + dt * k3.vdot, u);
    return {q + dt / 6.0 * (k1.qdot + 2.0 * k2.qdot + 2.0 * k3.qdot + k4.qdot),
            v + dt / 6.0 * (k1.vdot + 2.0 * k2.vdot + 2.0 * k3.vdot + k4.vdot)};
}

Vector NominalController::evaluate(const SecondOrderSystem& sys, const Vector& q,
                                   const Vector& v) const
{
    switch (kind) {
    case Kind::Zero:
        return Vector::Zero(sys.m());
    case Kind::Constant:
        if (u.size() != sys.m()) throw std::invalid_argument("constant nominal: wrong input size");
        return u;
    case Kind::Proportional: {
        const Vector vt = v_target.size() ? v_target : Vector(Vector::Zero(sys.n2()));
        Vector e;
        if (sys.unit_position()) {
            Vector err = quaternion_multiply(quaternion_conjugate(q_target), q);
            if (err[3] < 0.0) err = -err;
            e = 2.0 * err.head(3);
        } else {
            e = q - q_target;
        }
        if (e.size() != sys.m() || vt.size() != sys.m())
            throw std::invalid_argument("proportional nominal needs n1 = n2 = m (or quaternions)");
        return -kp * e - kd * (v - vt);
    }
    }
    return Vector::Zero(sys.m());
}

nlohmann::json NominalController::to_json() const
{
    auto vec = [](const Vector& x) { return std::vector<double>(x.data(), x.data() + x.size()); };
    switch (kind) {
    case Kind::Zero:
        return {{"type", "zero"}};
    case Kind::Constant:
        return {{"type", "constant"}, {"u", vec(u)}};
    case Kind::Proportional: {
        nlohmann::json j = {{"type", "proportional"}, {"q_target", vec(q_target)}, {"kp", kp}, {"kd", kd}};
        if (v_target.size()) j["v_target"] = vec(v_target);
        return j;
    }
    }
    return {};
}

SimTrace simulate(const SimConfig& config, std::span<const Barrier> barriers,
                  const SecondOrderSystem& sys, const SafeSet& safe_set, const ControlSet& U)
{
    if (!(config.dt > 0.0)) throw SimulationError("dt must be positive");
    if (!(config.t_final >= 0.0)) throw SimulationError("t_final must be nonnegative");
    if (config.log_stride < 1) throw SimulationError("log_stride must be >= 1");
    sys.require_state(config.initial.q, config.initial.v, "simulate");

    SimTrace tr;
    for (const auto& b : barriers) tr.barrier_labels.push_back(b.label());
    for (const auto& k : safe_set.position) tr.kappa_labels.push_back(k->label());
    for (const auto& e : safe_set.velocity) tr.eta_labels.push_back(e->label());

    Vector q = config.initial.q, v = config.initial.v;
    if (sys.unit_position()) q.normalize();
    if (!safe_set.contains(q, v, config.initial_tol))
        throw SimulationError("initial state is outside the safe set");
    for (const auto& b : barriers)
        if (barrier_value(b, sys, q, v) > config.initial_tol)
            throw SimulationError("initial state is outside barrier set " + b.label());

    const long n_steps = std::lround(std::ceil(config.t_final / config.dt - 1e-9));

    auto measure = [&](SimRow& r) {
        r.h = Vector(static_cast<Eigen::Index>(barriers.size()));
        for (std::size_t k = 0; k < barriers.size(); ++k)
            r.h[static_cast<Eigen::Index>(k)] = barrier_value(barriers[k], sys, r.q, r.v);
        r.kappa = Vector(static_cast<Eigen::Index>(safe_set.position.size()));
        for (std::size_t k = 0; k < safe_set.position.size(); ++k)
            r.kappa[static_cast<Eigen::Index>(k)] = safe_set.position[k]->value(r.q);
        r.eta = Vector(static_cast<Eigen::Index>(safe_set.velocity.size()));
        for (std::size_t k = 0; k < safe_set.velocity.size(); ++k)
            r.eta[static_cast<Eigen::Index>(k)] = safe_set.velocity[k]->value(r.v);
        if (r.h.size()) tr.max_h = std::max(tr.max_h, r.h.maxCoeff());
        if (r.kappa.size()) tr.max_kappa = std::max(tr.max_kappa, r.kappa.maxCoeff());
        if (r.eta.size()) tr.max_eta = std::max(tr.max_eta, r.eta.maxCoeff());
    };

    for (long step = 0;; ++step) {
        SimRow row;
        row.t = step * config.dt;
        row.q = q;
        row.v = v;
        measure(row);
        if (step >= n_steps) {
            row.u = Vector::Zero(sys.m());
            row.delta = Vector::Ones(static_cast<Eigen::Index>(barriers.size()));
            tr.rows.push_back(std::move(row));
            tr.completed = true;
            break;
        }

        QpProblem p{config.nominal.evaluate(sys, q, v), cbf_rows(barriers, sys, q, v),
                    config.slack_weights, U};
        const auto t0 = std::chrono::steady_clock::now();
        const QpSolution sol = solve_safety_qp(p);
        row.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        row.status = sol.status;
        ++tr.steps;
        if (sol.status != QpStatus::Optimal) {
            ++tr.infeasible_steps;
            row.u = Vector::Constant(sys.m(), std::numeric_limits<double>::quiet_NaN());
            row.delta = Vector::Constant(static_cast<Eigen::Index>(barriers.size()),
                                         std::numeric_limits<double>::quiet_NaN());
            std::ostringstream diag;
            diag << "infeasible QP at t=" << row.t << "; h=[";
            for (Eigen::Index k = 0; k < row.h.size(); ++k) diag << (k ? "," : "") << row.h[k];
            diag << "]";
            tr.diagnostic = diag.str();
            tr.rows.push_back(std::move(row));
            break;
        }
        row.u = sol.u;
        row.delta = sol.delta;
        const bool log = step % config.log_stride == 0;
        State next = rk4_step(sys, q, v, sol.u, config.dt);
        q = std::move(next.q);
        v = std::move(next.v);
        if (sys.unit_position()) q.normalize();
        if (log) tr.rows.push_back(std::move(row));
    }
    return tr;
}

void write_trace_csv(const SimTrace& tr, std::ostream& os)
{
    if (tr.rows.empty()) return;
    const SimRow& f = tr.rows.front();
    os << "t";
    for (Eigen::Index i = 0; i < f.q.size(); ++i) os << ",q" << i + 1;
    for (Eigen::Index i = 0; i < f.v.size(); ++i) os << ",v" << i + 1;
    for (Eigen::Index i = 0; i < f.u.size(); ++i) os << ",u" << i + 1;
    for (const auto& l : tr.barrier_labels) os << ",delta_" << l;
    for (const auto& l : tr.barrier_labels) os << ",h_" << l;
    for (const auto& l : tr.kappa_labels) os << ",kappa_" << l;
    for (const auto& l : tr.eta_labels) os << ",eta_" << l;
    os << ",status,solve_time\n";
    os << std::setprecision(12);
    for (const auto& r : tr.rows) {
        os << r.t;
        for (const Vector* x : {&r.q, &r.v, &r.u, &r.delta, &r.h, &r.kappa, &r.eta})
            for (Eigen::Index i = 0; i < x->size(); ++i) os << ',' << (*x)[i];
        os << ',' << (r.status == QpStatus::Optimal ? "optimal" : "infeasible") << ',' << r.solve_time
           << '\n';
    }
}

nlohmann::json trace_summary(const SimTrace& tr)
{
    auto finite_or_null = [](double x) -> nlohmann::json {
        if (std::isfinite(x)) return x;
        return nullptr;
    };
    return {{"steps", tr.steps},
            {"logged_rows", tr.rows.size()},
            {"infeasible_steps", tr.infeasible_steps},
            {"completed", tr.completed},
            {"diagnostic", tr.diagnostic},
            {"max_h", finite_or_null(tr.max_h)},
            {"max_kappa", finite_or_null(tr.max_kappa)},
            {"max_eta", finite_or_null(tr.max_eta)},
            {"barriers", tr.barrier_labels}};
}

}  // namespace cbfcomp
