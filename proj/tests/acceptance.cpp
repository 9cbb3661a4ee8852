// One PASS/FAIL line per acceptance criterion. Exit status is 0 when every
// criterion ran to completion; --strict also fails on any FAIL line.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbfcomp/attitude.hpp"
#include "cbfcomp/barriers.hpp"
#include "cbfcomp/control_set.hpp"
#include "cbfcomp/dynamics.hpp"
#include "cbfcomp/feasibility.hpp"
#include "cbfcomp/scenario.hpp"
#include "cbfcomp/simulation.hpp"
#include "cbfcomp/viability.hpp"
#include "cbfcomp_cli/commands.hpp"

using namespace cbfcomp;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const double kSqrt2 = std::numbers::sqrt2;
const double kPi = std::numbers::pi;

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string scenario_path(const std::string& name)
{
    return std::string(CBFCOMP_SCENARIO_DIR) + "/" + name + ".json";
}

json scenario_json(const std::string& name)
{
    std::ifstream in(scenario_path(name));
    return json::parse(in);
}

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("cbfcomp_acceptance_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string fmt(double x, int prec = 3)
{
    std::ostringstream os;
    os << std::setprecision(prec) << x;
    return os.str();
}

Vector vec2(double a, double b)
{
    Vector v(2);
    v << a, b;
    return v;
}

// pairwise nonnegative dots, by rejection
std::vector<Vector> cone_rows(Rng& rng, int m, int count)
{
    for (;;) {
        std::vector<Vector> A;
        bool ok = true;
        for (int i = 0; i < count && ok; ++i) {
            const Vector a = random_unit_vector(rng, m) *
                             std::uniform_real_distribution<double>(0.2, 3.0)(rng);
            for (const auto& e : A) ok = ok && a.dot(e) >= 0.0;
            A.push_back(a);
        }
        if (ok) return A;
    }
}

// ---------------------------------------------------------------------------

Outcome criterion1()
{
    const auto t0 = Clock::now();
    double worst = 0.0;
    bool verdicts = true;
    for (double g : {0.5, 0.75, 1.25}) {
        json j = scenario_json("ex1");
        j["constraints"][0]["normal"] = {1.0, g};
        j["constraints"][1]["normal"] = {1.0, -g};
        const double q1 = -1.0 / (2.0 * (1.0 + g));
        j["feascheck"]["state"] = {{"q", {q1, 0.0}}, {"v", {1.0, 0.0}}};
        std::ostringstream sink;
        const auto r = cli::cmd_feascheck(parse_scenario(j), {}, sink);
        verdicts = verdicts && r.report.at("verdict") == "INFEASIBLE" &&
                   r.report.at("active") == json::array({1, 2});
        const auto& rows = r.report.at("rows");
        if (rows.size() != 2) {
            verdicts = false;
            continue;
        }
        for (int k = 0; k < 2; ++k) {
            const double sign = k == 0 ? 1.0 : -1.0;
            const auto A = rows[k].at("A").get<std::vector<double>>();
            const double b = rows[k].at("b").get<double>();
            worst = std::max({worst, std::abs(A[0] - 1.0), std::abs(A[1] - sign * g),
                              std::abs(b + (1.0 + g))});
        }
    }
    const double t = since(t0);
    return {verdicts && worst <= 1e-9 && t < 1.0,
            "INFEASIBLE at x0 for gamma 0.5/0.75/1.25: " + std::string(verdicts ? "yes" : "no") +
                ", max row error " + fmt(worst) + ", " + fmt(t) + " s"};
}

Outcome criterion2()
{
    const auto t0 = Clock::now();
    const Scenario sc = build_scenario(load_scenario(scenario_path("ex3")));
    const bool inner_ok = sc.U_inner.kind() == SetKind::OneBall &&
                          std::abs(sc.U_inner.gamma() - 2.0 / (1.0 + kSqrt2)) < 1e-3;
    const auto D = sample_boundary_intersections(sc.barriers, sc.context());
    const auto E = get_infeasible_set(D, sc.barriers, *sc.system, sc.U);
    const double t = since(t0);
    return {inner_ok && D.size() >= 1000 && E.empty() && t < 30.0,
            "U' = " + sc.U_inner.describe() + ", " + std::to_string(D.size()) +
                " boundary points, " + std::to_string(E.size()) + " infeasible, " + fmt(t) + " s"};
}

Outcome criterion3()
{
    const auto t0 = Clock::now();
    const ScenarioConfig cfg = load_scenario(scenario_path("ex4"));
    std::ostringstream sink;
    const auto r = cli::cmd_build(cfg, {}, sink);
    const json& rep = r.report;
    const bool converged = rep.at("converged").get<bool>();
    const int iterations = rep.at("iterations").get<int>();
    const auto& added = rep.at("added");
    double angle = 1e9, coef_err = 1e9;
    if (added.size() == 1) {
        const auto n = added[0].at("normal").get<std::vector<double>>();
        angle = std::acos(std::clamp(n[0] / std::hypot(n[0], n[1]), -1.0, 1.0)) * 180.0 / kPi;
        coef_err = std::abs(added[0].at("coefficient").get<double>() - 4.0 / (1.0 + kSqrt2));
    }
    const Scenario sc = build_scenario(cfg);
    const auto ctx = sc.context();
    const auto fr = infeasible_fraction(barriers_from_json(rep), ctx, ctx.grid.refined(2.0));
    const double t = since(t0);
    const bool pass = converged && iterations <= 3 && added.size() == 1 && angle <= 2.0 &&
                      coef_err <= 1e-6 && fr.fraction <= 0.01 && t < 120.0;
    return {pass, std::string(converged ? "converged" : "not converged") + ", " +
                      std::to_string(iterations) + " iteration(s), " + std::to_string(added.size()) +
                      " added, normal angle " + fmt(angle) + " deg, coefficient error " +
                      fmt(coef_err) + ", refined-grid infeasible " + std::to_string(fr.infeasible) +
                      "/" + std::to_string(fr.samples) + ", " + fmt(t) + " s"};
}

Outcome criterion4()
{
    const auto t0 = Clock::now();
    int pairs = 0, violations = 0;
    std::string worst_case;
    for (int m : {2, 3}) {
        const std::vector<ControlSet> outers{
            ControlSet::inf_ball(m, 1.0), ControlSet::one_ball(m, 1.0), ControlSet::two_ball(m, 1.0),
            ControlSet::weighted_inf_ball(m == 2 ? vec2(1, 2) : Vector(Vector::LinSpaced(3, 1, 2)), 1.0)};
        for (const auto& U : outers) {
            const std::pair<ExtensionKind, ControlSet> inners[] = {
                {ExtensionKind::OEP, inner_oep_set(U)}, {ExtensionKind::QEP, inner_qep_set(U)}};
            for (const auto& [kind, inner] : inners) {
                ++pairs;
                for (std::uint64_t seed = 0; seed < 5; ++seed) {
                    const auto r = verify_extension_property(inner, U, kind, 10000, seed);
                    if (r.violations > 0) {
                        violations += r.violations;
                        worst_case = to_string(kind) + " " + inner.describe() + " in " + U.describe();
                    }
                }
            }
        }
    }
    const double gs = compute_gamma_star(ControlSet::inf_ball(2, 1.0), 20000);
    const double gerr = std::abs(gs - 2.0 / (1.0 + kSqrt2));
    std::string d = std::to_string(pairs) + " (inner, U) pairs x 5 seeds x 1e4 trials: " +
                    std::to_string(violations) + " violations";
    if (!worst_case.empty()) d += " (" + worst_case + ")";
    d += ", gamma*(InfBall(1), 2) = " + fmt(gs, 7) + " (error " + fmt(gerr) + "), " + fmt(since(t0)) + " s";
    return {violations == 0 && gerr <= 1e-3, d};
}

struct WitnessTally {
    int instances = 0;
    int outside = 0;
    int row_failures = 0;
    double worst_excess = 0.0;

    void check(const Vector& z, const std::vector<Vector>& A, const std::vector<double>& b,
               const ControlSet& U)
    {
        ++instances;
        if (!U.contains(z, 1e-8)) ++outside;
        double e = -1e300;
        for (std::size_t k = 0; k < A.size(); ++k) e = std::max(e, A[k].dot(z) - b[k]);
        if (e > 1e-8) ++row_failures;
        worst_excess = std::max(worst_excess, e);
    }
    bool ok() const { return outside == 0 && row_failures == 0; }
    std::string str() const
    {
        return std::to_string(instances) + " instances, " + std::to_string(outside) + " outside U, " +
               std::to_string(row_failures) + " row failures (worst excess " + fmt(worst_excess) + ")";
    }
};

Outcome criterion5()
{
    const auto t0 = Clock::now();
    const int n = 1000;
    // m = 2 and m = 3: SCBF-form witnesses in an OEP set, combined by oep_witness
    WitnessTally oep[2], oep_lp[2], qep[2];
    for (int li = 0; li < 2; ++li) {
        const int m = 2 + li;
        const std::vector<ControlSet> outers{ControlSet::inf_ball(m, 1.0), ControlSet::one_ball(m, 1.0),
                                             ControlSet::two_ball(m, 1.0)};
        std::vector<ControlSet> oep_sets, qep_sets;
        for (const auto& U : outers) {
            oep_sets.push_back(inner_oep_set(U));
            qep_sets.push_back(inner_qep_set(U));
        }
        Rng rng(500 + static_cast<std::uint64_t>(m));
        for (int t = 0; t < n; ++t) {
            const std::size_t s = static_cast<std::size_t>(t) % outers.size();
            const int M = 2 + t % (m - 1);
            const auto A = cone_rows(rng, m, M);
            std::vector<Vector> w;
            std::vector<double> b;
            std::vector<CbfRow> rows;
            for (const auto& a : A) {
                const Vector dir = -a.normalized();
                const double r = oep_sets[s].radial_extent(dir) *
                                 std::uniform_real_distribution<double>(0.05, 1.0)(rng);
                w.push_back(r * dir);
                b.push_back(a.dot(w.back()) + std::uniform_real_distribution<double>(0.0, 0.1)(rng));
                rows.push_back({a, b.back(), 0.0});
            }
            oep[li].check(oep_witness(w), A, b, outers[s]);
            const auto z = joint_witness(rows, outers[s]);
            if (z) oep_lp[li].check(*z, A, b, outers[s]);
            else {
                ++oep_lp[li].instances;
                ++oep_lp[li].row_failures;
            }
        }
        // arbitrary witnesses in a QEP set, joint_witness
        for (int t = 0; t < n; ++t) {
            const std::size_t s = static_cast<std::size_t>(t) % outers.size();
            const int M = 2 + t % m;
            const auto A = cone_rows(rng, m, M);
            std::vector<double> b;
            std::vector<CbfRow> rows;
            for (const auto& a : A) {
                const Vector w = qep_sets[s].sample_interior(rng);
                b.push_back(a.dot(w) + std::uniform_real_distribution<double>(0.0, 0.1)(rng));
                rows.push_back({a, b.back(), 0.0});
            }
            const auto z = joint_witness(rows, outers[s]);
            if (z) qep[li].check(*z, A, b, outers[s]);
            else {
                ++qep[li].instances;
                ++qep[li].row_failures;
            }
        }
    }
    const bool pass = oep[0].ok() && oep[1].ok() && qep[0].ok() && qep[1].ok();
    return {pass, "OEP m=2 oep_witness: " + oep[0].str() + "; OEP m=3 oep_witness: " + oep[1].str() +
                      "; OEP m=3 joint_witness: " + oep_lp[1].str() + "; QEP m=2: " + qep[0].str() +
                      "; QEP m=3: " + qep[1].str() + "; " + fmt(since(t0)) + " s"};
}

double qp_objective_at(const QpProblem& p, const Vector& u, bool& feasible)
{
    double obj = (u - p.u_nom).squaredNorm();
    feasible = true;
    for (std::size_t k = 0; k < p.rows.size(); ++k) {
        const CbfRow& r = p.rows[k];
        const double J = p.slack_weights.size() ? p.slack_weights[static_cast<Eigen::Index>(k)]
                                                : kDefaultSlackWeight;
        const double need = r.A.dot(u) - (r.b - r.alpha_term);  // <= delta * alpha
        double delta = 1.0;
        if (r.alpha_term > 0.0)
            delta = std::max(1.0, need / r.alpha_term);
        else if (need > 1e-12)
            feasible = false;
        obj += J * delta;
    }
    return obj;
}

// grid over U = InfBall(1) in 2D with closed-form slack; each finer level recenters a 41x41
// window on the best point until that point is interior, then shrinks the step
double grid_oracle(const QpProblem& p, bool& any)
{
    double best = 1e300;
    Vector best_u = Vector::Zero(2);
    any = false;
    auto scan = [&](double c0, double c1, double h, int half) {
        bool moved = false;
        for (int i = -half; i <= half; ++i)
            for (int j = -half; j <= half; ++j) {
                const Vector u = vec2(std::clamp(c0 + i * h, -1.0, 1.0), std::clamp(c1 + j * h, -1.0, 1.0));
                bool f = false;
                const double o = qp_objective_at(p, u, f);
                if (f && o < best - 1e-15) {
                    best = o;
                    best_u = u;
                    any = true;
                    moved = true;
                }
            }
        return moved;
    };
    scan(0.0, 0.0, 0.02, 50);
    if (!any) return best;
    for (double h = 0.002; h > 1e-7; h /= 10.0)
        for (int rep = 0; rep < 100 && scan(best_u[0], best_u[1], h, 20); ++rep) {
        }
    return best;
}

Outcome criterion6()
{
    const auto t0 = Clock::now();
    // closed-form projection on single rows
    Rng rng(60);
    double proj_err = 0.0;
    for (int t = 0; t < 1000; ++t) {
        QpProblem p{gaussian_vector(rng, 3), {}, {}, ControlSet::inf_ball(3, 100.0)};
        const Vector A = gaussian_vector(rng, 3);
        const double b = std::normal_distribution<double>(0.0, 1.0)(rng);
        p.rows = {{A, b, 0.0}};
        const auto s = solve_safety_qp(p);
        const Vector ref = p.u_nom - std::max(0.0, A.dot(p.u_nom) - b) / A.squaredNorm() * A;
        const double oref = (ref - p.u_nom).squaredNorm() + kDefaultSlackWeight;
        proj_err = std::max(proj_err, s.status == QpStatus::Optimal ? std::max((s.u - ref).norm(),
                                                                                std::abs(s.objective - oref))
                                                                     : 1e9);
    }
    // Example 5 states against the grid oracle
    const Scenario sc = build_scenario(load_scenario(scenario_path("ex5")));
    const auto ctx = sc.context();
    GridSpec box = ctx.grid;
    box.q_axes = {{-3, 0, 2}, {-2, 2, 2}};
    box.v_axes = {{-1, 3, 2}, {-2, 2, 2}};
    int n = 0, optimal = 0, worse = 0, prop1 = 0;
    double grid_err = 0.0;
    Rng r2(61);
    while (n < 1000) {
        const State s = box.uniform(*sc.system, r2);
        if (!in_working_domain(sc.barriers, ctx, s.q, s.v, 0.0)) continue;
        ++n;
        QpProblem p{Vector(), {}, {}, sc.U};
        p.u_nom = 2.0 * vec2(std::uniform_real_distribution<double>(-1, 1)(r2),
                             std::uniform_real_distribution<double>(-1, 1)(r2));
        p.rows = cbf_rows(sc.barriers, *sc.system, s.q, s.v);
        const auto sol = solve_safety_qp(p);
        bool any = false;
        const double g = grid_oracle(p, any);
        if (sol.status == QpStatus::Optimal) {
            ++optimal;
            if (any) {
                grid_err = std::max(grid_err, std::abs(sol.objective - g));
                if (sol.objective > g + 1e-6) ++worse;
            }
        } else {
            const auto act = active_set(sc.barriers, *sc.system, s.q, s.v);
            std::vector<CbfRow> arows;
            for (int k : act) arows.push_back(p.rows[static_cast<std::size_t>(k)]);
            if (lp_feasible(arows, sc.U, RhsMode::Nagumo)) ++prop1;
        }
    }
    // Example 1 boundary intersections: QP infeasible exactly when the active Nagumo rows are
    int e1_states = 0, e1_infeasible = 0;
    {
        json j = scenario_json("ex1");
        j["algorithm"] = scenario_json("ex3").at("algorithm");
        const Scenario s1 = build_scenario(parse_scenario(j));
        for (const auto& pt : sample_boundary_intersections(s1.barriers, s1.context())) {
            ++e1_states;
            const auto rows = cbf_rows(s1.barriers, *s1.system, pt.q, pt.v);
            QpProblem p{Vector::Zero(2), rows, {}, s1.U};
            const auto sol = solve_safety_qp(p);
            std::vector<CbfRow> arows;
            for (int k : active_set(s1.barriers, *s1.system, pt.q, pt.v))
                arows.push_back(rows[static_cast<std::size_t>(k)]);
            const bool lp = lp_feasible(arows, s1.U, RhsMode::Nagumo).has_value();
            if (sol.status == QpStatus::Infeasible) {
                ++e1_infeasible;
                if (lp) ++prop1;
            }
        }
    }
    const bool pass = proj_err <= 1e-6 && grid_err <= 1e-2 && worse == 0 && prop1 == 0 && e1_infeasible > 0;
    return {pass, "projection max error " + fmt(proj_err) + " (1000 rows); Example 5 states: " +
                      std::to_string(optimal) + "/" + std::to_string(n) +
                      " optimal, max |objective - grid| " + fmt(grid_err) + ", " + std::to_string(worse) +
                       " worse than grid; Example 1 intersections: " + std::to_string(e1_infeasible) + "/" +
                      std::to_string(e1_states) + " infeasible QPs; " + std::to_string(prop1) +
                      " infeasible QPs with feasible active rows; " +
                      fmt(since(t0)) + " s"};
}

Outcome criterion7()
{
    const auto t0 = Clock::now();
    const ScenarioConfig cfg = load_scenario(scenario_path("attitude_coarse"));
    const fs::path dir = scratch("attitude");
    cli::RunOptions opt;
    opt.out_dir = dir.string();
    std::ostringstream sink;
    const auto b = cli::cmd_build(cfg, opt, sink);
    const double tb = since(t0);
    const json& rep = b.report;
    const bool converged = rep.at("converged").get<bool>();
    const std::size_t added = rep.at("added").size();
    std::size_t clusters = 0;
    for (const auto& h : rep.at("history")) clusters = std::max(clusters, h.at("clusters").size());

    opt.barriers_path = (dir / "report.json").string();
    const auto s = cli::cmd_simulate(cfg, opt, sink);
    const json& sum = s.report;
    const double max_kappa = sum.at("max_kappa").is_null() ? 0.0 : sum.at("max_kappa").get<double>();
    const double max_eta = sum.at("max_eta").is_null() ? 0.0 : sum.at("max_eta").get<double>();
    const int infeasible = sum.at("infeasible_steps").get<int>();
    const bool completed = sum.at("completed").get<bool>();
    const double t_sim = cfg.simulation->config.t_final;
    // eta = +-omega_i - omega_max, so max eta bounds ||omega||_inf - omega_max
    const bool pass = converged && added >= 1 && added <= 2 && clusters >= 1 && tb < 60.0 && completed &&
                      t_sim >= 30.0 && max_kappa <= 1e-6 && max_eta <= 1e-6 && infeasible == 0;
    return {pass, std::string(converged ? "converged" : "not converged") + " with " + std::to_string(added) +
                      " added cone(s), " + std::to_string(clusters) + " cluster(s), build " + fmt(tb) +
                      " s; " + fmt(t_sim) + " s simulation: max kappa " + fmt(max_kappa) +
                      ", max |omega|_inf - omega_max " + fmt(max_eta) + ", " + std::to_string(infeasible) +
                      " infeasible steps"};
}

double rel_err(const Vector& a, const Vector& b)
{
    double e = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        e = std::max(e, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(a[i])));
    return e;
}

// central differences of h against barrier_gradients, away from the singular band
double barrier_fd_error(const Barrier& b, const SecondOrderSystem& sys, const StateSampler& X, int n)
{
    double worst = 0.0;
    int done = 0;
    for (int t = 0; done < n && t < 100 * n; ++t) {
        Rng rng = stream_rng(808, static_cast<std::uint64_t>(t));
        const State s = X(rng);
        if (b.kind() == BarrierKind::HighOrder && std::abs(b.position()->value(s.q)) < 0.05) continue;
        ++done;
        const auto g = barrier_gradients(b, sys, s.q, s.v);
        const double e = 1e-6;
        Vector fq(s.q.size()), fv(s.v.size());
        for (Eigen::Index i = 0; i < s.q.size(); ++i) {
            Vector p = s.q, m = s.q;
            p[i] += e;
            m[i] -= e;
            fq[i] = (barrier_value(b, sys, p, s.v) - barrier_value(b, sys, m, s.v)) / (2 * e);
        }
        for (Eigen::Index i = 0; i < s.v.size(); ++i) {
            Vector p = s.v, m = s.v;
            p[i] += e;
            m[i] -= e;
            fv[i] = (barrier_value(b, sys, s.q, p) - barrier_value(b, sys, s.q, m)) / (2 * e);
        }
        worst = std::max({worst, rel_err(g.dq, fq), rel_err(g.dv, fv)});
        // position constraint gradient and Hessian
        if (b.kind() == BarrierKind::HighOrder) {
            const auto& k = *b.position();
            Vector gk(s.q.size());
            Matrix hk(s.q.size(), s.q.size());
            for (Eigen::Index i = 0; i < s.q.size(); ++i) {
                Vector p = s.q, m = s.q;
                p[i] += e;
                m[i] -= e;
                gk[i] = (k.value(p) - k.value(m)) / (2 * e);
                hk.col(i) = (k.gradient(p) - k.gradient(m)) / (2 * e);
            }
            worst = std::max(worst, rel_err(k.gradient(s.q), gk));
            const Matrix H = k.hessian(s.q);
            for (Eigen::Index i = 0; i < H.cols(); ++i) worst = std::max(worst, rel_err(H.col(i), hk.col(i)));
        }
    }
    return done == n ? worst : 1e9;
}

Outcome criterion8()
{
    const auto t0 = Clock::now();
    std::string d;
    bool pass = true;
    DoubleIntegrator di2(2), di3(3);
    AttitudeSystem att;
    for (const SecondOrderSystem* sys : {static_cast<const SecondOrderSystem*>(&di2),
                                         static_cast<const SecondOrderSystem*>(&di3),
                                         static_cast<const SecondOrderSystem*>(&att)}) {
        const auto r = check_derivatives(*sys, 100, 9);
        pass = pass && r.pass && r.samples == 100 && r.max_error <= 1e-5;
        d += sys->name() + " " + fmt(r.max_error) + ", ";
    }
    // one scenario per constraint family
    for (const char* name : {"ex5", "attitude_coarse"}) {
        const Scenario sc = build_scenario(load_scenario(scenario_path(name)));
        const auto ctx = sc.context();
        const StateSampler X = [&](Rng& rng) { return ctx.grid.uniform(*sc.system, rng); };
        for (const auto& b : sc.barriers) {
            const double e = barrier_fd_error(b, *sc.system, X, 100);
            pass = pass && e <= 1e-5;
            d += b.label() + " " + fmt(e) + ", ";
        }
    }
    return {pass, "max relative error: " + d + fmt(since(t0)) + " s"};
}

Outcome criterion9()
{
    const auto t0 = Clock::now();
    const Scenario sc = build_scenario(load_scenario(scenario_path("ex5")));
    SimConfig cfg = sc.config.simulation->config;
    std::vector<double> dts{4e-3, 2e-3, 1e-3, 5e-4};
    std::vector<double> leak;
    for (double dt : dts) {
        cfg.dt = dt;
        cfg.log_stride = 1000000;
        const auto tr = simulate(cfg, sc.barriers, *sc.system, sc.safe_set, sc.U);
        leak.push_back(tr.max_h);
    }
    std::string d = "max h by dt:";
    for (std::size_t i = 0; i < dts.size(); ++i) d += " " + fmt(dts[i]) + ":" + fmt(leak[i]);
    bool pass = true;
    int ratios = 0;
    d += "; ratios";
    for (std::size_t i = 0; i + 1 < dts.size(); ++i) {
        if (!(leak[i] > 0.0 && leak[i + 1] > 0.0)) continue;
        const double r = leak[i] / leak[i + 1];
        ++ratios;
        pass = pass && r >= 3.5;
        d += " " + fmt(r);
    }
    if (ratios == 0) {
        pass = false;
        d += " none: no boundary leakage at any dt";
    }
    return {pass, d + " (need >= 3.5); " + fmt(since(t0)) + " s"};
}

}  // namespace

int main(int argc, char** argv)
{
    bool strict = false;
    for (int i = 1; i < argc; ++i)
        if (std::strcmp(argv[i], "--strict") == 0) strict = true;

    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"1 example 1 infeasibility", criterion1},
        {"2 example 3 viability", criterion2},
        {"3 examples 4-5 pipeline", criterion3},
        {"4 OEP/QEP property suites", criterion4},
        {"5 constructive witnesses", criterion5},
        {"6 QP/LP oracle equivalence", criterion6},
        {"7 attitude case study", criterion7},
        {"8 gradient verification", criterion8},
        {"9 sampled-data convergence order", criterion9}};

    int failed = 0, errors = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
            ++errors;
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS " : "FAIL ") << "criterion " << name << ": " << o.detail << std::endl;
    }
    std::cout << criteria.size() - static_cast<std::size_t>(failed) << "/" << criteria.size()
              << " criteria pass" << std::endl;
    if (errors > 0) return 2;
    return strict && failed > 0 ? 1 : 0;
}
