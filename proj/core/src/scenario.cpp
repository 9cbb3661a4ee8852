#include "cbfcomp/scenario.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "cbfcomp/attitude.hpp"

namespace cbfcomp {

namespace {

using json = nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where)
{
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!ok.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where)
{
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

template <class T>
T require(const json& j, const char* key, const std::string& where)
{
    if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
    return get_or<T>(j, key, T{}, where);
}

Vector to_vector(const std::vector<double>& x)
{
    Vector v(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) v[static_cast<Eigen::Index>(i)] = x[i];
    return v;
}

std::vector<double> to_std(const Vector& v)
{
    return std::vector<double>(v.data(), v.data() + v.size());
}

ControlSetSpec parse_set(const json& j, const std::string& where)
{
    check_keys(j, {"type", "gamma", "weights", "rows", "offsets"}, where);
    ControlSetSpec s;
    s.type = require<std::string>(j, "type", where);
    s.gamma = get_or<double>(j, "gamma", 1.0, where);
    s.weights = get_or<std::vector<double>>(j, "weights", {}, where);
    s.rows = get_or<std::vector<std::vector<double>>>(j, "rows", {}, where);
    s.offsets = get_or<std::vector<double>>(j, "offsets", {}, where);
    static const std::set<std::string> kinds{"inf_ball", "one_ball", "two_ball", "weighted_inf_ball",
                                             "weighted_one_ball", "polytope"};
    if (!kinds.count(s.type)) throw ConfigError(where + ": unknown set type '" + s.type + "'");
    return s;
}

json set_json(const ControlSetSpec& s)
{
    json j = {{"type", s.type}};
    if (s.type == "polytope") {
        j["rows"] = s.rows;
        j["offsets"] = s.offsets;
    } else {
        j["gamma"] = s.gamma;
        if (s.type.rfind("weighted", 0) == 0) j["weights"] = s.weights;
    }
    return j;
}

std::vector<GridAxis> parse_axes(const json& j, const std::string& where)
{
    if (!j.is_array()) throw ConfigError(where + ": expected an array of axes");
    std::vector<GridAxis> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string w = where + "[" + std::to_string(i) + "]";
        check_keys(j[i], {"lo", "hi", "count"}, w);
        GridAxis a;
        a.lo = require<double>(j[i], "lo", w);
        a.hi = get_or<double>(j[i], "hi", a.lo, w);
        a.count = get_or<int>(j[i], "count", 1, w);
        if (a.count < 1) throw ConfigError(w + ": count must be >= 1");
        if (a.count > 1 && !(a.hi > a.lo)) throw ConfigError(w + ": need hi > lo");
        out.push_back(a);
    }
    return out;
}

json axes_json(const std::vector<GridAxis>& axes)
{
    json j = json::array();
    for (const auto& a : axes) j.push_back({{"lo", a.lo}, {"hi", a.hi}, {"count", a.count}});
    return j;
}

AlgorithmSpec parse_algorithm(const json& j)
{
    const std::string w = "algorithm";
    check_keys(j, {"grid", "eps_active", "newton_tol", "newton_iterations", "pair_scope",
                   "position_first", "cluster_eps", "velocity_scale", "max_iterations",
                   "removal_margin", "scbf_trials", "interference_seeds", "probe_samples", "threads",
                   "seed", "family"},
               w);
    AlgorithmSpec a;
    if (j.contains("grid")) {
        const json& g = j["grid"];
        check_keys(g, {"q", "v", "halton_budget"}, w + ".grid");
        a.grid.q_axes = parse_axes(g.value("q", json::array()), w + ".grid.q");
        a.grid.v_axes = parse_axes(g.value("v", json::array()), w + ".grid.v");
        a.grid.halton_budget = get_or<int>(g, "halton_budget", 0, w + ".grid");
        if (a.grid.halton_budget < 0) throw ConfigError("algorithm.grid.halton_budget must be >= 0");
    }
    auto& o = a.options;
    o.eps_active = get_or<double>(j, "eps_active", o.eps_active, w);
    o.newton_tol = get_or<double>(j, "newton_tol", o.newton_tol, w);
    o.newton_iterations = get_or<int>(j, "newton_iterations", o.newton_iterations, w);
    const std::string scope = get_or<std::string>(j, "pair_scope", "all", w);
    if (scope == "all")
        o.pair_scope = PairScope::All;
    else if (scope == "position_only")
        o.pair_scope = PairScope::PositionOnly;
    else
        throw ConfigError("algorithm.pair_scope: expected all or position_only");
    o.position_first = get_or<bool>(j, "position_first", o.position_first, w);
    o.cluster_eps = get_or<double>(j, "cluster_eps", o.cluster_eps, w);
    o.velocity_scale = get_or<double>(j, "velocity_scale", o.velocity_scale, w);
    o.max_iterations = get_or<int>(j, "max_iterations", o.max_iterations, w);
    o.removal_margin = get_or<double>(j, "removal_margin", o.removal_margin, w);
    o.scbf_trials = get_or<int>(j, "scbf_trials", o.scbf_trials, w);
    o.interference_seeds = get_or<int>(j, "interference_seeds", o.interference_seeds, w);
    o.probe_samples = get_or<int>(j, "probe_samples", o.probe_samples, w);
    o.threads = get_or<unsigned>(j, "threads", o.threads, w);
    o.seed = get_or<std::uint64_t>(j, "seed", o.seed, w);
    if (!(o.eps_active > 0.0)) throw ConfigError("algorithm.eps_active must be positive");
    if (o.max_iterations < 0) throw ConfigError("algorithm.max_iterations must be >= 0");

    if (j.contains("family")) {
        const json& f = j["family"];
        const std::string wf = w + ".family";
        const std::string type = require<std::string>(f, "type", wf);
        if (type == "half_plane") {
            check_keys(f, {"type", "angle_step_deg", "offset_step", "offset_min", "coefficient_fraction"}, wf);
            a.family.kind = CbfFamily::Kind::HalfPlane;
            auto& h = a.family.half_plane;
            h.angle_step_deg = get_or<double>(f, "angle_step_deg", h.angle_step_deg, wf);
            h.offset_step = get_or<double>(f, "offset_step", h.offset_step, wf);
            h.offset_min = get_or<double>(f, "offset_min", h.offset_min, wf);
            h.coefficient_fraction = get_or<double>(f, "coefficient_fraction", h.coefficient_fraction, wf);
        } else if (type == "cone") {
            check_keys(f, {"type", "a_hat", "axis_count", "theta_step_deg", "theta_min_deg",
                           "theta_max_deg", "beta"},
                       wf);
            a.family.kind = CbfFamily::Kind::Cone;
            auto& c = a.family.cone;
            c.a_hat = to_vector(require<std::vector<double>>(f, "a_hat", wf));
            c.axis_count = get_or<int>(f, "axis_count", c.axis_count, wf);
            c.theta_step_deg = get_or<double>(f, "theta_step_deg", c.theta_step_deg, wf);
            c.theta_min_deg = get_or<double>(f, "theta_min_deg", c.theta_min_deg, wf);
            c.theta_max_deg = get_or<double>(f, "theta_max_deg", c.theta_max_deg, wf);
            c.beta = require<double>(f, "beta", wf);
        } else {
            throw ConfigError(wf + ".type: expected half_plane or cone");
        }
    }
    return a;
}

json algorithm_json(const AlgorithmSpec& a)
{
    const auto& o = a.options;
    json j = {{"grid", grid_to_json(a.grid)},
              {"eps_active", o.eps_active},
              {"newton_tol", o.newton_tol},
              {"newton_iterations", o.newton_iterations},
              {"pair_scope", o.pair_scope == PairScope::All ? "all" : "position_only"},
              {"position_first", o.position_first},
              {"cluster_eps", o.cluster_eps},
              {"velocity_scale", o.velocity_scale},
              {"max_iterations", o.max_iterations},
              {"removal_margin", o.removal_margin},
              {"scbf_trials", o.scbf_trials},
              {"interference_seeds", o.interference_seeds},
              {"probe_samples", o.probe_samples},
              {"threads", o.threads},
              {"seed", o.seed}};
    if (a.family.kind == CbfFamily::Kind::HalfPlane) {
        const auto& h = a.family.half_plane;
        j["family"] = {{"type", "half_plane"},
                       {"angle_step_deg", h.angle_step_deg},
                       {"offset_step", h.offset_step},
                       {"offset_min", h.offset_min},
                       {"coefficient_fraction", h.coefficient_fraction}};
    } else {
        const auto& c = a.family.cone;
        j["family"] = {{"type", "cone"},
                       {"a_hat", to_std(c.a_hat)},
                       {"axis_count", c.axis_count},
                       {"theta_step_deg", c.theta_step_deg},
                       {"theta_min_deg", c.theta_min_deg},
                       {"theta_max_deg", c.theta_max_deg},
                       {"beta", c.beta}};
    }
    return j;
}

State parse_state(const json& j, const std::string& where)
{
    check_keys(j, {"q", "v"}, where);
    return {to_vector(require<std::vector<double>>(j, "q", where)),
            to_vector(require<std::vector<double>>(j, "v", where))};
}

json state_json(const State& s)
{
    return {{"q", to_std(s.q)}, {"v", to_std(s.v)}};
}

SimulationSpec parse_simulation(const json& j)
{
    const std::string w = "simulation";
    check_keys(j, {"dt", "t_final", "initial", "nominal", "log_stride", "slack_weight", "initial_tol"}, w);
    SimulationSpec s;
    auto& c = s.config;
    c.dt = get_or<double>(j, "dt", c.dt, w);
    c.t_final = get_or<double>(j, "t_final", c.t_final, w);
    c.log_stride = get_or<int>(j, "log_stride", c.log_stride, w);
    c.initial_tol = get_or<double>(j, "initial_tol", c.initial_tol, w);
    if (!(c.dt > 0.0)) throw ConfigError("simulation.dt must be positive");
    if (!(c.t_final >= 0.0)) throw ConfigError("simulation.t_final must be >= 0");
    if (c.log_stride < 1) throw ConfigError("simulation.log_stride must be >= 1");
    c.initial = parse_state(j.value("initial", json::object()), w + ".initial");
    if (j.contains("slack_weight")) {
        const double J = get_or<double>(j, "slack_weight", kDefaultSlackWeight, w);
        if (!(J > 0.0)) throw ConfigError("simulation.slack_weight must be positive");
        c.slack_weights = Vector::Constant(1, J);
    }
    if (j.contains("nominal")) {
        const json& n = j["nominal"];
        const std::string wn = w + ".nominal";
        check_keys(n, {"type", "u", "q_target", "v_target", "kp", "kd"}, wn);
        const std::string type = require<std::string>(n, "type", wn);
        auto& nc = c.nominal;
        if (type == "zero") {
            nc.kind = NominalController::Kind::Zero;
        } else if (type == "constant") {
            nc.kind = NominalController::Kind::Constant;
            nc.u = to_vector(require<std::vector<double>>(n, "u", wn));
        } else if (type == "proportional") {
            nc.kind = NominalController::Kind::Proportional;
            nc.q_target = to_vector(require<std::vector<double>>(n, "q_target", wn));
            nc.v_target = to_vector(get_or<std::vector<double>>(n, "v_target", {}, wn));
            nc.kp = get_or<double>(n, "kp", nc.kp, wn);
            nc.kd = get_or<double>(n, "kd", nc.kd, wn);
        } else {
            throw ConfigError(wn + ".type: expected zero, constant or proportional");
        }
    }
    return s;
}

json simulation_json(const SimulationSpec& s)
{
    const auto& c = s.config;
    json j = {{"dt", c.dt},
              {"t_final", c.t_final},
              {"initial", state_json(c.initial)},
              {"nominal", c.nominal.to_json()},
              {"log_stride", c.log_stride},
              {"initial_tol", c.initial_tol}};
    if (c.slack_weights.size()) j["slack_weight"] = c.slack_weights[0];
    return j;
}

ConstraintSpec parse_constraint(const json& j, std::size_t index)
{
    const std::string w = "constraints[" + std::to_string(index) + "]";
    ConstraintSpec s;
    s.type = require<std::string>(j, "type", w);
    s.label = get_or<std::string>(j, "label", "", w);
    s.alpha = get_or<double>(j, "alpha", 1.0, w);
    if (!(s.alpha > 0.0)) throw ConfigError(w + ".alpha must be positive");
    if (s.type == "half_plane") {
        check_keys(j, {"type", "label", "normal", "offset", "c", "alpha"}, w);
        s.normal = require<std::vector<double>>(j, "normal", w);
        s.offset = get_or<double>(j, "offset", 0.0, w);
        if (j.contains("c")) s.c = get_or<double>(j, "c", 0.0, w);
        if (s.c && !(*s.c > 0.0)) throw ConfigError(w + ".c must be positive");
    } else if (s.type == "cone") {
        check_keys(j, {"type", "label", "a_hat", "b_hat", "theta_deg", "beta", "alpha"}, w);
        s.a_hat = require<std::vector<double>>(j, "a_hat", w);
        s.b_hat = require<std::vector<double>>(j, "b_hat", w);
        s.theta_deg = require<double>(j, "theta_deg", w);
        s.beta = require<double>(j, "beta", w);
        if (!(*s.beta > 0.0)) throw ConfigError(w + ".beta must be positive");
    } else if (s.type == "rate_limit") {
        check_keys(j, {"type", "label", "omega_max", "alpha"}, w);
        s.omega_max = require<double>(j, "omega_max", w);
        if (!(s.omega_max > 0.0)) throw ConfigError(w + ".omega_max must be positive");
    } else {
        throw ConfigError(w + ".type: expected half_plane, cone or rate_limit");
    }
    if (s.label.empty()) s.label = "k" + std::to_string(index + 1);
    return s;
}

json constraint_json(const ConstraintSpec& s)
{
    json j = {{"type", s.type}, {"label", s.label}, {"alpha", s.alpha}};
    if (s.type == "half_plane") {
        j["normal"] = s.normal;
        j["offset"] = s.offset;
        if (s.c) j["c"] = *s.c;
    } else if (s.type == "cone") {
        j["a_hat"] = s.a_hat;
        j["b_hat"] = s.b_hat;
        j["theta_deg"] = s.theta_deg;
        j["beta"] = *s.beta;
    } else {
        j["omega_max"] = s.omega_max;
    }
    return j;
}

std::vector<double> unit3(const std::vector<double>& x, const std::string& where)
{
    if (x.size() != 3) throw ConfigError(where + ": expected 3 entries");
    return x;
}

}  // namespace

json grid_to_json(const GridSpec& g)
{
    return {{"q", axes_json(g.q_axes)}, {"v", axes_json(g.v_axes)}, {"halton_budget", g.halton_budget}};
}

ScenarioConfig parse_scenario(const json& doc)
{
    check_keys(doc, {"schema_version", "name", "description", "system", "control_set", "inner_set",
                     "constraints", "algorithm", "check_sets", "simulation", "feascheck"},
               "scenario");
    ScenarioConfig c;
    c.schema_version = require<int>(doc, "schema_version", "scenario");
    if (c.schema_version != kSchemaVersion)
        throw ConfigError("unsupported schema_version " + std::to_string(c.schema_version));
    c.name = get_or<std::string>(doc, "name", "", "scenario");
    c.description = get_or<std::string>(doc, "description", "", "scenario");

    const json& sys = doc.at("system");
    check_keys(sys, {"type", "dim"}, "system");
    c.system = require<std::string>(sys, "type", "system");
    if (c.system == "double_integrator") {
        c.dim = get_or<int>(sys, "dim", 2, "system");
        if (c.dim < 1) throw ConfigError("system.dim must be >= 1");
    } else if (c.system == "attitude") {
        if (sys.contains("dim")) throw ConfigError("system.dim is not used by attitude");
        c.dim = 3;
    } else {
        throw ConfigError("system.type: expected double_integrator or attitude");
    }

    if (!doc.contains("control_set")) throw ConfigError("scenario: missing key 'control_set'");
    c.control_set = parse_set(doc["control_set"], "control_set");

    if (doc.contains("inner_set")) {
        const json& in = doc["inner_set"];
        check_keys(in, {"rule", "property", "set", "gamma_star_samples"}, "inner_set");
        c.inner_set.rule = get_or<std::string>(in, "rule", "auto_qep", "inner_set");
        c.inner_set.property = get_or<std::string>(in, "property", c.inner_set.rule == "auto_oep" ? "oep" : "qep", "inner_set");
        c.inner_set.gamma_star_samples = get_or<int>(in, "gamma_star_samples", 20000, "inner_set");
        if (in.contains("set")) c.inner_set.set = parse_set(in["set"], "inner_set.set");
        const auto& r = c.inner_set.rule;
        if (r != "auto_qep" && r != "auto_oep" && r != "explicit" && r != "outer")
            throw ConfigError("inner_set.rule: expected auto_qep, auto_oep, explicit or outer");
        if (r == "explicit" && !c.inner_set.set) throw ConfigError("inner_set: explicit rule needs 'set'");
        if (r != "explicit" && c.inner_set.set) throw ConfigError("inner_set: 'set' only with explicit rule");
        if (c.inner_set.property != "oep" && c.inner_set.property != "qep")
            throw ConfigError("inner_set.property: expected oep or qep");
        if ((r == "auto_qep" && c.inner_set.property != "qep") || (r == "auto_oep" && c.inner_set.property != "oep"))
            throw ConfigError("inner_set.property contradicts the rule");
    }

    const json cons = doc.value("constraints", json::array());
    if (!cons.is_array()) throw ConfigError("constraints: expected an array");
    std::set<std::string> labels;
    for (std::size_t i = 0; i < cons.size(); ++i) {
        c.constraints.push_back(parse_constraint(cons[i], i));
        if (!labels.insert(c.constraints.back().label).second)
            throw ConfigError("constraints: duplicate label '" + c.constraints.back().label + "'");
    }

    if (doc.contains("algorithm")) c.algorithm = parse_algorithm(doc["algorithm"]);
    if (doc.contains("check_sets")) {
        const json& cs = doc["check_sets"];
        check_keys(cs, {"trials", "seeds"}, "check_sets");
        c.check_sets.trials = get_or<int>(cs, "trials", 10000, "check_sets");
        c.check_sets.seeds = get_or<std::vector<std::uint64_t>>(cs, "seeds", {0}, "check_sets");
        if (c.check_sets.trials < 1 || c.check_sets.seeds.empty())
            throw ConfigError("check_sets: need trials >= 1 and at least one seed");
    }
    if (doc.contains("simulation")) c.simulation = parse_simulation(doc["simulation"]);
    if (doc.contains("feascheck")) {
        check_keys(doc["feascheck"], {"state"}, "feascheck");
        c.feascheck_state = parse_state(doc["feascheck"].at("state"), "feascheck.state");
    }
    return c;
}

ScenarioConfig load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_scenario(doc);
}

json to_json(const ScenarioConfig& c)
{
    json j;
    j["schema_version"] = c.schema_version;
    j["name"] = c.name;
    j["description"] = c.description;
    j["system"] = c.system == "attitude" ? json{{"type", c.system}} : json{{"type", c.system}, {"dim", c.dim}};
    j["control_set"] = set_json(c.control_set);
    json in = {{"rule", c.inner_set.rule},
               {"property", c.inner_set.property},
               {"gamma_star_samples", c.inner_set.gamma_star_samples}};
    if (c.inner_set.set) in["set"] = set_json(*c.inner_set.set);
    j["inner_set"] = in;
    j["constraints"] = json::array();
    for (const auto& s : c.constraints) j["constraints"].push_back(constraint_json(s));
    j["algorithm"] = algorithm_json(c.algorithm);
    j["check_sets"] = {{"trials", c.check_sets.trials}, {"seeds", c.check_sets.seeds}};
    if (c.simulation) j["simulation"] = simulation_json(*c.simulation);
    if (c.feascheck_state) j["feascheck"] = {{"state", state_json(*c.feascheck_state)}};
    return j;
}

ControlSet build_control_set(const ControlSetSpec& s, int dim)
{
    try {
        if (s.type == "inf_ball") return ControlSet::inf_ball(dim, s.gamma);
        if (s.type == "one_ball") return ControlSet::one_ball(dim, s.gamma);
        if (s.type == "two_ball") return ControlSet::two_ball(dim, s.gamma);
        if (s.type == "weighted_inf_ball") return ControlSet::weighted_inf_ball(to_vector(s.weights), s.gamma);
        if (s.type == "weighted_one_ball") return ControlSet::weighted_one_ball(to_vector(s.weights), s.gamma);
        if (s.type == "polytope") {
            if (s.rows.empty() || s.rows.size() != s.offsets.size())
                throw ConfigError("polytope: rows and offsets must be nonempty and match");
            Matrix G(static_cast<Eigen::Index>(s.rows.size()), dim);
            for (std::size_t i = 0; i < s.rows.size(); ++i) {
                if (static_cast<int>(s.rows[i].size()) != dim) throw ConfigError("polytope: row width");
                for (int k = 0; k < dim; ++k) G(static_cast<Eigen::Index>(i), k) = s.rows[i][static_cast<std::size_t>(k)];
            }
            return ControlSet::polytope(G, to_vector(s.offsets));
        }
    } catch (const ControlSetError& e) {
        throw ConfigError(std::string("control set: ") + e.what());
    }
    throw ConfigError("unknown control set type '" + s.type + "'");
}

ControlSetSpec control_set_spec(const ControlSet& U)
{
    ControlSetSpec s;
    s.gamma = U.gamma();
    switch (U.kind()) {
    case SetKind::InfBall: s.type = "inf_ball"; break;
    case SetKind::OneBall: s.type = "one_ball"; break;
    case SetKind::TwoBall: s.type = "two_ball"; break;
    case SetKind::WeightedInfBall: s.type = "weighted_inf_ball"; s.weights = to_std(U.weights()); break;
    case SetKind::WeightedOneBall: s.type = "weighted_one_ball"; s.weights = to_std(U.weights()); break;
    case SetKind::Polytope:
        s.type = "polytope";
        for (Eigen::Index i = 0; i < U.rows().rows(); ++i) s.rows.push_back(to_std(U.rows().row(i).transpose()));
        s.offsets = to_std(U.offsets());
        break;
    }
    return s;
}

ViabilityContext Scenario::context() const
{
    return ViabilityContext{system.get(), safe_set, U, U_inner, config.algorithm.grid, config.algorithm.options,
                            property};
}

Scenario build_scenario(const ScenarioConfig& cfg)
{
    std::shared_ptr<const SecondOrderSystem> sys;
    if (cfg.system == "attitude")
        sys = std::make_shared<AttitudeSystem>();
    else
        sys = std::make_shared<DoubleIntegrator>(cfg.dim);
    const int m = sys->m();

    const ControlSet U = build_control_set(cfg.control_set, m);
    ControlSet U_inner = U;
    ExtensionKind property = cfg.inner_set.property == "oep" ? ExtensionKind::OEP : ExtensionKind::QEP;
    try {
        if (cfg.inner_set.rule == "auto_qep")
            U_inner = inner_qep_set(U, cfg.inner_set.gamma_star_samples);
        else if (cfg.inner_set.rule == "auto_oep")
            U_inner = inner_oep_set(U, cfg.inner_set.gamma_star_samples);
        else if (cfg.inner_set.rule == "explicit")
            U_inner = build_control_set(*cfg.inner_set.set, m);
    } catch (const ControlSetError& e) {
        throw ConfigError(std::string("inner_set: ") + e.what());
    }

    Scenario sc{cfg, sys, {}, U, U_inner, property, {}};
    for (const auto& s : cfg.constraints) {
        const std::string w = "constraint " + s.label;
        try {
            if (s.type == "half_plane") {
                if (static_cast<int>(s.normal.size()) != sys->n1()) throw ConfigError(w + ": normal size");
                auto k = std::make_shared<HalfPlaneConstraint>(to_vector(s.normal), s.offset, s.label);
                sc.safe_set.position.push_back(k);
                double c = 0.0;
                if (s.c) {
                    c = *s.c;
                } else {
                    const Barrier unit = Barrier::high_order(k, 1.0, s.alpha, s.label);
                    const Vector A = input_direction(unit, *sys, Vector::Zero(sys->n1()), Vector::Zero(sys->n2()));
                    c = 2.0 * U_inner.support(-A);
                }
                sc.barriers.push_back(Barrier::high_order(k, c, s.alpha, s.label));
            } else if (s.type == "cone") {
                if (cfg.system != "attitude") throw ConfigError(w + ": cones need the attitude system");
                auto k = std::make_shared<ConeConstraint>(to_vector(unit3(s.a_hat, w)), to_vector(unit3(s.b_hat, w)),
                                                          s.theta_deg * std::numbers::pi / 180.0, s.label);
                sc.safe_set.position.push_back(k);
                sc.barriers.push_back(Barrier::high_order(k, *s.beta, s.alpha, s.label));
            } else {
                for (const auto& e : rate_limit_constraints(s.omega_max, sys->n2())) {
                    sc.safe_set.velocity.push_back(e);
                    sc.barriers.push_back(Barrier::direct(e, s.alpha, e->label()));
                }
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::invalid_argument& e) {
            throw ConfigError(w + ": " + e.what());
        }
    }
    return sc;
}

Barrier barrier_from_json(const json& j)
{
    try {
        const std::string kind = j.at("kind").get<std::string>();
        const std::string label = j.value("label", "");
        const double alpha = j.value("alpha_slope", 1.0);
        const json& con = j.at("constraint");
        const std::string family = con.at("family").get<std::string>();
        const std::string clabel = con.value("label", label);
        const json& p = con.at("params");
        if (kind == "high_order") {
            PositionPtr k;
            if (family == "half_plane") {
                k = std::make_shared<HalfPlaneConstraint>(to_vector(p.at("normal").get<std::vector<double>>()),
                                                          p.at("offset").get<double>(), clabel);
            } else if (family == "cone") {
                k = std::make_shared<ConeConstraint>(to_vector(p.at("a_hat").get<std::vector<double>>()),
                                                     to_vector(p.at("b_hat").get<std::vector<double>>()),
                                                     p.at("theta_deg").get<double>() * std::numbers::pi / 180.0,
                                                     clabel);
            } else if (family == "quadratic") {
                const auto rows = p.at("matrix").get<std::vector<std::vector<double>>>();
                Matrix P(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    if (rows[r].size() != rows.size()) throw ConfigError("quadratic matrix must be square");
                    for (std::size_t c = 0; c < rows.size(); ++c)
                        P(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
                }
                k = std::make_shared<QuadraticFormConstraint>(P, clabel);
            } else {
                throw ConfigError("unknown position family '" + family + "'");
            }
            return Barrier::high_order(k, j.at("c").get<double>(), alpha, label);
        }
        if (kind == "direct") {
            if (family != "affine_velocity") throw ConfigError("unknown velocity family '" + family + "'");
            auto e = std::make_shared<AffineVelocityConstraint>(
                to_vector(p.at("direction").get<std::vector<double>>()), p.at("offset").get<double>(), clabel);
            return Barrier::direct(e, alpha, label);
        }
        throw ConfigError("unknown barrier kind '" + kind + "'");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("barrier: ") + e.what());
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("barrier: ") + e.what());
    }
}

std::vector<Barrier> barriers_from_json(const json& j)
{
    const json* arr = &j;
    if (j.is_object()) {
        if (!j.contains("final_barriers")) throw ConfigError("barrier file: missing final_barriers");
        arr = &j["final_barriers"];
    }
    if (!arr->is_array()) throw ConfigError("barrier file: expected an array");
    std::vector<Barrier> out;
    for (const auto& b : *arr) out.push_back(barrier_from_json(b));
    return out;
}

}  // namespace cbfcomp
