#include "cbfcomp_cli/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "cbfcomp/feasibility.hpp"

namespace cbfcomp::cli {

namespace {

using json = nlohmann::json;

std::vector<double> to_std(const Vector& v)
{
    return std::vector<double>(v.data(), v.data() + v.size());
}

std::string fmt(const Vector& v)
{
    std::ostringstream os;
    os << std::setprecision(10) << '(';
    for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
    os << ')';
    return os.str();
}

void write_json(const RunOptions& opt, const std::string& name, const json& j)
{
    if (opt.out_dir.empty()) return;
    std::filesystem::create_directories(opt.out_dir);
    std::ofstream f(std::filesystem::path(opt.out_dir) / name);
    if (!f) throw std::runtime_error("cannot write " + name + " in " + opt.out_dir);
    f << j.dump(2) << '\n';
}

std::vector<Barrier> load_barriers(const Scenario& sc, const RunOptions& opt)
{
    if (opt.barriers_path.empty()) return sc.barriers;
    std::ifstream in(opt.barriers_path);
    if (!in) throw ConfigError("cannot open barrier file '" + opt.barriers_path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(opt.barriers_path + ": " + e.what());
    }
    auto out = barriers_from_json(j);
    for (const auto& b : out) {
        const int d = b.kind() == BarrierKind::HighOrder ? b.position()->dimension() : b.velocity()->dimension();
        const int want = b.kind() == BarrierKind::HighOrder ? sc.system->n1() : sc.system->n2();
        if (d != want) throw ConfigError("barrier " + b.label() + " does not match the system dimensions");
    }
    return out;
}

}  // namespace

ScenarioConfig apply_overrides(ScenarioConfig cfg, const RunOptions& opt)
{
    if (opt.seed) {
        cfg.algorithm.options.seed = *opt.seed;
        cfg.check_sets.seeds = {*opt.seed};
    }
    if (opt.grid_scale) {
        if (!(*opt.grid_scale > 0.0)) throw ConfigError("--grid-scale must be positive");
        cfg.algorithm.grid = cfg.algorithm.grid.refined(*opt.grid_scale);
    }
    return cfg;
}

State parse_state_arg(const std::string& text, int n1, int n2)
{
    const auto semi = text.find(';');
    if (semi == std::string::npos) throw ConfigError("--state: expected 'q1,...;v1,...'");
    auto parse = [](const std::string& s) {
        std::vector<double> out;
        std::stringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                std::size_t used = 0;
                out.push_back(std::stod(tok, &used));
                if (tok.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw ConfigError("--state: bad number '" + tok + "'");
            }
        }
        return out;
    };
    const auto q = parse(text.substr(0, semi));
    const auto v = parse(text.substr(semi + 1));
    if (static_cast<int>(q.size()) != n1 || static_cast<int>(v.size()) != n2)
        throw ConfigError("--state: dimension mismatch (need " + std::to_string(n1) + " positions and " +
                          std::to_string(n2) + " velocities)");
    return {Eigen::Map<const Vector>(q.data(), n1), Eigen::Map<const Vector>(v.data(), n2)};
}

CommandResult cmd_check_sets(const ScenarioConfig& cfg, const RunOptions& opt, std::ostream& out)
{
    const Scenario sc = build_scenario(cfg);
    CommandResult res;
    json runs = json::array();
    int total = 0;
    out << "U  = " << sc.U.describe() << "\nU' = " << sc.U_inner.describe() << "\nproperty "
        << to_string(sc.property) << '\n';
    for (std::uint64_t seed : cfg.check_sets.seeds) {
        const ExtensionReport r =
            verify_extension_property(sc.U_inner, sc.U, sc.property, cfg.check_sets.trials, seed);
        total += r.violations;
        out << "seed " << seed << ": " << r.violations << " violations in " << r.trials
            << " trials, worst margin " << r.worst_margin << '\n';
        json run = {{"seed", seed}, {"trials", r.trials}, {"violations", r.violations},
                    {"worst_margin", r.worst_margin}};
        if (r.violations > 0) {
            out << "  witness point " << fmt(r.worst_point) << " from inputs";
            json inputs = json::array();
            for (const auto& w : r.worst_inputs) {
                out << ' ' << fmt(w);
                inputs.push_back(to_std(w));
            }
            out << '\n';
            run["witness_point"] = to_std(r.worst_point);
            run["witness_inputs"] = inputs;
        }
        runs.push_back(run);
    }
    res.report = {{"outer", sc.U.describe()},
                  {"inner", sc.U_inner.describe()},
                  {"property", to_string(sc.property)},
                  {"runs", runs},
                  {"violations", total},
                  {"pass", total == 0}};
    out << (total == 0 ? "PASS" : "FAIL") << '\n';
    write_json(opt, "check_sets.json", res.report);
    res.exit_code = total == 0 ? kExitOk : kExitFailure;
    return res;
}

CommandResult cmd_build(const ScenarioConfig& cfg, const RunOptions& opt, std::ostream& out)
{
    const Scenario sc = build_scenario(cfg);
    const ViabilityReport rep = build_viability_domain(sc.barriers, sc.context(), cfg.algorithm.family);
    CommandResult res;
    res.report = rep.to_json();
    res.report["scenario"] = cfg.name;
    for (std::size_t i = 0; i < rep.history.size(); ++i) {
        const auto& h = rep.history[i];
        out << "round " << i + 1 << ": " << h.samples << " boundary samples, " << h.infeasible
            << " infeasible, " << h.clusters.size() << " clusters";
        if (h.added) out << ", added " << (*h.added)["label"].get<std::string>() << " " << (*h.added)["family"].get<std::string>();
        out << '\n';
    }
    out << (rep.converged ? "CONVERGED" : "NOT CONVERGED") << " after " << rep.iterations
        << " added barrier(s) in " << std::setprecision(4) << rep.seconds << " s\n";
    if (!rep.failure.empty()) out << "failure: " << rep.failure << '\n';
    write_json(opt, "report.json", res.report);
    res.exit_code = rep.converged ? kExitOk : kExitFailure;
    return res;
}

CommandResult cmd_simulate(const ScenarioConfig& cfg, const RunOptions& opt, std::ostream& out)
{
    if (!cfg.simulation) throw ConfigError("simulate: config has no simulation block");
    const Scenario sc = build_scenario(cfg);
    const auto barriers = load_barriers(sc, opt);
    SimTrace tr;
    try {
        tr = simulate(cfg.simulation->config, barriers, *sc.system, sc.safe_set, sc.U);
    } catch (const SimulationError& e) {
        throw ConfigError(std::string("simulate: ") + e.what());
    }
    CommandResult res;
    res.report = trace_summary(tr);
    json meta = {{"config", to_json(cfg)}, {"summary", res.report}};
    meta["barriers"] = json::array();
    for (const auto& b : barriers) meta["barriers"].push_back(b.to_json());
    if (!opt.out_dir.empty()) {
        std::filesystem::create_directories(opt.out_dir);
        std::ofstream csv(std::filesystem::path(opt.out_dir) / "trace.csv");
        if (!csv) throw std::runtime_error("cannot write trace.csv");
        write_trace_csv(tr, csv);
        write_json(opt, "trace.json", meta);
    }
    out << tr.steps << " steps, " << tr.infeasible_steps << " infeasible, max h " << tr.max_h
        << ", max kappa " << tr.max_kappa << ", max eta " << tr.max_eta << '\n';
    if (!tr.diagnostic.empty()) out << tr.diagnostic << '\n';
    res.exit_code = tr.infeasible_steps == 0 ? kExitOk : kExitFailure;
    return res;
}

CommandResult cmd_feascheck(const ScenarioConfig& cfg, const RunOptions& opt, std::ostream& out)
{
    const Scenario sc = build_scenario(cfg);
    const auto barriers = load_barriers(sc, opt);
    const auto& sys = *sc.system;
    State s;
    if (opt.state)
        s = parse_state_arg(*opt.state, sys.n1(), sys.n2());
    else if (cfg.feascheck_state)
        s = *cfg.feascheck_state;
    else
        throw ConfigError("feascheck: no state given (--state or feascheck.state)");
    try {
        sys.require_state(s.q, s.v, "feascheck");
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    out << std::setprecision(10) << "state q=" << fmt(s.q) << " v=" << fmt(s.v) << '\n';
    json hs = json::array();
    for (std::size_t k = 0; k < barriers.size(); ++k) {
        const double h = barrier_value(barriers[k], sys, s.q, s.v);
        out << "h" << k + 1 << " [" << barriers[k].label() << "] = " << h << '\n';
        hs.push_back({{"index", k + 1}, {"label", barriers[k].label()}, {"h", h}});
    }
    const auto act = active_set(barriers, sys, s.q, s.v, cfg.algorithm.options.eps_active);
    out << "active {";
    json active = json::array();
    for (std::size_t i = 0; i < act.size(); ++i) {
        out << (i ? "," : "") << act[i] + 1;
        active.push_back(act[i] + 1);
    }
    out << "}\n";

    std::vector<CbfRow> rows;
    json rj = json::array();
    for (int k : act) {
        const CbfRow r = cbf_row(barriers[static_cast<std::size_t>(k)], sys, s.q, s.v);
        out << "row " << k + 1 << ": A=" << fmt(r.A) << " b=" << r.b << " alpha_term=" << r.alpha_term << '\n';
        rj.push_back({{"index", k + 1}, {"A", to_std(r.A)}, {"b", r.b}, {"alpha_term", r.alpha_term}});
        rows.push_back(r);
    }
    const auto w = lp_feasible(rows, sc.U, RhsMode::Nagumo);
    const auto all = cbf_rows(barriers, sys, s.q, s.v);
    const auto w_all = lp_feasible(all, sc.U, RhsMode::Normal);
    out << (w ? "FEASIBLE" : "INFEASIBLE") << '\n';
    if (w) out << "witness u=" << fmt(*w) << '\n';
    out << "all rows (with alpha terms): " << (w_all ? "feasible" : "infeasible") << '\n';

    CommandResult res;
    res.report = {{"q", to_std(s.q)},       {"v", to_std(s.v)},   {"h", hs},
                  {"active", active},       {"rows", rj},         {"verdict", w ? "FEASIBLE" : "INFEASIBLE"},
                  {"all_rows_feasible", w_all.has_value()}};
    if (w) res.report["witness"] = to_std(*w);
    write_json(opt, "feascheck.json", res.report);
    res.exit_code = w ? kExitOk : kExitFailure;
    return res;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Composition of control barrier functions under input bounds"};
    app.require_subcommand(1);
    std::string config;
    RunOptions opt;
    std::uint64_t seed = 0;
    double scale = 1.0;
    std::string state;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "scenario file (JSON)")->required();
        sub->add_option("--out", opt.out_dir, "output directory");
        sub->add_option("--seed", seed, "override the configured seed");
        sub->add_option("--grid-scale", scale, "scale every sampling density");
    };
    auto* check = app.add_subcommand("check-sets", "verify the extension property of U' in U");
    auto* build = app.add_subcommand("build", "grow the barrier set into a viability domain");
    auto* sim = app.add_subcommand("simulate", "closed-loop simulation under the safety QP");
    auto* feas = app.add_subcommand("feascheck", "barrier values, active rows and LP verdict at a state");
    for (auto* s : {check, build, sim, feas}) add_common(s);
    sim->add_option("--barriers", opt.barriers_path, "barrier file (build report)");
    feas->add_option("--barriers", opt.barriers_path, "barrier file (build report)");
    feas->add_option("--state", state, "state as 'q1,q2,...;v1,v2,...'");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitValidation;
    }

    for (auto* s : {check, build, sim, feas}) {
        if (s->count("--seed")) opt.seed = seed;
        if (s->count("--grid-scale")) opt.grid_scale = scale;
    }
    if (feas->count("--state")) opt.state = state;

    try {
        const ScenarioConfig cfg = apply_overrides(load_scenario(config), opt);
        CommandResult r;
        if (*check)
            r = cmd_check_sets(cfg, opt, out);
        else if (*build)
            r = cmd_build(cfg, opt, out);
        else if (*sim)
            r = cmd_simulate(cfg, opt, out);
        else
            r = cmd_feascheck(cfg, opt, out);
        return r.exit_code;
    } catch (const ConfigError& e) {
        err << "validation error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace cbfcomp::cli
