#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cbfcomp/scenario.hpp"
#include "cbfcomp_cli/commands.hpp"

using namespace cbfcomp;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

std::string scenario_path(const std::string& name)
{
    return std::string(CBFCOMP_SCENARIO_DIR) + "/" + name + ".json";
}

json scenario_json(const std::string& name)
{
    std::ifstream in(scenario_path(name));
    return json::parse(in);
}

fs::path scratch_dir(const std::string& name)
{
    const fs::path p = fs::path(testing::TempDir()) / ("cbfcomp_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string write_config(const json& j, const std::string& name)
{
    const fs::path p = scratch_dir(name) / "config.json";
    std::ofstream(p) << j.dump(2);
    return p.string();
}

struct CliRun {
    int code;
    std::string out, err;
};

CliRun run_cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "cbfcomp");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

}  // namespace

TEST(Scenario, ShippedConfigsRoundTrip)
{
    for (const auto& entry : fs::directory_iterator(CBFCOMP_SCENARIO_DIR)) {
        if (entry.path().extension() != ".json") continue;
        SCOPED_TRACE(entry.path().string());
        const ScenarioConfig cfg = load_scenario(entry.path().string());
        const json once = to_json(cfg);
        EXPECT_EQ(to_json(parse_scenario(once)), once);
        EXPECT_NO_THROW(build_scenario(cfg));
    }
}

TEST(Scenario, RejectsUnknownKeysAndBadValues)
{
    json j = scenario_json("ex3");
    j["algorithm"]["gird"] = json::object();
    EXPECT_THROW(parse_scenario(j), ConfigError);

    j = scenario_json("ex3");
    j["constraints"][0]["nromal"] = {1, 0};
    EXPECT_THROW(parse_scenario(j), ConfigError);

    j = scenario_json("ex3");
    j["schema_version"] = 99;
    EXPECT_THROW(parse_scenario(j), ConfigError);

    j = scenario_json("ex3");
    j["control_set"]["gamma"] = -1.0;
    EXPECT_THROW(build_scenario(parse_scenario(j)), ConfigError);

    j = scenario_json("ex3");
    j["constraints"][0]["normal"] = {1, 0, 0};
    EXPECT_THROW(build_scenario(parse_scenario(j)), ConfigError);
}

TEST(Scenario, BarrierJsonRoundTrip)
{
    const Scenario sc = build_scenario(load_scenario(scenario_path("attitude_coarse")));
    for (const auto& b : sc.barriers) {
        const Barrier back = barrier_from_json(b.to_json());
        EXPECT_EQ(back.to_json(), b.to_json());
        Rng rng(3);
        for (int t = 0; t < 20; ++t) {
            const Vector q = random_unit_quaternion(rng);
            const Vector v = 0.1 * random_unit_vector(rng, 3);
            EXPECT_DOUBLE_EQ(barrier_value(back, *sc.system, q, v), barrier_value(b, *sc.system, q, v));
        }
    }
    json wrapped = {{"final_barriers", json::array()}};
    for (const auto& b : sc.barriers) wrapped["final_barriers"].push_back(b.to_json());
    EXPECT_EQ(barriers_from_json(wrapped).size(), sc.barriers.size());
}

TEST(StateArg, Parsing)
{
    const State s = cli::parse_state_arg("-0.5, 0;1,0", 2, 2);
    EXPECT_DOUBLE_EQ(s.q[0], -0.5);
    EXPECT_DOUBLE_EQ(s.v[0], 1.0);
    EXPECT_THROW(cli::parse_state_arg("1,2,3;1,2", 2, 2), ConfigError);
    EXPECT_THROW(cli::parse_state_arg("1,x;1,2", 2, 2), ConfigError);
    EXPECT_THROW(cli::parse_state_arg("1,2", 2, 2), ConfigError);
}

TEST(Cli, FeascheckExample1Infeasible)
{
    const auto r = run_cli({"feascheck", "--config", scenario_path("ex1")});
    EXPECT_EQ(r.code, cli::kExitFailure);
    EXPECT_NE(r.out.find("active {1,2}"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("INFEASIBLE"), std::string::npos);
}

TEST(Cli, FeascheckExample3Feasible)
{
    const auto dir = scratch_dir("feas3");
    const auto r = run_cli({"feascheck", "--config", scenario_path("ex3"), "--out", dir.string()});
    EXPECT_EQ(r.code, cli::kExitOk);
    EXPECT_NE(r.out.find("FEASIBLE"), std::string::npos);
    EXPECT_EQ(r.out.find("INFEASIBLE"), std::string::npos);
    EXPECT_NE(r.out.find("witness u="), std::string::npos);
    std::ifstream in(dir / "feascheck.json");
    const json j = json::parse(in);
    EXPECT_EQ(j.at("verdict"), "FEASIBLE");
    EXPECT_EQ(j.at("active"), json::array({1, 2}));
}

TEST(Cli, FeascheckInteriorHasEmptyActiveSet)
{
    const auto r = run_cli({"feascheck", "--config", scenario_path("ex1"), "--state", "-2,0;0,0"});
    EXPECT_EQ(r.code, cli::kExitOk);
    EXPECT_NE(r.out.find("active {}"), std::string::npos) << r.out;
}

TEST(Cli, ValidationErrorsExitTwo)
{
    EXPECT_EQ(run_cli({"feascheck", "--config", "/nonexistent/x.json"}).code, cli::kExitValidation);
    EXPECT_EQ(run_cli({"feascheck", "--config", scenario_path("ex1"), "--state", "1,2,3"}).code,
              cli::kExitValidation);
    EXPECT_EQ(run_cli({"bogus"}).code, cli::kExitValidation);
    EXPECT_EQ(run_cli({"build"}).code, cli::kExitValidation);
    EXPECT_EQ(run_cli({"simulate", "--config", scenario_path("ex3")}).code, cli::kExitValidation);
    EXPECT_EQ(run_cli({"build", "--config", scenario_path("ex3"), "--grid-scale", "-1"}).code,
              cli::kExitValidation);
    json j = scenario_json("ex3");
    j["extra"] = 1;
    EXPECT_EQ(run_cli({"build", "--config", write_config(j, "bad")}).code, cli::kExitValidation);
}

TEST(Cli, CheckSetsPassesAndInflatedSetFails)
{
    EXPECT_EQ(run_cli({"check-sets", "--config", scenario_path("ex3")}).code, cli::kExitOk);
    json j = scenario_json("ex3");
    j["inner_set"] = {{"rule", "explicit"},
                      {"property", "qep"},
                      {"set", {{"type", "one_ball"}, {"gamma", 0.95}}}};
    j["check_sets"] = {{"trials", 2000}, {"seeds", {0}}};
    const auto r = run_cli({"check-sets", "--config", write_config(j, "inflated")});
    EXPECT_EQ(r.code, cli::kExitFailure);
    EXPECT_NE(r.out.find("FAIL"), std::string::npos) << r.out;
}

TEST(Cli, BuildWritesReportAndSimulateUsesIt)
{
    const auto dir = scratch_dir("build4");
    const auto b = run_cli({"build", "--config", scenario_path("ex4"), "--out", dir.string()});
    EXPECT_EQ(b.code, cli::kExitOk) << b.out << b.err;
    ASSERT_TRUE(fs::exists(dir / "report.json"));
    std::ifstream in(dir / "report.json");
    const json rep = json::parse(in);
    EXPECT_TRUE(rep.at("converged"));
    EXPECT_EQ(rep.at("final_barriers").size(), 3u);

    // ex5 dynamics under the synthesized barriers
    const auto sdir = scratch_dir("sim5");
    const auto s = run_cli({"simulate", "--config", scenario_path("ex5"), "--barriers",
                            (dir / "report.json").string(), "--out", sdir.string()});
    EXPECT_EQ(s.code, cli::kExitOk) << s.out << s.err;
    EXPECT_TRUE(fs::exists(sdir / "trace.csv"));
    EXPECT_TRUE(fs::exists(sdir / "trace.json"));
}

TEST(Cli, EmptyConstraintListConvergesTrivially)
{
    json j = scenario_json("ex3");
    j["constraints"] = json::array();
    const auto r = run_cli({"build", "--config", write_config(j, "empty")});
    EXPECT_EQ(r.code, cli::kExitOk) << r.out << r.err;
    EXPECT_NE(r.out.find("CONVERGED after 0"), std::string::npos);
}

TEST(Cli, SeedOverride)
{
    ScenarioConfig cfg = load_scenario(scenario_path("ex4"));
    cli::RunOptions opt;
    opt.seed = 42;
    opt.grid_scale = 2.0;
    const ScenarioConfig o = cli::apply_overrides(cfg, opt);
    EXPECT_EQ(o.algorithm.options.seed, 42u);
    EXPECT_EQ(o.algorithm.grid.q_axes[0].count, 2 * cfg.algorithm.grid.q_axes[0].count);
}
