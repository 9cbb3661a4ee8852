#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbfcomp/barriers.hpp"
#include "cbfcomp/control_set.hpp"
#include "cbfcomp/dynamics.hpp"
#include "cbfcomp/simulation.hpp"
#include "cbfcomp/viability.hpp"

namespace cbfcomp {

inline constexpr int kSchemaVersion = 1;

class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

struct ControlSetSpec {
    std::string type = "inf_ball";  ///< inf_ball | one_ball | two_ball | weighted_inf_ball | weighted_one_ball | polytope
    double gamma = 1.0;
    std::vector<double> weights;
    std::vector<std::vector<double>> rows;
    std::vector<double> offsets;
};

struct InnerSetSpec {
    std::string rule = "auto_qep";  ///< auto_qep | auto_oep | explicit | outer
    std::string property = "qep";   ///< property checked by check-sets for explicit/outer rules
    std::optional<ControlSetSpec> set;
    int gamma_star_samples = 20000;
};

struct ConstraintSpec {
    std::string type;  ///< half_plane | cone | rate_limit
    std::string label;
    std::vector<double> normal;  ///< half_plane: kappa = normal . q + offset
    double offset = 0.0;
    std::vector<double> a_hat, b_hat;  ///< cone
    double theta_deg = 0.0;
    double omega_max = 0.0;  ///< rate_limit
    std::optional<double> c;     ///< half_plane; absent -> 2 support_{U'}(-A)
    std::optional<double> beta;  ///< cone
    double alpha = 1.0;
};

struct AlgorithmSpec {
    GridSpec grid;
    ViabilityOptions options;
    CbfFamily family;
};

struct SimulationSpec {
    SimConfig config;
};

struct CheckSetsSpec {
    int trials = 10000;
    std::vector<std::uint64_t> seeds{0};
};

struct ScenarioConfig {
    int schema_version = kSchemaVersion;
    std::string name;
    std::string description;
    std::string system = "double_integrator";
    int dim = 2;
    ControlSetSpec control_set;
    InnerSetSpec inner_set;
    std::vector<ConstraintSpec> constraints;
    AlgorithmSpec algorithm;
    CheckSetsSpec check_sets;
    std::optional<SimulationSpec> simulation;
    std::optional<State> feascheck_state;
};

ScenarioConfig parse_scenario(const nlohmann::json& doc);
ScenarioConfig load_scenario(const std::string& path);
nlohmann::json to_json(const ScenarioConfig& cfg);

ControlSet build_control_set(const ControlSetSpec& spec, int dim);
ControlSetSpec control_set_spec(const ControlSet& U);
nlohmann::json grid_to_json(const GridSpec& g);

struct Scenario {
    ScenarioConfig config;
    std::shared_ptr<const SecondOrderSystem> system;
    SafeSet safe_set;
    ControlSet U;
    ControlSet U_inner;
    ExtensionKind property = ExtensionKind::QEP;
    std::vector<Barrier> barriers;

    ViabilityContext context() const;
};

Scenario build_scenario(const ScenarioConfig& cfg);

/// Barriers from a build report (its final_barriers array) or a bare array.
std::vector<Barrier> barriers_from_json(const nlohmann::json& j);
Barrier barrier_from_json(const nlohmann::json& j);

}  // namespace cbfcomp
