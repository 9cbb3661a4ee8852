#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbfcomp/attitude.hpp"
#include "cbfcomp/barriers.hpp"
#include "cbfcomp/control_set.hpp"
#include "cbfcomp/dynamics.hpp"

namespace cbfcomp {

struct GridAxis {
    double lo = 0.0;
    double hi = 0.0;
    int count = 1;

    bool frozen() const { return count <= 1; }
    double at(int i) const;
};

/// Seeds for boundary projection. For systems with unit positions the three
/// q-axes parameterize the unit cube mapped to quaternions by
/// quaternion_from_unit_cube; otherwise each q-axis is one coordinate.
/// A frozen axis (count 1) pins that coordinate during projection.
struct GridSpec {
    std::vector<GridAxis> q_axes;
    std::vector<GridAxis> v_axes;
    /// > 0: use this many Halton points over the box instead of the tensor grid.
    int halton_budget = 0;

    std::size_t seed_count() const;
    State seed(const SecondOrderSystem& sys, std::size_t index) const;
    State uniform(const SecondOrderSystem& sys, Rng& rng) const;

    /// Multiplies every free axis count (or the Halton budget, by factor^free_dims).
    GridSpec refined(double factor) const;
    /// Largest per-axis spacing among free axes.
    double spacing() const;
    int free_dimensions() const;

    std::vector<bool> frozen_q(const SecondOrderSystem& sys) const;
    std::vector<bool> frozen_v() const;
};

enum class PairScope {
    All,           ///< every pair of barriers
    PositionOnly,  ///< pairs of high-order (position) barriers only
};

struct ViabilityOptions {
    double eps_active = 1e-6;
    double newton_tol = 1e-11;
    int newton_iterations = 40;
    PairScope pair_scope = PairScope::All;
    /// solve for a boundary state over position coordinates before touching velocity
    bool position_first = false;
    /// <= 0 selects 3x the grid spacing
    double cluster_eps = 0.0;
    /// weight of velocity differences in the cluster metric
    double velocity_scale = 1.0;
    int max_iterations = 10;
    /// a cluster point counts as removed when h_new > removal_margin or kappa_new > 0
    double removal_margin = 1e-9;
    int scbf_trials = 1000;
    int interference_seeds = 400;
    double interference_tol = 1e-10;
    int probe_samples = 2000;
    unsigned threads = 0;  ///< 0: hardware concurrency
    std::uint64_t seed = 0;
};

struct SamplePoint {
    Vector q;
    Vector v;
    std::vector<int> active;
    std::size_t seed_index = 0;
};

struct Cluster {
    std::vector<SamplePoint> points;
    Vector centroid_q;
    Vector centroid_v;
    double radius = 0.0;
};

struct HalfPlaneFamily {
    double angle_step_deg = 1.0;
    double offset_step = 0.05;
    double offset_min = -2.0;
    /// c = coefficient_fraction * 2 * support_{U'}(-A)
    double coefficient_fraction = 1.0;
};

struct ConeFamily {
    Vector a_hat;
    int axis_count = 2000;
    double theta_step_deg = 1.0;
    double theta_min_deg = 1.0;
    double theta_max_deg = 90.0;
    double beta = 1.0;
};

struct CbfFamily {
    enum class Kind { HalfPlane, Cone } kind = Kind::HalfPlane;
    HalfPlaneFamily half_plane;
    ConeFamily cone;
};

class NoCandidateError : public std::runtime_error {
public:
    explicit NoCandidateError(const std::string& what) : std::runtime_error(what) {}
};

/// Everything the build routines need besides the barrier list.
struct ViabilityContext {
    const SecondOrderSystem* system = nullptr;
    SafeSet safe_set;
    ControlSet U;
    ControlSet U_inner;
    GridSpec grid;
    ViabilityOptions options;
    /// OEP: barriers must be SCBFs over U_inner; QEP: plain CBFs suffice.
    ExtensionKind inner_property = ExtensionKind::OEP;
};

std::vector<SamplePoint> sample_boundary_intersections(std::span<const Barrier> barriers,
                                                       const ViabilityContext& ctx);

/// Newton projection of `seed` onto h_i = h_j = 0 (and |q| = 1 for unit
/// positions), moving only unfrozen coordinates.
std::optional<State> project_to_pair(const Barrier& bi, const Barrier& bj, const State& seed,
                                     const ViabilityContext& ctx);
/// Same for any number of level sets h_k = 0.
std::optional<State> project_to_levels(std::span<const Barrier* const> levels, const State& seed,
                                       const ViabilityContext& ctx);

/// True iff the state lies in S and in every barrier set, within eps.
bool in_working_domain(std::span<const Barrier> barriers, const ViabilityContext& ctx,
                       const Vector& q, const Vector& v, double eps);

std::vector<SamplePoint> get_infeasible_set(std::span<const SamplePoint> points,
                                            std::span<const Barrier> barriers,
                                            const SecondOrderSystem& sys, const ControlSet& U,
                                            unsigned threads = 0);

double state_distance(const SecondOrderSystem& sys, const SamplePoint& a, const SamplePoint& b,
                      double velocity_scale);

std::vector<Cluster> get_clusters(std::span<const SamplePoint> E, const SecondOrderSystem& sys,
                                  double eps_cluster, double velocity_scale = 1.0);

struct CandidateInfo {
    Barrier barrier;
    nlohmann::json params;
    double min_interference_dot = 0.0;
    double scbf_worst_margin = 0.0;
    int candidates_examined = 0;
};

CandidateInfo get_cbf(const Cluster& cluster, std::span<const Barrier> existing,
                      const ViabilityContext& ctx, const CbfFamily& family);

struct IterationRecord {
    int samples = 0;
    int infeasible = 0;
    int probe_in_domain = 0;
    std::vector<nlohmann::json> clusters;
    std::optional<nlohmann::json> added;
    double seconds = 0.0;
};

struct ViabilityReport {
    std::vector<Barrier> final_barriers;
    std::vector<nlohmann::json> added;
    std::vector<IterationRecord> history;
    int iterations = 0;  ///< loop bodies executed (= barriers added)
    bool converged = false;
    std::string failure;
    double seconds = 0.0;

    std::vector<int> infeasible_history() const;
    nlohmann::json to_json() const;
};

ViabilityReport build_viability_domain(std::vector<Barrier> initial, const ViabilityContext& ctx,
                                       const CbfFamily& family);

/// |E| / |D| on the given grid (0 when D is empty).
struct InfeasibleFraction {
    int samples = 0;
    int infeasible = 0;
    double fraction = 0.0;
};

InfeasibleFraction infeasible_fraction(std::span<const Barrier> barriers,
                                       const ViabilityContext& ctx, const GridSpec& grid);

/// Deterministic parallel loop over [0, n).
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace cbfcomp
