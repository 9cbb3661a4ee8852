#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cbfcomp/cbf_row.hpp"
#include "cbfcomp/geometry.hpp"
#include "cbfcomp/sampling.hpp"

namespace cbfcomp {

enum class SetKind {
    InfBall,          ///< ||u||_inf <= gamma
    OneBall,          ///< ||u||_1 <= gamma
    TwoBall,          ///< ||u||_2 <= gamma
    WeightedInfBall,  ///< max_i |a_i u_i| <= gamma
    WeightedOneBall,  ///< sum_i |a_i u_i| <= gamma
    Polytope,         ///< rows * u <= offsets
};

enum class ExtensionKind { OEP, QEP };

std::string to_string(SetKind kind);
std::string to_string(ExtensionKind kind);

class ControlSetError : public std::invalid_argument {
public:
    explicit ControlSetError(const std::string& what) : std::invalid_argument(what) {}
};

/// Compact convex input set containing the origin.
class ControlSet {
public:
    static ControlSet inf_ball(int dim, double gamma);
    static ControlSet one_ball(int dim, double gamma);
    static ControlSet two_ball(int dim, double gamma);
    static ControlSet weighted_inf_ball(Vector weights, double gamma);
    static ControlSet weighted_one_ball(Vector weights, double gamma);
    static ControlSet polytope(Matrix rows, Vector offsets);

    SetKind kind() const { return kind_; }
    int dimension() const { return dim_; }
    double gamma() const { return gamma_; }
    const Vector& weights() const { return weights_; }
    const Matrix& rows() const { return rows_; }
    const Vector& offsets() const { return offsets_; }

    bool is_polyhedral() const { return kind_ != SetKind::TwoBall; }

    /// Minkowski gauge: smallest t >= 0 with u in t * set.
    double gauge(const Vector& u) const;

    /// True iff u satisfies the defining inequality within `tol`.
    bool contains(const Vector& u, double tol = 1e-9) const;

    /// max over the set of d . u.
    double support(const Vector& d) const;
    /// A maximizer of d . u over the set.
    Vector support_point(const Vector& d) const;

    /// Largest t with t * direction inside the set.
    double radial_extent(const Vector& direction) const;

    /// Half-space description G u <= h of a polyhedral set. Throws for TwoBall.
    void halfspaces(Matrix& G, Vector& h) const;

    /// Uniform sample from the set (rejection from the bounding box).
    Vector sample_interior(Rng& rng) const;
    /// Point on the boundary along a uniformly random direction.
    Vector sample_boundary(Rng& rng) const;

    /// Same shape scaled by `factor > 0`.
    ControlSet scaled(double factor) const;

    std::string describe() const;

private:
    ControlSet() = default;
    void require_dim(const Vector& u, const char* context) const;

    SetKind kind_ = SetKind::InfBall;
    int dim_ = 0;
    double gamma_ = 1.0;
    Vector weights_;
    Matrix rows_;
    Vector offsets_;
};

/// Closed-form candidates: InfBall(g) -> OneBall(g), OneBall(g) -> InfBall(g/m),
/// TwoBall(g) -> TwoBall(g/sqrt(m)). Only the 2-ball case keeps the orthogonal
/// extension property for every m; the other two hold for m <= 2.
ControlSet closed_form_oep_set(const ControlSet& outer);

/// Inner set with the orthogonal extension property w.r.t. `outer`.
ControlSet inner_oep_set(const ControlSet& outer, int gamma_star_samples = 20000);

/// Inner set with the quadrant extension property w.r.t. `outer`.
ControlSet inner_qep_set(const ControlSet& outer, int gamma_star_samples = 20000);

/// Largest scale s of the candidate family associated with `outer` for which
/// the quadrant extension property holds over `samples` random orthogonal
/// hyperplane configurations (followed by a local refinement of the worst
/// one). Families: InfBall/WeightedInfBall -> weighted 1-ball of radius s;
/// OneBall -> inf-ball of radius s/m; TwoBall -> 2-ball of radius s.
double compute_gamma_star(const ControlSet& outer, int samples, std::uint64_t seed = 0);

/// Candidate member of the family used by compute_gamma_star at scale s.
ControlSet gamma_star_candidate(const ControlSet& outer, double s);

class WitnessError : public std::invalid_argument {
public:
    explicit WitnessError(const std::string& what) : std::invalid_argument(what) {}
};

/// Sum of successive Gram-Schmidt residuals of `vectors`, taken in order of
/// decreasing 2-norm. Requires pairwise nonnegative dot products.
Vector oep_witness(std::span<const Vector> vectors, double dot_tol = 1e-12);

/// A point of U satisfying every row, if one exists.
std::optional<Vector> joint_witness(std::span<const CbfRow> rows, const ControlSet& U);

struct ExtensionReport {
    int trials = 0;
    int violations = 0;
    double worst_margin = 0.0;  ///< min over trials of 1 - gauge_outer(point)
    Vector worst_point;
    std::vector<Vector> worst_inputs;
};

/// Randomized test of the OEP / QEP of `inner` with respect to `outer`.
/// Trial t uses the stream stream_rng(rng_seed, t).
ExtensionReport verify_extension_property(const ControlSet& inner, const ControlSet& outer,
                                          ExtensionKind kind, int trials,
                                          std::uint64_t rng_seed);

}  // namespace cbfcomp
