#include "cbfcomp/viability.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <thread>

#include "cbfcomp/feasibility.hpp"

namespace cbfcomp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

nlohmann::json to_json_vec(const Vector& v)
{
    return std::vector<double>(v.data(), v.data() + v.size());
}

// free-axis ranges in order (q axes then v axes)
std::vector<const GridAxis*> free_axes(const GridSpec& g)
{
    std::vector<const GridAxis*> out;
    for (const auto& a : g.q_axes)
        if (!a.frozen()) out.push_back(&a);
    for (const auto& a : g.v_axes)
        if (!a.frozen()) out.push_back(&a);
    return out;
}

State assemble(const SecondOrderSystem& sys, const GridSpec& g, const std::vector<double>& x)
{
    const std::size_t nq = g.q_axes.size();
    State s;
    if (sys.unit_position()) {
        if (nq != 3) throw std::invalid_argument("grid: unit-position systems need 3 q-axes");
        s.q = quaternion_from_unit_cube(x[0], x[1], x[2]);
    } else {
        if (static_cast<int>(nq) != sys.n1()) throw std::invalid_argument("grid: q-axis count");
        s.q = Vector(sys.n1());
        for (std::size_t i = 0; i < nq; ++i) s.q[static_cast<Eigen::Index>(i)] = x[i];
    }
    if (static_cast<int>(g.v_axes.size()) != sys.n2())
        throw std::invalid_argument("grid: v-axis count");
    s.v = Vector(sys.n2());
    for (std::size_t i = 0; i < g.v_axes.size(); ++i)
        s.v[static_cast<Eigen::Index>(i)] = x[nq + i];
    return s;
}

std::vector<std::pair<int, int>> barrier_pairs(std::span<const Barrier> barriers, PairScope scope)
{
    std::vector<std::pair<int, int>> out;
    const int n = static_cast<int>(barriers.size());
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            if (scope == PairScope::PositionOnly &&
                (barriers[i].kind() != BarrierKind::HighOrder ||
                 barriers[j].kind() != BarrierKind::HighOrder))
                continue;
            out.emplace_back(i, j);
        }
    return out;
}

bool inside_box(const GridSpec& g, const SecondOrderSystem& sys, const State& s)
{
    auto ok = [](const GridAxis& a, double x) {
        if (a.frozen()) return std::abs(x - a.lo) <= 1e-9 * (1.0 + std::abs(a.lo));
        const double slack = 0.05 * (a.hi - a.lo);
        return x >= a.lo - slack && x <= a.hi + slack;
    };
    if (!sys.unit_position())
        for (std::size_t i = 0; i < g.q_axes.size(); ++i)
            if (!ok(g.q_axes[i], s.q[static_cast<Eigen::Index>(i)])) return false;
    for (std::size_t i = 0; i < g.v_axes.size(); ++i)
        if (!ok(g.v_axes[i], s.v[static_cast<Eigen::Index>(i)])) return false;
    return true;
}

// Rejection sample of the working domain; falls back to the last draw.
State sample_domain(std::span<const Barrier> barriers, const ViabilityContext& ctx, Rng& rng)
{
    State s = ctx.grid.uniform(*ctx.system, rng);
    for (int t = 0; t < 200; ++t) {
        if (in_working_domain(barriers, ctx, s.q, s.v, 0.0)) return s;
        s = ctx.grid.uniform(*ctx.system, rng);
    }
    return s;
}

double admissibility_margin(const Barrier& b, const ViabilityContext& ctx, const Vector& q,
                            const Vector& v)
{
    if (ctx.inner_property == ExtensionKind::OEP) return scbf_margin(b, *ctx.system, q, v, ctx.U_inner);
    return cbf_margin(b, *ctx.system, q, v, ctx.U_inner);
}

ScbfReport admissibility_check(const Barrier& b, const ViabilityContext& ctx, const StateSampler& X,
                               int trials, std::uint64_t seed)
{
    if (ctx.inner_property == ExtensionKind::OEP)
        return scbf_check(b, *ctx.system, X, ctx.U_inner, trials, seed);
    return cbf_check(b, *ctx.system, X, ctx.U_inner, trials, seed);
}

bool removed_by(const Barrier& b, const SecondOrderSystem& sys, const SamplePoint& p, double margin)
{
    if (b.kind() == BarrierKind::HighOrder && b.position()->value(p.q) > 0.0) return true;
    return barrier_value(b, sys, p.q, p.v) > margin;
}

struct SynthesisChecks {
    bool pass = false;
    double min_dot = std::numeric_limits<double>::infinity();
    double scbf_margin = std::numeric_limits<double>::infinity();
};

// (b) and (c) of getCBF for a removal-feasible candidate.
SynthesisChecks check_candidate(const Barrier& cand, std::span<const Barrier> existing,
                                const ViabilityContext& ctx, std::uint64_t salt)
{
    const auto& sys = *ctx.system;
    const auto& o = ctx.options;
    SynthesisChecks out;

    std::vector<Barrier> with(existing.begin(), existing.end());
    with.push_back(cand);
    const std::span<const Barrier> all(with);

    // interference on the boundary intersections with each existing barrier
    const std::size_t n_seed = static_cast<std::size_t>(std::max(0, o.interference_seeds));
    std::vector<const Barrier*> pair(2);
    pair[0] = &cand;
    for (const auto& e : existing) {
        if (o.pair_scope == PairScope::PositionOnly && e.kind() != BarrierKind::HighOrder) continue;
        pair[1] = &e;
        for (std::size_t k = 0; k < n_seed; ++k) {
            Rng rng = stream_rng(o.seed ^ 0x9e3779b97f4a7c15ULL, salt * 7919 + k);
            const State seed = ctx.grid.uniform(sys, rng);
            std::optional<State> s;
            try {
                s = project_to_levels(pair, seed, ctx);
            } catch (const SingularBarrierError&) {
                continue;
            }
            if (!s || !in_working_domain(all, ctx, s->q, s->v, o.eps_active)) continue;
            const double d =
                input_direction(cand, sys, s->q, s->v).dot(input_direction(e, sys, s->q, s->v));
            out.min_dot = std::min(out.min_dot, d);
            if (d < -o.interference_tol) return out;
            // SCBF at boundary states as well
            out.scbf_margin = std::min(out.scbf_margin, admissibility_margin(cand, ctx, s->q, s->v));
            if (out.scbf_margin < -1e-9) return out;
        }
    }

    // SCBF on the shrunken domain; boundary states of the candidate alone
    std::vector<const Barrier*> single{&cand};
    for (std::size_t k = 0; k < n_seed; ++k) {
        Rng rng = stream_rng(o.seed ^ 0x5851f42d4c957f2dULL, salt * 7919 + k);
        const State seed = ctx.grid.uniform(sys, rng);
        std::optional<State> s;
        try {
            s = project_to_levels(single, seed, ctx);
        } catch (const SingularBarrierError&) {
            continue;
        }
        if (!s || !in_working_domain(all, ctx, s->q, s->v, o.eps_active)) continue;
        out.scbf_margin = std::min(out.scbf_margin, admissibility_margin(cand, ctx, s->q, s->v));
        if (out.scbf_margin < -1e-9) return out;
    }
    // a candidate that empties the sampled domain passes the checks vacuously
    bool nonempty = false;
    for (int k = 0; k < std::max(o.probe_samples, 200) && !nonempty; ++k) {
        Rng rng = stream_rng(o.seed ^ 0xabcdefULL, static_cast<std::uint64_t>(k));
        const State s = ctx.grid.uniform(sys, rng);
        nonempty = in_working_domain(all, ctx, s.q, s.v, 0.0);
    }
    if (!nonempty) return out;

    const StateSampler X = [&](Rng& rng) { return sample_domain(all, ctx, rng); };
    const ScbfReport r = admissibility_check(cand, ctx, X, o.scbf_trials, o.seed + salt);
    if (r.checked > 0) out.scbf_margin = std::min(out.scbf_margin, r.worst_margin);
    if (!r.pass) return out;

    if (!std::isfinite(out.min_dot)) out.min_dot = 0.0;
    if (!std::isfinite(out.scbf_margin)) out.scbf_margin = 0.0;
    out.pass = true;
    return out;
}

// unit vector sum of active position gradients over the cluster
Vector gradient_bisector(const Cluster& cluster, std::span<const Barrier> existing, int dim)
{
    Vector acc = Vector::Zero(dim);
    for (const auto& p : cluster.points)
        for (int k : p.active) {
            const Barrier& b = existing[static_cast<std::size_t>(k)];
            if (b.kind() != BarrierKind::HighOrder) continue;
            const Vector g = b.position()->gradient(p.q);
            const double n = g.norm();
            if (n > 0.0) acc += g / n;
        }
    const double n = acc.norm();
    return n > 0.0 ? Vector(acc / n) : acc;
}

double angle_between(const Vector& a, const Vector& b)
{
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::acos(std::clamp(a.dot(b) / (na * nb), -1.0, 1.0));
}

struct Ranked {
    double primary;    // smaller is better
    double secondary;  // smaller is better
    int index;
};

bool ranked_less(const Ranked& a, const Ranked& b)
{
    if (std::abs(a.primary - b.primary) > 1e-12) return a.primary < b.primary;
    if (std::abs(a.secondary - b.secondary) > 1e-12) return a.secondary < b.secondary;
    return a.index < b.index;
}

CandidateInfo half_plane_cbf(const Cluster& cluster, std::span<const Barrier> existing,
                             const ViabilityContext& ctx, const HalfPlaneFamily& fam)
{
    const auto& sys = *ctx.system;
    const auto& o = ctx.options;
    if (sys.n1() != 2) throw std::invalid_argument("half-plane family: planar positions only");
    if (fam.angle_step_deg <= 0.0 || fam.offset_step <= 0.0)
        throw std::invalid_argument("half-plane family: steps must be positive");

    const Vector bis = gradient_bisector(cluster, existing, 2);
    const int n_dir = static_cast<int>(std::llround(360.0 / fam.angle_step_deg));

    struct Cand {
        Vector p;
        double c;
        double d;
    };
    std::vector<Cand> cands;
    std::vector<Ranked> order;
    for (int i = 0; i < n_dir; ++i) {
        const double phi = i * fam.angle_step_deg * std::numbers::pi / 180.0;
        Vector p(2);
        p << std::cos(phi), std::sin(phi);
        for (auto& x : p)
            if (std::abs(x) < 1e-15) x = 0.0;

        auto probe = std::make_shared<HalfPlaneConstraint>(p, 0.0, "probe");
        const Barrier unit = Barrier::high_order(probe, 1.0);
        const Vector A = input_direction(unit, sys, cluster.centroid_q, cluster.centroid_v);
        const double c = fam.coefficient_fraction * 2.0 * ctx.U_inner.support(-A);
        if (!(c > 0.0)) continue;

        double d_max = std::numeric_limits<double>::infinity();
        for (const auto& pt : cluster.points) {
            const double s = p.dot(pt.q);
            const double w = kappa_dot(unit, sys, pt.q, pt.v);
            double bound = s;
            if (w > o.removal_margin) {
                const double e = w - o.removal_margin;
                bound = std::max(bound, s + e * e / c);
            }
            d_max = std::min(d_max, bound);
        }
        double d = fam.offset_step * (std::ceil(d_max / fam.offset_step) - 1.0);
        if (d < fam.offset_min) continue;
        if (std::abs(d) < 1e-14) d = 0.0;

        Barrier b = Barrier::high_order(std::make_shared<HalfPlaneConstraint>(p, -d), c);
        bool all = true;
        for (const auto& pt : cluster.points)
            if (!removed_by(b, sys, pt, o.removal_margin)) {
                all = false;
                break;
            }
        if (!all) continue;
        order.push_back({-d, angle_between(p, bis), static_cast<int>(cands.size())});
        cands.push_back({p, c, d});
    }
    std::sort(order.begin(), order.end(), ranked_less);

    int examined = 0;
    for (const auto& r : order) {
        const Cand& cd = cands[static_cast<std::size_t>(r.index)];
        const std::string label = "h" + std::to_string(existing.size() + 1);
        Barrier b = Barrier::high_order(std::make_shared<HalfPlaneConstraint>(cd.p, -cd.d, label),
                                        cd.c, 1.0, label);
        ++examined;
        const SynthesisChecks chk = check_candidate(b, existing, ctx, static_cast<std::uint64_t>(examined));
        if (!chk.pass) continue;
        nlohmann::json params = {{"family", "half_plane"},
                                 {"normal", to_json_vec(cd.p)},
                                 {"offset", cd.d},
                                 {"coefficient", cd.c},
                                 {"angle_to_bisector_deg", r.secondary * 180.0 / std::numbers::pi}};
        return {b, params, chk.min_dot, chk.scbf_margin, examined};
    }
    throw NoCandidateError("half-plane family: no candidate removes the cluster and passes the checks (" +
                           std::to_string(order.size()) + " removal candidates examined)");
}

CandidateInfo cone_cbf(const Cluster& cluster, std::span<const Barrier> existing,
                       const ViabilityContext& ctx, const ConeFamily& fam)
{
    const auto& sys = *ctx.system;
    const auto& o = ctx.options;
    if (!sys.unit_position() || sys.n1() != 4)
        throw std::invalid_argument("cone family: quaternion positions only");
    if (fam.a_hat.size() != 3) throw std::invalid_argument("cone family: a_hat must have 3 entries");
    if (!(fam.beta > 0.0) || fam.theta_step_deg <= 0.0 || fam.axis_count < 1)
        throw std::invalid_argument("cone family: invalid parameters");
    const Vector a = fam.a_hat.normalized();
    const double deg = std::numbers::pi / 180.0;

    // mean pointing direction of the instrument over the cluster
    Vector point = Vector::Zero(3);
    for (const auto& p : cluster.points) point += rotation_matrix(p.q) * a;
    if (point.norm() > 0.0) point.normalize();

    const auto axes = fibonacci_sphere(fam.axis_count);
    const int n_theta =
        static_cast<int>(std::floor((fam.theta_max_deg - fam.theta_min_deg) / fam.theta_step_deg + 1e-9)) + 1;

    struct Cand {
        Vector b;
        double theta;
    };
    std::vector<Cand> cands;
    std::vector<Ranked> order;
    for (std::size_t ia = 0; ia < axes.size(); ++ia) {
        const Vector& bh = axes[ia];
        // P = P0 - cos(theta) I; kappa = q'P0q - cos(theta), kappa_dot = 2 q'P0 g1 v
        const Matrix P0 = cone_matrix(a, bh, std::numbers::pi / 2.0);
        double bound = std::numeric_limits<double>::infinity();
        for (const auto& pt : cluster.points) {
            const double s = pt.q.dot(P0 * pt.q);
            const double w = 2.0 * pt.q.dot(P0 * (sys.g1(pt.q) * pt.v));
            double bi = s;
            if (w > o.removal_margin) {
                const double e = w - o.removal_margin;
                bi = std::max(bi, s + e * e / fam.beta);
            }
            bound = std::min(bound, bi);
        }
        // smallest theta on the grid with cos(theta) < bound
        int k = -1;
        for (int j = 0; j < n_theta; ++j) {
            const double th = (fam.theta_min_deg + j * fam.theta_step_deg) * deg;
            if (th <= 0.0 || th >= std::numbers::pi) continue;
            if (std::cos(th) < bound - 1e-12) {
                k = j;
                break;
            }
        }
        if (k < 0) continue;
        const double th = (fam.theta_min_deg + k * fam.theta_step_deg) * deg;
        order.push_back({th, angle_between(bh, point), static_cast<int>(cands.size())});
        cands.push_back({bh, th});
    }
    std::sort(order.begin(), order.end(), ranked_less);

    int examined = 0;
    for (const auto& r : order) {
        if (examined >= 400) break;
        const Cand& cd = cands[static_cast<std::size_t>(r.index)];
        const std::string label = "h" + std::to_string(existing.size() + 1);
        auto kappa = std::make_shared<ConeConstraint>(a, cd.b, cd.theta, label);
        Barrier b = Barrier::high_order(kappa, fam.beta, 1.0, label);
        bool all = true;
        for (const auto& pt : cluster.points)
            if (!removed_by(b, sys, pt, o.removal_margin)) {
                all = false;
                break;
            }
        if (!all) continue;
        ++examined;
        const SynthesisChecks chk = check_candidate(b, existing, ctx, static_cast<std::uint64_t>(examined));
        if (!chk.pass) continue;
        nlohmann::json params = {{"family", "cone"},
                                 {"a_hat", to_json_vec(a)},
                                 {"b_hat", to_json_vec(cd.b)},
                                 {"theta_deg", cd.theta / deg},
                                 {"beta", fam.beta}};
        return {b, params, chk.min_dot, chk.scbf_margin, examined};
    }
    throw NoCandidateError("cone family: no candidate removes the cluster and passes the checks (" +
                           std::to_string(order.size()) + " removal candidates)");
}

nlohmann::json cluster_json(const Cluster& c)
{
    return {{"size", c.points.size()},
            {"centroid_q", to_json_vec(c.centroid_q)},
            {"centroid_v", to_json_vec(c.centroid_v)},
            {"radius", c.radius}};
}

}  // namespace

double GridAxis::at(int i) const
{
    if (count <= 1) return lo;
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
}

std::size_t GridSpec::seed_count() const
{
    if (halton_budget > 0) return static_cast<std::size_t>(halton_budget);
    std::size_t n = 1;
    for (const auto& a : q_axes) n *= static_cast<std::size_t>(std::max(1, a.count));
    for (const auto& a : v_axes) n *= static_cast<std::size_t>(std::max(1, a.count));
    return n;
}

State GridSpec::seed(const SecondOrderSystem& sys, std::size_t index) const
{
    std::vector<const GridAxis*> axes;
    for (const auto& a : q_axes) axes.push_back(&a);
    for (const auto& a : v_axes) axes.push_back(&a);
    std::vector<double> x(axes.size());
    if (halton_budget > 0) {
        const int d = free_dimensions();
        const auto h = halton_point(index + 1, std::max(1, d));
        int k = 0;
        for (std::size_t i = 0; i < axes.size(); ++i) {
            const GridAxis& a = *axes[i];
            x[i] = a.frozen() ? a.lo : a.lo + (a.hi - a.lo) * h[static_cast<std::size_t>(k++)];
        }
    } else {
        std::size_t r = index;
        for (std::size_t i = axes.size(); i-- > 0;) {
            const GridAxis& a = *axes[i];
            const std::size_t c = static_cast<std::size_t>(std::max(1, a.count));
            x[i] = a.at(static_cast<int>(r % c));
            r /= c;
        }
    }
    return assemble(sys, *this, x);
}

State GridSpec::uniform(const SecondOrderSystem& sys, Rng& rng) const
{
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<double> x;
    for (const auto* list : {&q_axes, &v_axes})
        for (const auto& a : *list) x.push_back(a.frozen() ? a.lo : a.lo + (a.hi - a.lo) * U(rng));
    return assemble(sys, *this, x);
}

GridSpec GridSpec::refined(double factor) const
{
    if (!(factor > 0.0)) throw std::invalid_argument("grid refinement factor must be positive");
    GridSpec g = *this;
    if (halton_budget > 0) {
        g.halton_budget = std::max(
            1, static_cast<int>(std::llround(halton_budget * std::pow(factor, free_dimensions()))));
        return g;
    }
    for (auto* list : {&g.q_axes, &g.v_axes})
        for (auto& a : *list)
            if (!a.frozen()) a.count = std::max(2, static_cast<int>(std::llround(a.count * factor)));
    return g;
}

int GridSpec::free_dimensions() const
{
    return static_cast<int>(free_axes(*this).size());
}

double GridSpec::spacing() const
{
    const auto axes = free_axes(*this);
    if (axes.empty()) return 0.0;
    if (halton_budget > 0) {
        double vol = 1.0;
        for (const auto* a : axes) vol *= (a->hi - a->lo);
        return std::pow(vol / halton_budget, 1.0 / static_cast<double>(axes.size()));
    }
    double s = 0.0;
    for (const auto* a : axes) s = std::max(s, (a->hi - a->lo) / (a->count - 1));
    return s;
}

std::vector<bool> GridSpec::frozen_q(const SecondOrderSystem& sys) const
{
    if (sys.unit_position()) return std::vector<bool>(static_cast<std::size_t>(sys.n1()), false);
    std::vector<bool> out;
    for (const auto& a : q_axes) out.push_back(a.frozen());
    return out;
}

std::vector<bool> GridSpec::frozen_v() const
{
    std::vector<bool> out;
    for (const auto& a : v_axes) out.push_back(a.frozen());
    return out;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body)
{
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, n)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(err_mu);
                    if (!err) err = std::current_exception();
                    next = n;
                    return;
                }
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

bool in_working_domain(std::span<const Barrier> barriers, const ViabilityContext& ctx,
                       const Vector& q, const Vector& v, double eps)
{
    if (!ctx.safe_set.contains(q, v, eps)) return false;
    for (const auto& b : barriers) {
        if (b.kind() == BarrierKind::HighOrder && b.position()->value(q) > eps) return false;
        if (barrier_value(b, *ctx.system, q, v) > eps) return false;
    }
    return true;
}

namespace {

using ResidualFn = std::function<Vector(const Vector&, const Vector&)>;
// rows x (n1 + n2)
using JacobianFn = std::function<Matrix(const Vector&, const Vector&)>;

std::optional<State> newton_solve(const ResidualFn& residual, const JacobianFn& jacobian,
                                  const std::vector<int>& cols, Vector q, Vector v,
                                  const ViabilityContext& ctx)
{
    const auto& o = ctx.options;
    const int n1 = ctx.system->n1();
    const bool sphere = ctx.system->unit_position();
    if (sphere) q.normalize();

    auto full = [&](const Vector& qq, const Vector& vv) {
        Vector F = residual(qq, vv);
        if (!sphere) return F;
        Vector G(F.size() + 1);
        G << F, qq.squaredNorm() - 1.0;
        return G;
    };

    Vector F = full(q, v);
    for (int it = 0; it < o.newton_iterations; ++it) {
        const double fn = F.lpNorm<Eigen::Infinity>();
        if (!std::isfinite(fn)) return std::nullopt;
        if (fn <= o.newton_tol) break;
        const Matrix Jf = jacobian(q, v);
        Matrix J(F.size(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t c = 0; c < cols.size(); ++c) {
            const auto cc = static_cast<Eigen::Index>(c);
            J.col(cc).head(Jf.rows()) = Jf.col(cols[c]);
            if (sphere) J(F.size() - 1, cc) = cols[c] < n1 ? 2.0 * q[cols[c]] : 0.0;
        }
        Vector dx = J.completeOrthogonalDecomposition().solve(-F);
        if (!dx.allFinite()) return std::nullopt;
        const double len = dx.norm();
        if (len > 1.0) dx *= 1.0 / len;

        double t = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 12; ++ls, t *= 0.5) {
            Vector qn = q, vn = v;
            for (std::size_t c = 0; c < cols.size(); ++c) {
                const int j = cols[c];
                if (j < n1)
                    qn[j] += t * dx[static_cast<Eigen::Index>(c)];
                else
                    vn[j - n1] += t * dx[static_cast<Eigen::Index>(c)];
            }
            const Vector Fn = full(qn, vn);
            if (Fn.allFinite() && Fn.lpNorm<Eigen::Infinity>() < fn) {
                q = std::move(qn);
                v = std::move(vn);
                F = Fn;
                accepted = true;
                break;
            }
        }
        if (!accepted) return std::nullopt;
    }
    if (F.lpNorm<Eigen::Infinity>() <= o.newton_tol) {
        if (sphere) q.normalize();
        return State{q, v};
    }
    return std::nullopt;
}

std::optional<State> newton_levels(std::span<const Barrier* const> levels, const std::vector<int>& cols,
                                   const Vector& q, const Vector& v, const ViabilityContext& ctx)
{
    const auto& sys = *ctx.system;
    const int n1 = sys.n1(), n2 = sys.n2();
    const auto m = static_cast<Eigen::Index>(levels.size());
    auto residual = [&](const Vector& qq, const Vector& vv) {
        Vector F(m);
        for (Eigen::Index k = 0; k < m; ++k) F[k] = barrier_value(*levels[static_cast<std::size_t>(k)], sys, qq, vv);
        return F;
    };
    auto jacobian = [&](const Vector& qq, const Vector& vv) {
        Matrix J(m, n1 + n2);
        for (Eigen::Index k = 0; k < m; ++k) {
            const BarrierGradients g = barrier_gradients(*levels[static_cast<std::size_t>(k)], sys, qq, vv);
            J.row(k) << g.dq.transpose(), g.dv.transpose();
        }
        return J;
    };
    return newton_solve(residual, jacobian, cols, q, v, ctx);
}

// Moves q onto kappa = -kappa_dot^2 / c, where the square-root branch of h = 0 lives.
std::optional<Vector> seed_branch(std::span<const Barrier* const> levels, const std::vector<int>& qcols,
                                  const State& seed, const ViabilityContext& ctx)
{
    const auto& sys = *ctx.system;
    const int n1 = sys.n1(), n2 = sys.n2();
    std::vector<const Barrier*> pos;
    for (const Barrier* b : levels)
        if (b->kind() == BarrierKind::HighOrder && b->coefficient() > 0.0) pos.push_back(b);
    if (pos.empty()) return seed.q;
    const auto m = static_cast<Eigen::Index>(pos.size());
    Vector target(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        const Barrier& b = *pos[static_cast<std::size_t>(k)];
        const double kd = std::max(kappa_dot(b, sys, seed.q, seed.v), 1e-3);
        target[k] = -kd * kd / b.coefficient();
    }
    auto residual = [&](const Vector& qq, const Vector&) {
        Vector F(m);
        for (Eigen::Index k = 0; k < m; ++k) F[k] = pos[static_cast<std::size_t>(k)]->position()->value(qq) - target[k];
        return F;
    };
    auto jacobian = [&](const Vector& qq, const Vector&) {
        Matrix J = Matrix::Zero(m, n1 + n2);
        for (Eigen::Index k = 0; k < m; ++k)
            J.row(k).head(n1) = pos[static_cast<std::size_t>(k)]->position()->gradient(qq).transpose();
        return J;
    };
    auto s = newton_solve(residual, jacobian, qcols, seed.q, seed.v, ctx);
    if (!s) return std::nullopt;
    return s->q;
}

}  // namespace

std::optional<State> project_to_levels(std::span<const Barrier* const> levels, const State& seed,
                                       const ViabilityContext& ctx)
{
    const auto& sys = *ctx.system;
    const int n1 = sys.n1(), n2 = sys.n2();
    const auto fq = ctx.grid.frozen_q(sys);
    const auto fv = ctx.grid.frozen_v();
    std::vector<int> qcols, vcols, cols;
    for (int i = 0; i < n1; ++i)
        if (!fq[static_cast<std::size_t>(i)]) qcols.push_back(i);
    for (int i = 0; i < n2; ++i)
        if (!fv[static_cast<std::size_t>(i)]) vcols.push_back(n1 + i);
    cols = qcols;
    cols.insert(cols.end(), vcols.begin(), vcols.end());
    if (cols.empty()) return std::nullopt;

    if (ctx.options.position_first && !qcols.empty()) {
        const auto q0 = seed_branch(levels, qcols, seed, ctx);
        if (!q0) return std::nullopt;
        // h is affine in v once q is fixed
        if (!vcols.empty())
            if (auto s = newton_levels(levels, vcols, *q0, seed.v, ctx)) return s;
        return newton_levels(levels, cols, *q0, seed.v, ctx);
    }
    return newton_levels(levels, cols, seed.q, seed.v, ctx);
}

std::optional<State> project_to_pair(const Barrier& bi, const Barrier& bj, const State& seed,
                                     const ViabilityContext& ctx)
{
    const Barrier* levels[2] = {&bi, &bj};
    return project_to_levels(levels, seed, ctx);
}

std::vector<SamplePoint> sample_boundary_intersections(std::span<const Barrier> barriers,
                                                       const ViabilityContext& ctx)
{
    if (ctx.system == nullptr) throw std::invalid_argument("viability context without a system");
    const auto& sys = *ctx.system;
    const auto pairs = barrier_pairs(barriers, ctx.options.pair_scope);
    if (pairs.empty()) return {};
    const std::size_t n = ctx.grid.seed_count();
    std::vector<std::vector<SamplePoint>> per_seed(n);
    parallel_for(n, ctx.options.threads, [&](std::size_t idx) {
        const State seed = ctx.grid.seed(sys, idx);
        for (const auto& [i, j] : pairs) {
            std::optional<State> s;
            try {
                s = project_to_pair(barriers[static_cast<std::size_t>(i)],
                                    barriers[static_cast<std::size_t>(j)], seed, ctx);
            } catch (const SingularBarrierError&) {
                continue;
            }
            if (!s || !inside_box(ctx.grid, sys, *s)) continue;
            if (!in_working_domain(barriers, ctx, s->q, s->v, ctx.options.eps_active)) continue;
            auto act = active_set(barriers, sys, s->q, s->v, ctx.options.eps_active);
            if (act.size() < 2) continue;
            per_seed[idx].push_back({s->q, s->v, std::move(act), idx});
        }
    });
    std::vector<SamplePoint> out;
    for (auto& v : per_seed)
        for (auto& p : v) out.push_back(std::move(p));
    return out;
}

std::vector<SamplePoint> get_infeasible_set(std::span<const SamplePoint> points,
                                            std::span<const Barrier> barriers,
                                            const SecondOrderSystem& sys, const ControlSet& U,
                                            unsigned threads)
{
    std::vector<char> bad(points.size(), 0);
    parallel_for(points.size(), threads, [&](std::size_t i) {
        const SamplePoint& p = points[i];
        std::vector<CbfRow> rows;
        for (int k : p.active) rows.push_back(cbf_row(barriers[static_cast<std::size_t>(k)], sys, p.q, p.v));
        bad[i] = lp_feasible(rows, U, RhsMode::Nagumo) ? 0 : 1;
    });
    std::vector<SamplePoint> out;
    for (std::size_t i = 0; i < points.size(); ++i)
        if (bad[i]) out.push_back(points[i]);
    return out;
}

double state_distance(const SecondOrderSystem& sys, const SamplePoint& a, const SamplePoint& b,
                      double velocity_scale)
{
    const double dq = sys.unit_position() ? quaternion_distance(a.q, b.q) : (a.q - b.q).norm();
    const double dv = velocity_scale * (a.v - b.v).norm();
    return std::sqrt(dq * dq + dv * dv);
}

std::vector<Cluster> get_clusters(std::span<const SamplePoint> E, const SecondOrderSystem& sys,
                                  double eps_cluster, double velocity_scale)
{
    if (!(eps_cluster > 0.0)) throw std::invalid_argument("eps_cluster must be positive");
    const std::size_t n = E.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (state_distance(sys, E[i], E[j], velocity_scale) <= eps_cluster) {
                const std::size_t a = find(i), b = find(j);
                if (a != b) parent[std::max(a, b)] = std::min(a, b);
            }

    std::vector<std::vector<std::size_t>> groups;
    std::vector<long> slot(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = find(i);
        if (slot[r] < 0) {
            slot[r] = static_cast<long>(groups.size());
            groups.emplace_back();
        }
        groups[static_cast<std::size_t>(slot[r])].push_back(i);
    }
    std::stable_sort(groups.begin(), groups.end(),
                     [](const auto& a, const auto& b) { return a.size() > b.size(); });

    std::vector<Cluster> out;
    for (const auto& g : groups) {
        Cluster c;
        const SamplePoint& first = E[g.front()];
        c.centroid_q = Vector::Zero(first.q.size());
        c.centroid_v = Vector::Zero(first.v.size());
        for (std::size_t i : g) {
            c.points.push_back(E[i]);
            const double sgn = sys.unit_position() && E[i].q.dot(first.q) < 0.0 ? -1.0 : 1.0;
            c.centroid_q += sgn * E[i].q;
            c.centroid_v += E[i].v;
        }
        c.centroid_q /= static_cast<double>(g.size());
        c.centroid_v /= static_cast<double>(g.size());
        if (sys.unit_position() && c.centroid_q.norm() > 0.0) c.centroid_q.normalize();
        SamplePoint centre{c.centroid_q, c.centroid_v, {}, 0};
        for (const auto& p : c.points)
            c.radius = std::max(c.radius, state_distance(sys, p, centre, velocity_scale));
        out.push_back(std::move(c));
    }
    return out;
}

CandidateInfo get_cbf(const Cluster& cluster, std::span<const Barrier> existing,
                      const ViabilityContext& ctx, const CbfFamily& family)
{
    if (cluster.points.empty()) throw std::invalid_argument("get_cbf: empty cluster");
    if (family.kind == CbfFamily::Kind::HalfPlane)
        return half_plane_cbf(cluster, existing, ctx, family.half_plane);
    return cone_cbf(cluster, existing, ctx, family.cone);
}

std::vector<int> ViabilityReport::infeasible_history() const
{
    std::vector<int> out;
    for (const auto& h : history) out.push_back(h.infeasible);
    return out;
}

nlohmann::json ViabilityReport::to_json() const
{
    nlohmann::json j;
    j["converged"] = converged;
    j["iterations"] = iterations;
    j["failure"] = failure;
    j["seconds"] = seconds;
    j["infeasible_history"] = infeasible_history();
    j["final_barriers"] = nlohmann::json::array();
    for (const auto& b : final_barriers) j["final_barriers"].push_back(b.to_json());
    j["added"] = added;
    j["history"] = nlohmann::json::array();
    for (const auto& h : history) {
        nlohmann::json r = {{"samples", h.samples},
                            {"infeasible", h.infeasible},
                            {"probe_in_domain", h.probe_in_domain},
                            {"clusters", h.clusters},
                            {"seconds", h.seconds}};
        if (h.added) r["added"] = *h.added;
        j["history"].push_back(r);
    }
    return j;
}

ViabilityReport build_viability_domain(std::vector<Barrier> initial, const ViabilityContext& ctx,
                                       const CbfFamily& family)
{
    if (ctx.system == nullptr) throw std::invalid_argument("viability context without a system");
    const auto t0 = Clock::now();
    const auto& sys = *ctx.system;
    const auto& o = ctx.options;
    ViabilityReport rep;
    rep.final_barriers = std::move(initial);

    for (std::size_t k = 0; k < rep.final_barriers.size(); ++k) {
        const auto& b = rep.final_barriers[k];
        const StateSampler X = [&](Rng& rng) { return sample_domain(rep.final_barriers, ctx, rng); };
        const ScbfReport r = admissibility_check(b, ctx, X, o.scbf_trials, o.seed + 101 * k);
        if (!r.pass) {
            rep.failure = "initial barrier " + std::to_string(k) + " (" + b.label() +
                          ") fails the admissibility check, worst margin " + std::to_string(r.worst_margin);
            rep.seconds = seconds_since(t0);
            return rep;
        }
    }

    std::vector<State> probe;
    for (int i = 0; i < o.probe_samples; ++i) {
        Rng rng = stream_rng(o.seed ^ 0xabcdefULL, static_cast<std::uint64_t>(i));
        probe.push_back(ctx.grid.uniform(sys, rng));
    }
    const double eps_cluster = o.cluster_eps > 0.0 ? o.cluster_eps : 3.0 * ctx.grid.spacing();

    for (;;) {
        const auto ti = Clock::now();
        IterationRecord rec;
        for (const auto& s : probe)
            if (in_working_domain(rep.final_barriers, ctx, s.q, s.v, 0.0)) ++rec.probe_in_domain;
        const auto D = sample_boundary_intersections(rep.final_barriers, ctx);
        const auto E = get_infeasible_set(D, rep.final_barriers, sys, ctx.U, o.threads);
        rec.samples = static_cast<int>(D.size());
        rec.infeasible = static_cast<int>(E.size());
        if (E.empty()) {
            rec.seconds = seconds_since(ti);
            rep.history.push_back(std::move(rec));
            rep.converged = true;
            break;
        }
        const auto clusters = get_clusters(E, sys, eps_cluster > 0.0 ? eps_cluster : 1e-6,
                                           o.velocity_scale);
        for (const auto& c : clusters) rec.clusters.push_back(cluster_json(c));
        if (rep.iterations >= o.max_iterations) {
            rec.seconds = seconds_since(ti);
            rep.history.push_back(std::move(rec));
            rep.failure = "iteration budget exhausted";
            break;
        }
        try {
            CandidateInfo info = get_cbf(clusters.front(), rep.final_barriers, ctx, family);
            nlohmann::json prov = info.params;
            prov["label"] = info.barrier.label();
            prov["iteration"] = rep.iterations + 1;
            prov["cluster"] = cluster_json(clusters.front());
            prov["min_interference_dot"] = info.min_interference_dot;
            prov["scbf_worst_margin"] = info.scbf_worst_margin;
            prov["candidates_examined"] = info.candidates_examined;
            rec.added = prov;
            rep.added.push_back(prov);
            rep.final_barriers.push_back(info.barrier);
            ++rep.iterations;
        } catch (const NoCandidateError& e) {
            rec.seconds = seconds_since(ti);
            rep.history.push_back(std::move(rec));
            rep.failure = e.what();
            break;
        }
        rec.seconds = seconds_since(ti);
        rep.history.push_back(std::move(rec));
    }
    rep.seconds = seconds_since(t0);
    return rep;
}

InfeasibleFraction infeasible_fraction(std::span<const Barrier> barriers,
                                       const ViabilityContext& ctx, const GridSpec& grid)
{
    ViabilityContext c = ctx;
    c.grid = grid;
    const auto D = sample_boundary_intersections(barriers, c);
    const auto E = get_infeasible_set(D, barriers, *ctx.system, ctx.U, ctx.options.threads);
    InfeasibleFraction f;
    f.samples = static_cast<int>(D.size());
    f.infeasible = static_cast<int>(E.size());
    f.fraction = D.empty() ? 0.0 : static_cast<double>(E.size()) / static_cast<double>(D.size());
    return f;
}

}  // namespace cbfcomp
