#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "cbfcomp/attitude.hpp"
#include "cbfcomp/barriers.hpp"
#include "cbfcomp/feasibility.hpp"
#include "cbfcomp/simulation.hpp"

using namespace cbfcomp;

namespace {

const double kSqrt2 = std::numbers::sqrt2;

Vector vec(std::initializer_list<double> xs)
{
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

std::vector<Barrier> example_pair(double g, double c)
{
    auto k1 = std::make_shared<HalfPlaneConstraint>(vec({1, g}), 0.0, "k1");
    auto k2 = std::make_shared<HalfPlaneConstraint>(vec({1, -g}), 0.0, "k2");
    return {Barrier::high_order(k1, c), Barrier::high_order(k2, c)};
}

struct Fd {
    Vector dq, dv;
};

Fd fd_barrier(const Barrier& b, const SecondOrderSystem& sys, const Vector& q, const Vector& v)
{
    const double s = 1e-6;
    Fd out{Vector(q.size()), Vector(v.size())};
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        Vector a = q, c = q;
        a[i] += s;
        c[i] -= s;
        out.dq[i] = (barrier_value(b, sys, a, v) - barrier_value(b, sys, c, v)) / (2 * s);
    }
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        Vector a = v, c = v;
        a[i] += s;
        c[i] -= s;
        out.dv[i] = (barrier_value(b, sys, q, a) - barrier_value(b, sys, q, c)) / (2 * s);
    }
    return out;
}

double rel(const Vector& a, const Vector& b)
{
    return ((a - b).array().abs() / a.array().abs().max(1.0)).maxCoeff();
}

}  // namespace

TEST(BarrierValue, ExampleOneBoundary)
{
    DoubleIntegrator sys(2);
    for (double g : {0.5, 0.75, 1.25}) {
        const auto bs = example_pair(g, 2 * (1 + g));
        const Vector q0 = vec({-1 / (2 * (1 + g)), 0}), v0 = vec({1, 0});
        EXPECT_NEAR(barrier_value(bs[0], sys, q0, v0), 0.0, 1e-14);
        EXPECT_NEAR(barrier_value(bs[1], sys, q0, v0), 0.0, 1e-14);
    }
}

TEST(BarrierValue, Direct)
{
    AttitudeSystem sys;
    const auto eta = rate_limit_constraints(0.2);
    const Barrier b = Barrier::direct(eta[0]);
    EXPECT_NEAR(barrier_value(b, sys, vec({0, 0, 0, 1}), vec({0.2, 0, 0})), 0.0, 1e-15);
}

TEST(BarrierValue, ClampedOutsideAndContinuous)
{
    DoubleIntegrator sys(2);
    const Barrier b = example_pair(0.5, 3.0)[0];
    const Vector v = vec({0.3, -0.2});
    const double kd = 0.3 - 0.1;
    EXPECT_DOUBLE_EQ(barrier_value(b, sys, vec({0.4, 0}), v), kd);
    double prev = 0.0;
    for (double k : {-1e-2, -1e-4, -1e-6, -1e-8, -1e-10}) {
        const double h = barrier_value(b, sys, vec({k, 0}), v);
        EXPECT_NEAR(h, kd - std::sqrt(-3.0 * k), 1e-14);
        prev = h;
    }
    EXPECT_NEAR(prev, kd, 1e-4);
}

TEST(BarrierGradients, ExampleOneVelocityGradient)
{
    DoubleIntegrator sys(2);
    const double g = 0.75;
    const auto bs = example_pair(g, 2 * (1 + g));
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
        const Vector q = vec({-1.0 - std::abs(gaussian_vector(rng, 1)[0]), 0.1});
        const Vector v = gaussian_vector(rng, 2);
        EXPECT_LT((barrier_gradients(bs[0], sys, q, v).dv - vec({1, g})).norm(), 1e-15);
    }
}

TEST(BarrierGradients, HalfPlaneHandValue)
{
    DoubleIntegrator sys(2);
    auto k = std::make_shared<HalfPlaneConstraint>(vec({0.6, 0.8}), 0.0);
    const Barrier b = Barrier::high_order(k, 2.0);
    // kappa = -1
    const auto gr = barrier_gradients(b, sys, vec({-0.6, -0.8}), vec({0.1, 0.2}));
    EXPECT_LT((gr.dq - vec({0.6, 0.8}) / kSqrt2).norm(), 1e-14);
}

TEST(BarrierGradients, DirectAndSingular)
{
    AttitudeSystem sys;
    const Barrier d = Barrier::direct(rate_limit_constraints(0.2)[0]);
    const auto gr = barrier_gradients(d, sys, vec({0, 0, 0, 1}), vec({0.1, 0, 0}));
    EXPECT_EQ(gr.dq.norm(), 0.0);
    EXPECT_EQ(gr.dv, vec({1, 0, 0}));
    DoubleIntegrator di(2);
    const Barrier b = example_pair(0.5, 3.0)[0];
    EXPECT_THROW(barrier_gradients(b, di, vec({-1e-12, 0}), vec({0, 0})), SingularBarrierError);
}

TEST(CbfRow, ExampleOneRows)
{
    DoubleIntegrator sys(2);
    for (double g : {0.5, 0.75, 1.25}) {
        const auto bs = example_pair(g, 2 * (1 + g));
        const Vector q0 = vec({-1 / (2 * (1 + g)), 0}), v0 = vec({1, 0});
        const CbfRow r1 = cbf_row(bs[0], sys, q0, v0), r2 = cbf_row(bs[1], sys, q0, v0);
        EXPECT_LT((r1.A - vec({1, g})).norm(), 1e-12);
        EXPECT_LT((r2.A - vec({1, -g})).norm(), 1e-12);
        EXPECT_NEAR(r1.b, -(1 + g), 1e-9);
        EXPECT_NEAR(r2.b, -(1 + g), 1e-9);
    }
}

TEST(CbfRow, ExampleFourRows)
{
    DoubleIntegrator sys(2);
    const double g = 1.25, c = 4 * g / (1 + kSqrt2);
    const auto bs = example_pair(g, c);
    const Vector q0 = vec({-(1 + kSqrt2) / (4 * g), 0}), v0 = vec({1, 0});
    const auto rows = cbf_rows(bs, sys, q0, v0);
    for (const auto& r : rows) EXPECT_NEAR(r.b, -2 * g / (1 + kSqrt2), 1e-9);
    EXPECT_FALSE(lp_feasible(rows, ControlSet::inf_ball(2, 1.0)).has_value());
}

TEST(CbfRow, DirectInterior)
{
    AttitudeSystem sys;
    const Barrier d = Barrier::direct(rate_limit_constraints(0.2)[0]);
    const CbfRow r = cbf_row(d, sys, vec({0, 0, 0, 1}), vec({0.05, 0, 0}));
    EXPECT_NEAR(r.b, 0.15, 1e-15);
    EXPECT_EQ(r.A, vec({1, 0, 0}));
}

TEST(Noninterfering, ExamplePairs)
{
    DoubleIntegrator sys(2);
    const StateSampler X = [](Rng& rng) { return State{gaussian_vector(rng, 2), gaussian_vector(rng, 2)}; };
    for (double g : {0.5, 0.75, 1.0, 1.25}) {
        const auto bs = example_pair(g, 2 * (1 + g));
        const auto r = noninterfering(bs[0], bs[1], sys, X, 200, 0);
        EXPECT_NEAR(r.min_dot, 1 - g * g, 1e-12);
        EXPECT_EQ(r.pass, 1 - g * g >= 0.0);
    }
    const auto bs = example_pair(1.25, 2.0);
    EXPECT_TRUE(noninterfering(bs[0], bs[0], sys, X, 50, 0).pass);
}

TEST(Scbf, TwoBallBarrierPassesWhenCbf)
{
    DoubleIntegrator sys(2);
    auto k = std::make_shared<HalfPlaneConstraint>(vec({1, 0}), 0.0);
    const ControlSet ball = ControlSet::two_ball(2, 1.0);
    const Barrier b = Barrier::high_order(k, 2.0);
    const StateSampler X = [](Rng& rng) {
        std::uniform_real_distribution<double> U(-2, 2);
        return State{vec({-std::abs(U(rng)), U(rng)}), vec({U(rng), U(rng)})};
    };
    EXPECT_TRUE(scbf_check(b, sys, X, ball, 2000, 0).pass);
    EXPECT_TRUE(cbf_check(b, sys, X, ball, 2000, 0).pass);
    // c too large: needs more braking than the ball offers
    const Barrier hard = Barrier::high_order(k, 3.0);
    const auto r = scbf_check(hard, sys, X, ball, 2000, 0);
    EXPECT_FALSE(r.pass);
    EXPECT_LT(r.worst_margin, 0.0);
}

TEST(Scbf, MarginSign)
{
    DoubleIntegrator sys(2);
    auto k = std::make_shared<HalfPlaneConstraint>(vec({1, 0}), 0.0);
    const Barrier b = Barrier::high_order(k, 2.0);
    const ControlSet ball = ControlSet::two_ball(2, 1.0);
    // on the boundary with kappa = -0.5: b = -1 + radius = 0
    EXPECT_NEAR(scbf_margin(b, sys, vec({-0.5, 0}), vec({1, 0}), ball), 0.0, 1e-12);
    EXPECT_NEAR(cbf_margin(b, sys, vec({-0.5, 0}), vec({1, 0}), ball), 0.0, 1e-12);
}

TEST(BarrierProperty, VelocityGradientIndependentOfCoefficient)
{
    AttitudeSystem sys;
    Rng rng(12);
    auto cone = std::make_shared<ConeConstraint>(vec({1, 0, 0}), vec({0, 1, 0}), 0.5);
    for (int t = 0; t < 100; ++t) {
        const Vector q = random_unit_quaternion(rng);
        if (cone->value(q) > -1e-3) continue;
        const Vector w = gaussian_vector(rng, 3);
        const Vector base = barrier_gradients(Barrier::high_order(cone, 1.0), sys, q, w).dv;
        for (double c : {0.5, 2.0}) {
            const Vector dv = barrier_gradients(Barrier::high_order(cone, c), sys, q, w).dv;
            EXPECT_LT((dv - base).norm(), 1e-15);
        }
    }
}

TEST(BarrierProperty, FiniteDifferenceGradients)
{
    Rng rng(13);
    AttitudeSystem att;
    DoubleIntegrator di(2);
    auto cone = std::make_shared<ConeConstraint>(vec({1, 0, 0}), vec({0.6, 0.8, 0}), 0.6);
    auto hp = std::make_shared<HalfPlaneConstraint>(vec({1, 0.75}), 0.1);
    int n = 0;
    while (n < 100) {
        const Vector q = random_unit_quaternion(rng);
        if (cone->value(q) > -1e-3) continue;
        const Vector w = 0.3 * gaussian_vector(rng, 3);
        const Barrier b = Barrier::high_order(cone, 0.7);
        const auto g = barrier_gradients(b, att, q, w);
        const Fd fd = fd_barrier(b, att, q, w);
        EXPECT_LT(rel(g.dq, fd.dq), 1e-5);
        EXPECT_LT(rel(g.dv, fd.dv), 1e-5);
        const Vector p = vec({-1.0 - std::abs(gaussian_vector(rng, 1)[0]), gaussian_vector(rng, 1)[0]});
        if (hp->value(p) > -1e-3) continue;
        const Vector v = gaussian_vector(rng, 2);
        const Barrier bh = Barrier::high_order(hp, 3.5);
        const auto gh = barrier_gradients(bh, di, p, v);
        const Fd fh = fd_barrier(bh, di, p, v);
        EXPECT_LT(rel(gh.dq, fh.dq), 1e-5);
        EXPECT_LT(rel(gh.dv, fh.dv), 1e-5);
        ++n;
    }
}

TEST(BarrierProperty, RowMatchesFlowDerivative)
{
    AttitudeSystem sys;
    Rng rng(14);
    auto cone = std::make_shared<ConeConstraint>(vec({1, 0, 0}), vec({0, 0, 1}), 0.7);
    const Barrier b = Barrier::high_order(cone, 0.5);
    int n = 0;
    while (n < 100) {
        const Vector q = random_unit_quaternion(rng);
        if (cone->value(q) > -1e-2) continue;
        const Vector w = 0.3 * gaussian_vector(rng, 3), u = gaussian_vector(rng, 3);
        const CbfRow r = cbf_row(b, sys, q, w);
        const double h = barrier_value(b, sys, q, w);
        // hdot = A u - (b - alpha(-h)) + ... : A u + drift with drift = alpha(-h) - b
        const double analytic = r.A.dot(u) + (r.alpha_term - r.b);
        const double dt = 1e-6;
        const Flow f = flow(sys, q, w, u);
        const Flow fm = flow(sys, q, w, u);
        const double hp = barrier_value(b, sys, q + dt * f.qdot, w + dt * f.vdot);
        const double hm = barrier_value(b, sys, q - dt * fm.qdot, w - dt * fm.vdot);
        EXPECT_NEAR((hp - hm) / (2 * dt), analytic, 1e-5 * std::max(1.0, std::abs(analytic)));
        EXPECT_NEAR(r.alpha_term, b.alpha(-h), 1e-15);
        ++n;
    }
}

TEST(BarrierProperty, BoundaryCompatibility)
{
    DoubleIntegrator sys(2);
    const double g = 0.75;
    const auto bs = example_pair(g, 2 * (1 + g));
    Rng rng(15);
    for (int t = 0; t < 200; ++t) {
        const double y = gaussian_vector(rng, 1)[0];
        const Vector q = vec({-g * y, y});  // kappa1 = 0
        EXPECT_LT(std::abs(bs[0].position()->value(q)), 1e-12);
        // h1 = 0 on kappa1 = 0 forces kappa_dot = 0
        const Vector v = vec({g, -1}) * gaussian_vector(rng, 1)[0];
        EXPECT_NEAR(barrier_value(bs[0], sys, q, v), 0.0, 1e-12);
        EXPECT_NEAR(kappa_dot(bs[0], sys, q, v), 0.0, 1e-12);
    }
}
