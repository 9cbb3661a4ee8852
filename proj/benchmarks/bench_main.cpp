#include <benchmark/benchmark.h>

#include <string>

#include "cbfcomp/feasibility.hpp"
#include "cbfcomp/scenario.hpp"
#include "cbfcomp/viability.hpp"

using namespace cbfcomp;

namespace {

Scenario scenario(const std::string& name)
{
    return build_scenario(load_scenario(std::string(CBFCOMP_SCENARIO_DIR) + "/" + name + ".json"));
}

// rows at random working-domain states of ex5
std::vector<std::vector<CbfRow>> ex5_rows(const Scenario& sc, int n)
{
    const auto ctx = sc.context();
    std::vector<std::vector<CbfRow>> out;
    Rng rng(1);
    while (static_cast<int>(out.size()) < n) {
        const State s = ctx.grid.uniform(*sc.system, rng);
        if (in_working_domain(sc.barriers, ctx, s.q, s.v, 0.0))
            out.push_back(cbf_rows(sc.barriers, *sc.system, s.q, s.v));
    }
    return out;
}

void BM_SafetyQp(benchmark::State& st)
{
    const Scenario sc = scenario("ex5");
    const auto rows = ex5_rows(sc, 256);
    Vector u_nom(2);
    u_nom << 1.0, 0.0;
    std::size_t i = 0;
    for (auto _ : st) {
        QpProblem p{u_nom, rows[i++ % rows.size()], {}, sc.U};
        benchmark::DoNotOptimize(solve_safety_qp(p));
    }
}
BENCHMARK(BM_SafetyQp);

void BM_LpFeasibleAttitude(benchmark::State& st)
{
    const Scenario sc = scenario("attitude_coarse");
    Rng rng(2);
    std::vector<std::vector<CbfRow>> rows;
    for (int k = 0; k < 256; ++k) {
        const Vector q = random_unit_quaternion(rng);
        const Vector w = 0.1 * random_unit_vector(rng, 3);
        rows.push_back(cbf_rows(sc.barriers, *sc.system, q, w));
    }
    std::size_t i = 0;
    for (auto _ : st) benchmark::DoNotOptimize(lp_feasible(rows[i++ % rows.size()], sc.U));
}
BENCHMARK(BM_LpFeasibleAttitude);

void BM_BoundarySamplingEx3(benchmark::State& st)
{
    const Scenario sc = scenario("ex3");
    const auto ctx = sc.context();
    for (auto _ : st) benchmark::DoNotOptimize(sample_boundary_intersections(sc.barriers, ctx));
}
BENCHMARK(BM_BoundarySamplingEx3)->Unit(benchmark::kMillisecond);

void BM_BuildEx4(benchmark::State& st)
{
    const Scenario sc = scenario("ex4");
    const auto ctx = sc.context();
    for (auto _ : st)
        benchmark::DoNotOptimize(build_viability_domain(sc.barriers, ctx, sc.config.algorithm.family));
}
BENCHMARK(BM_BuildEx4)->Unit(benchmark::kMillisecond)->Iterations(3);

void BM_BuildAttitudeCoarse(benchmark::State& st)
{
    const Scenario sc = scenario("attitude_coarse");
    const auto ctx = sc.context();
    for (auto _ : st)
        benchmark::DoNotOptimize(build_viability_domain(sc.barriers, ctx, sc.config.algorithm.family));
}
BENCHMARK(BM_BuildAttitudeCoarse)->Unit(benchmark::kMillisecond)->Iterations(1);

}  // namespace
BENCHMARK_MAIN();
