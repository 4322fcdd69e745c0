#include "poolalloc/frontier.hpp"
#include "poolalloc/sirq.hpp"

#include <benchmark/benchmark.h>

using namespace poolalloc;

namespace {

Scenario campus(std::int64_t budget)
{
    Scenario sc;
    sc.categories = {{"students", 9000, 0.02, 1.0}, {"cafeteria", 500, 0.03, 1.0}, {"professors", 500, 0.03, 1.0}};
    const double d[3][3] = {{4.92, 1.34, 1.27}, {24.28, 1.44, 1.26}, {23.0, 1.26, 1.44}};
    sc.exposure.d = SquareMatrix(3);
    sc.exposure.pi = SquareMatrix(3, 0.05);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j)
            sc.exposure.d(i, j) = d[i][j];
    }
    sc.budget = budget;
    return sc;
}

void frontier(benchmark::State& state, bool parallel)
{
    const auto sc = campus(state.range(0));
    FrontierOptions opt;
    opt.parallel = parallel;
    for (auto _ : state) {
        auto r = parallel ? pareto_frontier(sc, opt) : pareto_frontier_serial(sc, opt);
        benchmark::DoNotOptimize(r.solutions.data());
        state.counters["feasible"] = static_cast<double>(r.total_feasible);
    }
}

void replicates(benchmark::State& state, bool parallel)
{
    sirq::SimConfig sim;
    sim.scenario = campus(20);
    sim.initial_infected = {10, 2, 2};
    sirq::CompareOptions opt;
    opt.replicates = state.range(0);
    opt.parallel = parallel;
    const Strategy s{{10, 5, 5}, {5, 3, 3}};
    for (auto _ : state) {
        auto cmp = sirq::compare_profiles(sim, {{"s", s}}, opt);
        benchmark::DoNotOptimize(cmp.runs.data());
    }
}

} // namespace

BENCHMARK_CAPTURE(frontier, serial, false)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(frontier, parallel, true)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(replicates, serial, false)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(replicates, parallel, true)->Arg(8)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
