#include "mflq/finite_game.hpp"
#include "mflq/limit_system.hpp"

#include <benchmark/benchmark.h>

using namespace mflq;

namespace {

GameParams example1() {
    GameParams p = GameParams::zeros(1, 1, 1);
    auto s = [](double v) { return Eigen::MatrixXd::Constant(1, 1, v); };
    p.A0 = s(1.0);
    p.B0 = s(2.0);
    p.F0 = s(0.5);
    p.A = s(0.5);
    p.B = s(1.0);
    p.F = s(0.2);
    p.G = s(0.4);
    p.D0 = s(1.0);
    p.D = s(1.0);
    p.Q0 = s(1.0);
    p.R0 = s(0.5);
    p.Gamma0 = s(0.8);
    p.Q = s(2.0);
    p.R = s(1.0);
    p.Gamma1 = s(0.3);
    p.Gamma2 = s(0.5);
    p.T = 12.0;
    return p;
}

void BM_limit_solve(benchmark::State& state) {
    const GameParams p = example1();
    const TimeGrid grid = TimeGrid::uniform(p.T, int(state.range(0)));
    for (auto _ : state) {
        auto res = solve_limit_riccati(p, grid);
        benchmark::DoNotOptimize(res);
    }
}
BENCHMARK(BM_limit_solve)->Arg(121)->Arg(1201)->Arg(12001);

void BM_structured_solve(benchmark::State& state) {
    const GameParams p = example1();
    const TimeGrid grid = TimeGrid::uniform(p.T, 1201);
    for (auto _ : state) {
        auto res = solve_structured(p, int(state.range(0)), grid);
        benchmark::DoNotOptimize(res);
    }
}
BENCHMARK(BM_structured_solve)->Arg(10)->Arg(100)->Arg(1000);

void BM_dense_oracle(benchmark::State& state) {
    const GameParams p = example1();
    const TimeGrid grid = TimeGrid::uniform(p.T, 601);
    for (auto _ : state) {
        auto res = solve_dense_oracle(p, int(state.range(0)), grid);
        benchmark::DoNotOptimize(res);
    }
}
BENCHMARK(BM_dense_oracle)->Arg(2)->Arg(4)->Arg(8);

}  // namespace

BENCHMARK_MAIN();
