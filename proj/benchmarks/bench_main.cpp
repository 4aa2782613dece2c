#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "oswitch/bsde_lattice.hpp"
#include "oswitch/penalization.hpp"

namespace {

using namespace oswitch;

SwitchingStructure three_modes() {
    return SwitchingStructure(3, {0, 0.3, 0.35, 0.32, 0, 0.3, 0.3, 0.34, 0});
}

Generator linear3() {
    Generator g;
    g.psi = [](double, double y, std::span<const double> z, int mode,
               std::span<const double>) {
        static const double a[] = {-0.2, 0.1, 0.0};
        static const double b[] = {0.1, -0.1, 0.05};
        static const double c[] = {1.0, -0.5, 0.2};
        return a[mode] * y + (z.empty() ? 0.0 : b[mode] * z[0]) + c[mode];
    };
    g.lipschitz = 0.3;
    return g;
}

void BM_ObliqueProject(benchmark::State& state) {
    const auto s = three_modes();
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<double> y{u(rng), u(rng), u(rng)};
    for (auto _ : state) {
        benchmark::DoNotOptimize(oblique_project(y, s));
        y[0] = u(rng);
    }
}
BENCHMARK(BM_ObliqueProject);

void BM_ReflectedSolve(benchmark::State& state) {
    const auto s = three_modes();
    const auto g = linear3();
    const auto terminal = TerminalCondition::constant({0.1, 0.0, -0.05});
    const auto lattice = LatticeModel::build(1.0, static_cast<int>(state.range(0)), 1);
    for (auto _ : state)
        benchmark::DoNotOptimize(solve_reflected_dp(lattice, s, g, terminal));
}
BENCHMARK(BM_ReflectedSolve)->Arg(16)->Arg(32)->Arg(64);

void BM_PenalizedSolve(benchmark::State& state) {
    const auto s = three_modes();
    const auto g = linear3();
    const auto terminal = TerminalCondition::constant({0.1, 0.0, -0.05});
    const auto lattice = LatticeModel::build(1.0, 32, 1);
    for (auto _ : state)
        benchmark::DoNotOptimize(
            solve_penalized(lattice, s, g, terminal, static_cast<double>(state.range(0))));
}
BENCHMARK(BM_PenalizedSolve)->Arg(16)->Arg(256);

void BM_GaussHermiteBuild(benchmark::State& state) {
    BranchSpec spec;
    spec.kind = BranchSpec::Kind::GaussHermite;
    spec.gh_nodes = 4;
    for (auto _ : state)
        benchmark::DoNotOptimize(
            LatticeModel::build(1.0, static_cast<int>(state.range(0)), 1, spec));
}
BENCHMARK(BM_GaussHermiteBuild)->Arg(16)->Arg(32);

}  // namespace
