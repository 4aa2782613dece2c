#include <cmath>
#include <vector>

#include <doctest.h>

#include "oswitch/bsde_lattice.hpp"

using namespace oswitch;

namespace {

Generator decay_generator(double a) {
    Generator g;
    g.psi = [a](double, double y, std::span<const double>, int, std::span<const double>) {
        return a * y;
    };
    g.lipschitz = std::abs(a);
    return g;
}

Generator constant_generator(std::vector<double> c) {
    Generator g;
    g.psi = [c](double, double, std::span<const double>, int mode, std::span<const double>) {
        return c[mode];
    };
    g.lipschitz = 0.0;
    return g;
}

}  // namespace

TEST_CASE("plain solve reproduces the discrete exponential") {
    // y_k = y_{k+1} / (1 + 0.1 dt), so Y(0) = (1 + 0.1/N)^{-N}
    const int N = 16;
    const auto lat = LatticeModel::build(1.0, N, 1);
    const auto sol = solve_plain_bsde(lat, 1, decay_generator(-0.1),
                                      TerminalCondition::constant({1.0}));
    const double expected = std::pow(1.0 + 0.1 / N, -N);
    CHECK(sol.Y[0][0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("constant driver integrates exactly") {
    const auto lat = LatticeModel::build(2.0, 10, 1);
    const auto sol = solve_plain_bsde(lat, 2, constant_generator({0.3, -0.4}),
                                      TerminalCondition::constant({1.0, 0.5}));
    CHECK(sol.Y[0][0] == doctest::Approx(1.0 + 0.3 * 2.0).epsilon(1e-13));
    CHECK(sol.Y[0][1] == doctest::Approx(0.5 - 0.4 * 2.0).epsilon(1e-13));
}

TEST_CASE("Z recovers the slope of a linear terminal") {
    const auto lat = LatticeModel::build(1.0, 8, 1);
    const auto sol = solve_plain_bsde(
        lat, 1, constant_generator({0.0}),
        TerminalCondition::function([](std::span<const double> w, int) { return 3.0 * w[0]; }));
    // Y is the martingale 3 W, so Z = 3 at every node
    for (int n = 0; n < 8; ++n)
        for (std::size_t v = 0; v < lat.levels()[n].size(); ++v)
            CHECK(sol.Z[n][v] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(sol.Y[0][0] == doctest::Approx(0.0).epsilon(1e-13));
}

TEST_CASE("reflected solve equals plain solve when constraints never bind") {
    SwitchingStructure s(2, {0, 50, 50, 0});
    const auto g = constant_generator({0.3, -0.2});
    const auto terminal = TerminalCondition::constant({0.1, -0.1});
    const auto lat = LatticeModel::build(1.0, 12, 1);
    const auto plain = solve_plain_bsde(lat, 2, g, terminal);
    const auto refl = solve_reflected_dp(lat, s, g, terminal);
    for (int n = 0; n <= 12; ++n)
        for (std::size_t k = 0; k < plain.Y[n].size(); ++k) {
            CHECK(refl.Y[n][k] == plain.Y[n][k]);
            CHECK(refl.dK[n][k] == 0.0);
        }
}

TEST_CASE("deterministic two-mode value is exact on the grid") {
    // running rates (2, 0), switch cost 0.5 both ways, zero terminal:
    // Y_0(t) = min(2 (T - t), 0.5), Y_1(t) = 0
    SwitchingStructure s(2, {0, 0.5, 0.5, 0});
    const auto g = constant_generator({2.0, 0.0});
    const auto terminal = TerminalCondition::constant({0.0, 0.0});
    const auto lat = LatticeModel::build(1.0, 8, 1);
    const auto sol = solve_reflected_dp(lat, s, g, terminal);
    for (int n = 0; n <= 8; ++n) {
        const double expected = std::min(2.0 * (1.0 - lat.time(n)), 0.5);
        for (std::size_t v = 0; v < lat.levels()[n].size(); ++v) {
            CHECK(sol.Y[n][v * 2] == doctest::Approx(expected).epsilon(1e-13));
            CHECK(sol.Y[n][v * 2 + 1] == doctest::Approx(0.0).epsilon(1e-13));
        }
    }
}

TEST_CASE("reflected diagnostics are exact") {
    SwitchingStructure s(2, {0, 0.5, 0.5, 0});
    const auto lat = LatticeModel::build(1.0, 16, 1);
    const auto sol = solve_reflected_dp(lat, s, constant_generator({2.0, 0.0}),
                                        TerminalCondition::constant({0.0, 0.0}));
    const auto diag = diagnose_reflected(sol, lat, s);
    CHECK(diag.max_constraint_violation <= 0.0);
    CHECK(diag.skorokhod_residual == 0.0);
    CHECK(diag.min_dK >= 0.0);
}

TEST_CASE("terminal data outside the domain closure is rejected") {
    SwitchingStructure s(2, {0, 0.5, 0.5, 0});
    const auto lat = LatticeModel::build(1.0, 4, 1);
    CHECK_THROWS_AS(solve_reflected_dp(lat, s, constant_generator({0.0, 0.0}),
                                       TerminalCondition::constant({1.0, 0.0})),
                    PreconditionError);
}

TEST_CASE("non-contractive step size is rejected") {
    const auto lat = LatticeModel::build(1.0, 2, 1);  // dt = 0.5
    CHECK_THROWS_AS(solve_plain_bsde(lat, 1, decay_generator(-3.0),
                                     TerminalCondition::constant({1.0})),
                    PreconditionError);
}
