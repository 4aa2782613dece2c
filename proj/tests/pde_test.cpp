#include <cmath>
#include <limits>
#include <vector>

#include <doctest.h>

#include "oswitch/pde.hpp"

using namespace oswitch;

namespace {

MarkovianCoefficients base_coeffs(std::vector<double> psi_const,
                                  std::vector<double> term_const, double b = 0.0,
                                  double sigma = 0.3) {
    MarkovianCoefficients c;
    c.b = [b](double, double) { return b; };
    c.sigma = [sigma](double, double) { return sigma; };
    c.psi.psi = [psi_const](double, double, std::span<const double>, int mode,
                            std::span<const double>) { return psi_const[mode]; };
    c.psi.lipschitz = 0.0;
    if (!term_const.empty()) c.terminal = TerminalCondition::constant(term_const);
    return c;
}

PdeGridSpec small_spec() {
    PdeGridSpec spec;
    spec.x_min = -2.0;
    spec.x_max = 2.0;
    spec.space_nodes = 41;
    spec.time_steps = 20;
    spec.T = 1.0;
    return spec;
}

}  // namespace

TEST_CASE("constant data is reproduced exactly when the constraint is slack") {
    SwitchingStructure s(2, {0, 5, 5, 0});
    const auto c = base_coeffs({0.3, -0.2}, {0.1, -0.1});
    const auto grid = solve_vi_projection(c, s, small_spec());
    // u_i(t, x) = terminal_i + psi_i (T - t), space-independent
    for (int level = 0; level <= grid.spec.time_steps; ++level) {
        const double tau = grid.spec.T - grid.time(level);
        for (int j = 0; j < grid.spec.space_nodes; ++j) {
            CHECK(grid.u[level][j * 2 + 0] == doctest::Approx(0.1 + 0.3 * tau).epsilon(1e-10));
            CHECK(grid.u[level][j * 2 + 1] == doctest::Approx(-0.1 - 0.2 * tau).epsilon(1e-10));
        }
    }
}

TEST_CASE("linear terminal data stays linear under the heat operator") {
    // g_i(x) = x is harmonic, so u_i(t, x) = x + psi_i (T - t) when b = 0
    SwitchingStructure s(2, {0, 50, 50, 0});
    auto c = base_coeffs({0.2, -0.1}, {});
    c.terminal =
        TerminalCondition::function([](std::span<const double> x, int) { return x[0]; });
    const auto grid = solve_vi_projection(c, s, small_spec());
    for (int j = 0; j < grid.spec.space_nodes; ++j) {
        CHECK(grid.u[0][j * 2 + 0] == doctest::Approx(grid.x(j) + 0.2).epsilon(1e-9));
        CHECK(grid.u[0][j * 2 + 1] == doctest::Approx(grid.x(j) - 0.1).epsilon(1e-9));
    }
}

TEST_CASE("single mode recovers the discrete exponential") {
    SwitchingStructure one(1, {0});
    MarkovianCoefficients c = base_coeffs({0.0}, {1.0});
    c.psi.psi = [](double, double y, std::span<const double>, int,
                   std::span<const double>) { return -0.1 * y; };
    c.psi.lipschitz = 0.1;
    auto spec = small_spec();
    const auto grid = solve_vi_projection(c, one, spec);
    const double expected = std::pow(1.0 + 0.1 * grid.dt, -spec.time_steps);
    for (int j = 0; j < spec.space_nodes; ++j)
        CHECK(grid.u[0][j] == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("vanishing diffusion reproduces the deterministic switching value") {
    SwitchingStructure s(2, {0, 0.5, 0.5, 0});
    const auto c = base_coeffs({2.0, 0.0}, {0.0, 0.0}, 0.0, 0.01);
    auto spec = small_spec();
    spec.time_steps = 200;
    const auto grid = solve_vi_projection(c, s, spec);
    const int mid = spec.space_nodes / 2;
    CHECK(grid.u[0][mid * 2 + 0] == doctest::Approx(0.5).epsilon(1e-3));
    CHECK(grid.u[0][mid * 2 + 1] == doctest::Approx(0.0).epsilon(1e-3));
}

TEST_CASE("projected solution lies in the domain and is complementary") {
    SwitchingStructure s(2, {0, 0.5, 0.5, 0});
    const auto c = base_coeffs({2.0, 0.0}, {0.0, 0.0});
    const auto grid = solve_vi_projection(c, s, small_spec());
    for (const auto& level : grid.u)
        for (int j = 0; j * 2 + 1 < static_cast<int>(level.size()); ++j) {
            CHECK(level[j * 2 + 0] <= level[j * 2 + 1] + 0.5 + 1e-12);
            CHECK(level[j * 2 + 1] <= level[j * 2 + 0] + 0.5 + 1e-12);
        }
    const auto rep = check_complementarity(grid, c, s, 1e-9);
    CHECK(rep.max_violation <= 1e-8);
}

TEST_CASE("penalized grids decrease in n toward the projected solution") {
    SwitchingStructure s(2, {0, 0.5, 0.5, 0});
    const auto c = base_coeffs({2.0, 0.0}, {0.0, 0.0});
    const auto spec = small_spec();
    const auto ref = solve_vi_projection(c, s, spec);
    double prev_dist = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> prev;
    for (double n : {1.0, 10.0, 100.0}) {
        const auto grid = solve_penalized_pde(c, s, spec, n);
        double dist = 0.0;
        for (std::size_t lv = 0; lv < grid.u.size(); ++lv)
            for (std::size_t k = 0; k < grid.u[lv].size(); ++k) {
                dist = std::max(dist, std::abs(grid.u[lv][k] - ref.u[lv][k]));
                CHECK(grid.u[lv][k] >= ref.u[lv][k] - 1e-9);
                if (!prev.empty()) CHECK(grid.u[lv][k] <= prev[lv][k] + 1e-9);
            }
        CHECK(dist <= prev_dist + 1e-12);
        prev_dist = dist;
        prev = grid.u;
    }
}

TEST_CASE("zero penalty equals the decoupled unprojected scheme") {
    SwitchingStructure s(2, {0, 0.5, 0.5, 0});
    const auto c = base_coeffs({0.4, -0.3}, {0.2, -0.2});
    const auto grid = solve_penalized_pde(c, s, small_spec(), 0.0);
    for (int level = 0; level <= grid.spec.time_steps; ++level) {
        const double tau = grid.spec.T - grid.time(level);
        for (int j = 0; j < grid.spec.space_nodes; ++j) {
            CHECK(grid.u[level][j * 2 + 0] == doctest::Approx(0.2 + 0.4 * tau).epsilon(1e-10));
            CHECK(grid.u[level][j * 2 + 1] == doctest::Approx(-0.2 - 0.3 * tau).epsilon(1e-10));
        }
    }
}

TEST_CASE("bilinear value interpolation clamps to the box") {
    SwitchingStructure s(2, {0, 5, 5, 0});
    const auto c = base_coeffs({0.3, -0.2}, {0.1, -0.1});
    const auto grid = solve_vi_projection(c, s, small_spec());
    CHECK(grid.value(0.0, 0.3, 0) == doctest::Approx(0.1 + 0.3).epsilon(1e-9));
    CHECK(grid.value(0.0, 100.0, 0) == doctest::Approx(grid.value(0.0, 2.0, 0)));
    CHECK(grid.value(-1.0, 0.0, 1) == doctest::Approx(grid.value(0.0, 0.0, 1)));
}

TEST_CASE("probabilistic cross-check agrees for driverless constant data") {
    SwitchingStructure s(2, {0, 5, 5, 0});
    const auto c = base_coeffs({0.0, 0.0}, {0.7, -0.4});
    const auto grid = solve_vi_projection(c, s, small_spec());
    const std::vector<FkPoint> pts{{0.0, 0.0}, {0.5, 0.5}, {0.25, -0.8}};
    const auto rep = feynman_kac_check(c, s, grid, pts);
    CHECK(rep.max_gap <= 1e-9);
    REQUIRE(!rep.entries.empty());
    for (const auto& e : rep.entries)
        CHECK(e.u_pde == doctest::Approx(e.mode == 0 ? 0.7 : -0.4).epsilon(1e-9));
}

TEST_CASE("probabilistic cross-check tracks a diffusive solution") {
    SwitchingStructure s(2, {0, 0.5, 0.5, 0});
    MarkovianCoefficients c = base_coeffs({0.0, 0.0}, {}, 0.05, 0.4);
    c.psi.psi = [](double, double, std::span<const double>, int mode,
                   std::span<const double> x) {
        return mode == 0 ? 0.4 * x[0] * x[0] : 0.2;
    };
    c.psi.lipschitz = 0.0;
    c.terminal = TerminalCondition::function(
        [](std::span<const double> x, int) { return 0.1 * x[0] * x[0]; });
    PdeGridSpec spec;
    spec.x_min = -3.0;
    spec.x_max = 3.0;
    spec.space_nodes = 61;
    spec.time_steps = 30;
    spec.T = 1.0;
    const auto grid = solve_vi_projection(c, s, spec);
    const std::vector<FkPoint> pts{{0.0, 0.0}, {0.5, 0.8}, {0.25, -1.0}};
    const auto rep = feynman_kac_check(c, s, grid, pts);
    CHECK(rep.max_gap <= 5e-2);
}

TEST_CASE("cross-check rejects points near the boundary") {
    SwitchingStructure s(2, {0, 5, 5, 0});
    const auto c = base_coeffs({0.0, 0.0}, {0.7, -0.4});
    const auto grid = solve_vi_projection(c, s, small_spec());
    const std::vector<FkPoint> pts{{0.0, 1.9}};
    CHECK_THROWS_AS(feynman_kac_check(c, s, grid, pts), PreconditionError);
}

TEST_CASE("grid validation") {
    SwitchingStructure s(2, {0, 0.5, 0.5, 0});
    const auto c = base_coeffs({0.0, 0.0}, {0.0, 0.0});
    PdeGridSpec bad = small_spec();
    bad.space_nodes = 2;
    CHECK_THROWS_AS(solve_vi_projection(c, s, bad), StructuralError);
    PdeGridSpec flipped = small_spec();
    flipped.x_max = flipped.x_min;
    CHECK_THROWS_AS(solve_vi_projection(c, s, flipped), StructuralError);
}
