#include <cmath>
#include <limits>
#include <vector>

#include <doctest.h>

#include "oswitch/penalization.hpp"

using namespace oswitch;

namespace {

Generator constant_generator(std::vector<double> c) {
    Generator g;
    g.psi = [c](double, double, std::span<const double>, int mode, std::span<const double>) {
        return c[mode];
    };
    g.lipschitz = 0.0;
    return g;
}

Generator decay_generator(double a) {
    Generator g;
    g.psi = [a](double, double y, std::span<const double>, int, std::span<const double>) {
        return a * y;
    };
    g.lipschitz = std::abs(a);
    return g;
}

struct TwoMode {
    SwitchingStructure s{2, {0, 0.5, 0.5, 0}};
    Generator g = constant_generator({2.0, 0.0});
    TerminalCondition terminal = TerminalCondition::constant({0.0, 0.0});
};

}  // namespace

TEST_CASE("zero penalty decouples into the plain solve") {
    TwoMode tm;
    const auto lat = LatticeModel::build(1.0, 8, 1);
    const auto run = solve_penalized(lat, tm.s, tm.g, tm.terminal, 0.0);
    const auto plain = solve_plain_bsde(lat, 2, tm.g, tm.terminal);
    for (int n = 0; n <= 8; ++n)
        for (std::size_t k = 0; k < plain.Y[n].size(); ++k) {
            CHECK(run.Y[n][k] == doctest::Approx(plain.Y[n][k]).epsilon(1e-12));
            CHECK(run.dK[n][k] == 0.0);
        }
}

TEST_CASE("penalty is inert when constraints never bind") {
    SwitchingStructure s(2, {0, 50, 50, 0});
    const auto g = constant_generator({0.3, -0.2});
    const auto terminal = TerminalCondition::constant({0.1, -0.1});
    const auto lat = LatticeModel::build(1.0, 8, 1);
    const auto plain = solve_plain_bsde(lat, 2, g, terminal);
    for (double n : {1.0, 64.0, 1024.0}) {
        const auto run = solve_penalized(lat, s, g, terminal, n);
        CHECK(run.violation_total == 0.0);
        for (std::size_t k = 0; k < plain.Y[0].size(); ++k)
            CHECK(run.Y[0][k] == doctest::Approx(plain.Y[0][k]).epsilon(1e-12));
    }
}

TEST_CASE("penalized roots decrease in n and dominate the reflected value") {
    TwoMode tm;
    const auto lat = LatticeModel::build(1.0, 16, 1);
    const auto refl = solve_reflected_dp(lat, tm.s, tm.g, tm.terminal);
    double prev = std::numeric_limits<double>::infinity();
    for (double n : {1.0, 4.0, 16.0, 64.0, 256.0}) {
        const auto run = solve_penalized(lat, tm.s, tm.g, tm.terminal, n);
        CHECK(run.Y[0][0] <= prev + 1e-12);
        CHECK(run.Y[0][0] >= refl.Y[0][0] - 1e-9);
        prev = run.Y[0][0];
    }
}

TEST_CASE("schedule report extrapolates the deterministic root") {
    TwoMode tm;
    const auto lat = LatticeModel::build(1.0, 32, 1);
    const auto refl = solve_reflected_dp(lat, tm.s, tm.g, tm.terminal);
    const std::vector<double> n_list{1, 4, 16, 64, 256, 1024};
    const auto rep = run_schedule(lat, tm.s, tm.g, tm.terminal, n_list, &refl);
    REQUIRE(rep.entries.size() == n_list.size());
    CHECK(rep.max_monotone_violation <= 1e-12);
    CHECK(rep.max_squeeze_violation <= 1e-9);
    // Y_0(0) = min(2T, k) = 0.5 for this instance
    CHECK(rep.limit_estimate[0] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(rep.limit_estimate[1] == doctest::Approx(0.0).epsilon(1e-6));
    if (std::isfinite(rep.decay_slope)) CHECK(rep.decay_slope <= -1.7);
}

TEST_CASE("one-step identity holds exactly on binomial lattices") {
    TwoMode tm;
    const auto lat = LatticeModel::build(1.0, 12, 1);
    const auto run = solve_penalized(lat, tm.s, tm.g, tm.terminal, 32.0);
    CHECK(penalized_step_identity_gap(run, lat, tm.g) <= 1e-10);
}

TEST_CASE("discrete minimal condition vanishes") {
    TwoMode tm;
    const auto lat = LatticeModel::build(1.0, 16, 1);
    const auto run = solve_penalized(lat, tm.s, tm.g, tm.terminal, 64.0);
    const auto cond = check_discrete_minimal_condition(run, tm.s, lat);
    for (double v : cond) CHECK(std::abs(v) <= 1e-9);
}

TEST_CASE("penalty flux converges to the reflected increments") {
    TwoMode tm;
    const auto lat = LatticeModel::build(1.0, 16, 1);
    const auto refl = solve_reflected_dp(lat, tm.s, tm.g, tm.terminal);
    const auto coarse = extract_limit_K(solve_penalized(lat, tm.s, tm.g, tm.terminal, 16.0),
                                        refl, lat);
    const auto fine = extract_limit_K(solve_penalized(lat, tm.s, tm.g, tm.terminal, 512.0),
                                      refl, lat);
    CHECK(fine.total_mass_gap < coarse.total_mass_gap);
    CHECK(fine.total_mass_gap <= 0.05);
    REQUIRE(fine.mass_penalized.size() == 2);
    CHECK(fine.mass_penalized[0] == doctest::Approx(fine.mass_reflected[0]).epsilon(0.05));
}

TEST_CASE("coupled step handles a y-dependent driver") {
    SwitchingStructure s(2, {0, 0.3, 0.3, 0});
    const auto g = decay_generator(-0.4);
    const auto terminal = TerminalCondition::constant({0.0, -0.3});  // on the face
    const auto lat = LatticeModel::build(1.0, 16, 1);
    const auto refl = solve_reflected_dp(lat, s, g, terminal);
    const auto run = solve_penalized(lat, s, g, terminal, 4096.0);
    for (std::size_t k = 0; k < refl.Y[0].size(); ++k) {
        CHECK(run.Y[0][k] >= refl.Y[0][k] - 1e-9);
        CHECK(std::abs(run.Y[0][k] - refl.Y[0][k]) <= 1e-3);
    }
}

TEST_CASE("schedule rejects non-ascending penalty lists") {
    TwoMode tm;
    const auto lat = LatticeModel::build(1.0, 4, 1);
    const std::vector<double> bad{16, 4};
    CHECK_THROWS_AS(run_schedule(lat, tm.s, tm.g, tm.terminal, bad, nullptr),
                    PreconditionError);
    const std::vector<double> single{4};
    CHECK_THROWS_AS(run_schedule(lat, tm.s, tm.g, tm.terminal, single, nullptr),
                    PreconditionError);
}
