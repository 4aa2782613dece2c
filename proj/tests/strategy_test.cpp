#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "oswitch/strategy.hpp"

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

Generator linear_generator(std::vector<double> a, std::vector<double> bz,
                           std::vector<double> c) {
    Generator g;
    g.psi = [a, bz, c](double, double y, std::span<const double> z, int mode,
                       std::span<const double>) {
        return a[mode] * y + (z.empty() ? 0.0 : bz[mode] * z[0]) + c[mode];
    };
    double lip = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        lip = std::max(lip, std::abs(a[i]) + std::abs(bz[i]));
    g.lipschitz = lip;
    return g;
}

struct Setup {
    SwitchingStructure s{2, {0, 0.5, 0.5, 0}};
    Generator g = constant_generator({2.0, 0.0});
    TerminalCondition terminal = TerminalCondition::constant({0.0, 0.0});
    LatticeModel lattice = LatticeModel::build(1.0, 8, 1);
    ReflectedSolution sol = solve_reflected_dp(lattice, s, g, terminal);
};

}  // namespace

TEST_CASE("stay strategy reproduces the unswitched solve") {
    Setup su;
    const auto stay = FeedbackStrategy::stay(su.lattice, 2, 0);
    const auto U = switched_bsde_value(su.lattice, su.s, su.g, su.terminal, stay);
    const auto plain = solve_plain_bsde(su.lattice, 2, su.g, su.terminal);
    for (int n = 0; n <= 8; ++n)
        for (std::size_t k = 0; k < plain.Y[n].size(); ++k)
            CHECK(U[n][k] == doctest::Approx(plain.Y[n][k]).epsilon(1e-13));
}

TEST_CASE("immediate switch pays the cost and follows the other mode") {
    Setup su;
    auto strat = FeedbackStrategy::stay(su.lattice, 2, 0);
    strat.decision[0][0] = 1;  // root, entering mode 0 -> switch to 1
    const auto U = switched_bsde_value(su.lattice, su.s, su.g, su.terminal, strat);
    CHECK(U[0][0] == doctest::Approx(0.5).epsilon(1e-13));
}

TEST_CASE("strategy json round trip") {
    Setup su;
    const auto strat = random_feedback_strategy(su.lattice, 2, 1, 99, 0.3);
    const auto back = strategy_from_json(strategy_to_json(strat));
    CHECK(back.initial_mode == strat.initial_mode);
    REQUIRE(back.decision.size() == strat.decision.size());
    for (std::size_t n = 0; n < strat.decision.size(); ++n)
        CHECK(back.decision[n] == strat.decision[n]);
}

TEST_CASE("enumeration equals reflected DP on small random problems") {
    std::mt19937_64 rng(5150);
    std::uniform_real_distribution<double> uk(0.1, 0.6), uc(-0.5, 0.5), ux(-1.0, 1.0);
    for (int t = 0; t < 4; ++t) {
        SwitchingStructure s(2, {0.0, uk(rng), uk(rng), 0.0});
        const auto g = linear_generator({uc(rng), uc(rng)}, {uc(rng), uc(rng)},
                                        {uc(rng), uc(rng)});
        std::vector<double> raw{ux(rng), ux(rng)};
        const auto terminal = TerminalCondition::constant(oblique_project(raw, s));
        const auto lat = LatticeModel::build(1.0, 2 + t % 2, 1);
        const auto sol = solve_reflected_dp(lat, s, g, terminal);
        const auto en = enumerate_strategies(lat, s, g, terminal, 0);
        CHECK(en.value == doctest::Approx(sol.Y[0][0]).epsilon(1e-12));
    }
}

TEST_CASE("enumeration respects the policy cap") {
    Setup su;
    CHECK_THROWS_AS(enumerate_strategies(su.lattice, su.s, su.g, su.terminal, 0, -1, 16),
                    CapacityError);
}

TEST_CASE("extracted strategy attains the reflected value") {
    Setup su;
    for (int start = 0; start < 2; ++start) {
        const auto strat = extract_optimal_strategy(su.sol, su.lattice, su.s, start);
        const auto U = switched_bsde_value(su.lattice, su.s, su.g, su.terminal, strat);
        CHECK(std::abs(U[0][start] - su.sol.Y[0][start]) <= 1e-10);
    }
}

TEST_CASE("spliced solution satisfies the verification identities") {
    Setup su;
    const auto strat = extract_optimal_strategy(su.sol, su.lattice, su.s, 0);
    const auto spl = spliced_solution(su.sol, su.lattice, su.s, su.g, strat);
    CHECK(spl.max_identity_residual <= 1e-10);
    CHECK(spl.min_dAtilde >= -1e-10);
    CHECK(spl.max_K_plus_Atilde <= 1e-10);   // flat at the optimum
    CHECK(spl.expected_K_plus_Atilde <= 1e-10);
}

TEST_CASE("random strategies are dominated by the reflected value") {
    Setup su;
    std::vector<FeedbackStrategy> samples;
    for (int r = 0; r < 10; ++r)
        samples.push_back(random_feedback_strategy(su.lattice, 2, 0, 300 + r, 0.25));
    const auto rep =
        verify_optimality(su.sol, su.lattice, su.s, su.g, su.terminal, 0, samples, 1e-9);
    CHECK(rep.pass);
    CHECK(rep.optimal_gap <= 1e-9);
    for (const auto& sc : rep.samples) CHECK(sc.dominated);
}

TEST_CASE("switch separation audit on a strict three-mode instance") {
    SwitchingStructure s(3, {0, 0.3, 0.35, 0.32, 0, 0.3, 0.3, 0.34, 0});
    const auto g = linear_generator({-0.2, 0.1, 0.0}, {0.1, -0.1, 0.05}, {1.0, -0.5, 0.2});
    const auto terminal = TerminalCondition::constant({0.1, 0.0, -0.05});
    const auto lat = LatticeModel::build(1.0, 16, 1);
    const auto sol = solve_reflected_dp(lat, s, g, terminal);
    const auto strat = extract_optimal_strategy(sol, lat, s, 0);
    const auto audit = switch_separation_audit(sol, lat, s, strat, 200, 17);
    CHECK(audit.pass);
    CHECK(audit.c > 0.0);
}

TEST_CASE("separation audit requires the strict hypothesis") {
    SwitchingStructure s(2, {0, 0, 0, 0});
    const auto g = constant_generator({1.0, 0.0});
    const auto terminal = TerminalCondition::constant({0.0, 0.0});
    const auto lat = LatticeModel::build(1.0, 4, 1);
    const auto sol = solve_reflected_dp(lat, s, g, terminal);
    const auto strat = FeedbackStrategy::stay(lat, 2, 0);
    CHECK_THROWS_AS(switch_separation_audit(sol, lat, s, strat, 10, 1), PreconditionError);
}

TEST_CASE("switch events realize the deterministic policy") {
    Setup su;
    const auto strat = extract_optimal_strategy(su.sol, su.lattice, su.s, 0);
    const auto events = realize_switch_events(su.lattice, su.s, strat, 3, 11);
    REQUIRE(events.size() == 3);  // one immediate switch per path
    for (const auto& e : events) {
        CHECK(e.time == 0.0);
        CHECK(e.from_mode == 0);
        CHECK(e.to_mode == 1);
        CHECK(e.cost == doctest::Approx(0.5));
    }
}
