#include <cmath>
#include <vector>

#include <doctest.h>

#include "oswitch/sde.hpp"

using namespace oswitch;

namespace {

DiffusionSpec const_sigma(double x0, double sigma) {
    DiffusionSpec spec;
    spec.x0 = x0;
    spec.sigma = [sigma](double, double) { return sigma; };
    return spec;
}

}  // namespace

TEST_CASE("driverless paths have Brownian moments") {
    const double sigma = 0.5;
    const auto paths = simulate_driverless(const_sigma(1.0, sigma), 1.0, 32, 20000, 7);
    double mean = 0.0, var = 0.0;
    for (std::size_t p = 0; p < paths.n_paths; ++p) mean += paths.x(p, 32);
    mean /= static_cast<double>(paths.n_paths);
    for (std::size_t p = 0; p < paths.n_paths; ++p) {
        const double d = paths.x(p, 32) - mean;
        var += d * d;
    }
    var /= static_cast<double>(paths.n_paths - 1);
    const double se = sigma / std::sqrt(static_cast<double>(paths.n_paths));
    CHECK(std::abs(mean - 1.0) <= 4.0 * se);
    CHECK(var == doctest::Approx(sigma * sigma).epsilon(0.05));
}

TEST_CASE("constant sigma paths are exact integrals of the increments") {
    const auto paths = simulate_driverless(const_sigma(2.0, 0.7), 1.0, 16, 50, 11);
    for (std::size_t p = 0; p < paths.n_paths; ++p) {
        double w = 0.0;
        for (int k = 0; k < 16; ++k) {
            w += paths.dw(p, k);
            CHECK(paths.x(p, k + 1) == doctest::Approx(2.0 + 0.7 * w).epsilon(1e-12));
        }
    }
}

TEST_CASE("simulation is seed-deterministic and seed-sensitive") {
    const auto a = simulate_driverless(const_sigma(0.0, 1.0), 1.0, 8, 100, 99);
    const auto b = simulate_driverless(const_sigma(0.0, 1.0), 1.0, 8, 100, 99);
    const auto c = simulate_driverless(const_sigma(0.0, 1.0), 1.0, 8, 100, 100);
    CHECK(a.X == b.X);
    CHECK(a.dW == b.dW);
    CHECK(a.X != c.X);
}

TEST_CASE("path count extension preserves existing paths") {
    // per-path seeding: the first 50 paths of a 200-path run match a 50-path run
    const auto small = simulate_driverless(const_sigma(0.0, 1.0), 1.0, 8, 50, 99);
    const auto big = simulate_driverless(const_sigma(0.0, 1.0), 1.0, 8, 200, 99);
    for (std::size_t p = 0; p < 50; ++p)
        for (int k = 0; k <= 8; ++k) CHECK(small.x(p, k) == big.x(p, k));
}

TEST_CASE("capacity guard on the stored-value budget") {
    CHECK_THROWS_AS(simulate_driverless(const_sigma(0.0, 1.0), 1.0, 1000, 1000000, 1),
                    CapacityError);
}

TEST_CASE("girsanov weights average to one and tilt the mean") {
    const double b = 0.4, sigma = 1.0;
    const auto paths = simulate_driverless(const_sigma(0.0, sigma), 1.0, 16, 20000, 1234);
    const std::vector<int> modes(16, 0);
    const auto drift = [b](double, double, int) { return b; };
    double wsum = 0.0, wx = 0.0, w2 = 0.0;
    for (std::size_t p = 0; p < paths.n_paths; ++p) {
        const double w = girsanov_weight(paths, p, drift, modes);
        wsum += w;
        wx += w * paths.x(p, 16);
        w2 += w * w;
    }
    const double n = static_cast<double>(paths.n_paths);
    const double wmean = wsum / n;
    const double wse = std::sqrt((w2 / n - wmean * wmean) / n);
    CHECK(std::abs(wmean - 1.0) <= 4.0 * wse);
    // under the tilted measure X has drift sigma * b
    CHECK(wx / n == doctest::Approx(sigma * b).epsilon(0.15));
}

TEST_CASE("markovian rule reads the lattice decision nearest in state") {
    auto lat = LatticeModel::build(1.0, 2, 1);
    attach_state(lat, arithmetic_state(0.0, 0.0, 1.0));
    FeedbackStrategy strat = FeedbackStrategy::stay(lat, 2, 0);
    // level 1 nodes have w = -sqrt(dt), +sqrt(dt); switch on the upper node only
    const double root_dt = std::sqrt(0.5);
    for (std::size_t v = 0; v < lat.levels()[1].size(); ++v)
        if (lat.levels()[1][v].w[0] > 0.0) strat.decision[1][v * 2 + 0] = 1;
    const auto rule = MarkovianFeedbackRule::bind(lat, strat, 2);
    CHECK(rule.decide(1, root_dt + 0.2, 0) == 1);       // clamps above
    CHECK(rule.decide(1, root_dt - 0.01, 0) == 1);      // nearest is the upper node
    CHECK(rule.decide(1, -root_dt, 0) == 0);
    CHECK(rule.decide(1, -5.0, 0) == 0);                // clamps below
    CHECK(rule.decide(1, 0.0, 1) == 1);                 // entering mode passes through
    CHECK(rule.decide(5, 1.0, 1) == 1);                 // past the last level
}

TEST_CASE("cost estimate is exact for a deterministic cost model") {
    auto lat = LatticeModel::build(1.0, 4, 1);
    attach_state(lat, arithmetic_state(0.0, 0.0, 1.0));
    const auto rule =
        MarkovianFeedbackRule::bind(lat, FeedbackStrategy::stay(lat, 2, 0), 2);
    const auto paths = simulate_driverless(const_sigma(0.0, 1.0), 1.0, 4, 100, 5);
    SwitchingStructure s(2, {0, 0.5, 0.5, 0});
    CostModel cost;
    cost.running = [](double, double, int) { return 1.0; };
    cost.drift = [](double, double, int) { return 0.0; };
    cost.terminal = TerminalCondition::constant({0.25, 0.0});
    const auto est = estimate_cost(paths, s, rule, cost);
    CHECK(est.mean == doctest::Approx(1.25).epsilon(1e-12));
    CHECK(est.se == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(est.mean_weight == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(est.avg_switches == 0.0);
    CHECK(est.total_switch_cost == 0.0);
}

TEST_CASE("lower bound check flags a too-cheap reference violation") {
    auto lat = LatticeModel::build(1.0, 4, 1);
    attach_state(lat, arithmetic_state(0.0, 0.0, 1.0));
    const auto rule =
        MarkovianFeedbackRule::bind(lat, FeedbackStrategy::stay(lat, 2, 0), 2);
    const auto paths = simulate_driverless(const_sigma(0.0, 1.0), 1.0, 4, 200, 21);
    SwitchingStructure s(2, {0, 0.5, 0.5, 0});
    CostModel cost;
    cost.running = [](double, double, int) { return 1.0; };
    cost.drift = [](double, double, int) { return 0.0; };
    cost.terminal = TerminalCondition::constant({0.0, 0.0});
    const auto ok = check_lower_bound(0.9, paths, s, {rule}, cost);
    CHECK(ok.pass);
    CHECK(ok.worst_margin >= 0.0);
    const auto bad = check_lower_bound(1.5, paths, s, {rule}, cost);
    CHECK_FALSE(bad.pass);
}
