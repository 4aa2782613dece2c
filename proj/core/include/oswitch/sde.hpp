#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "oswitch/generator.hpp"
#include "oswitch/lattice.hpp"
#include "oswitch/strategy.hpp"

namespace oswitch {

/// Driverless scalar diffusion dX = sigma(t, X) dW, X(0) = x0. Controlled
/// drifts enter through a change of measure, never through the simulation.
struct DiffusionSpec {
    double x0 = 0.0;
    std::function<double(double t, double x)> sigma;
};

/// Simulated paths, stored flat. x(p, k) is the state at time k*dt, dw(p, k)
/// the Brownian increment over [k*dt, (k+1)*dt).
struct PathEnsemble {
    double T = 0.0;
    int steps = 0;
    std::size_t n_paths = 0;

    std::vector<double> X;   // n_paths * (steps + 1)
    std::vector<double> dW;  // n_paths * steps

    double dt() const { return T / steps; }
    double x(std::size_t p, int k) const { return X[p * (steps + 1) + k]; }
    double dw(std::size_t p, int k) const { return dW[p * steps + k]; }
};

/// Euler scheme for the driverless SDE. Each path gets its own generator
/// seeded from (seed, path index), so results are independent of path count
/// ordering and batching. Throws CapacityError above double_cap stored values.
PathEnsemble simulate_driverless(const DiffusionSpec& spec, double T, int steps,
                                 std::size_t n_paths, std::uint64_t seed,
                                 std::size_t double_cap = 50'000'000);

/// Lattice feedback strategy bound to continuous paths: at each time level the
/// decision of the nearest lattice node (in the state coordinate) applies.
class MarkovianFeedbackRule {
  public:
    static MarkovianFeedbackRule bind(const LatticeModel& lattice,
                                      const FeedbackStrategy& strat, int m);

    int initial_mode() const { return initial_mode_; }
    int modes() const { return m_; }
    /// Post-decision mode at this level given the entering mode; levels at or
    /// past the last decision level return entering_mode unchanged.
    int decide(int level, double x, int entering_mode) const;

  private:
    int m_ = 0;
    int initial_mode_ = 0;
    // per level, nodes sorted by state coordinate
    std::vector<std::vector<double>> coords_;
    std::vector<std::vector<int>> decisions_;  // [sorted node][entering mode]
};

/// Cost ingredients under the controlled measure: running cost l(t, x, mode),
/// the Girsanov drift b(t, x, mode), and the terminal payoff.
struct CostModel {
    std::function<double(double t, double x, int mode)> running;
    std::function<double(double t, double x, int mode)> drift;
    TerminalCondition terminal;
};

/// Discrete Girsanov weight exp(sum b dW - 1/2 sum b^2 dt) along one path with
/// the realized mode sequence (modes[k] applies on [t_k, t_{k+1})).
double girsanov_weight(const PathEnsemble& paths, std::size_t p,
                       const std::function<double(double, double, int)>& drift,
                       const std::vector<int>& modes);

struct CostEstimate {
    double mean = 0.0;       // weighted cost estimate
    double se = 0.0;         // standard error of the mean
    double mean_weight = 0.0;  // average Girsanov weight, should be near 1
    double weight_se = 0.0;    // standard error of the weight mean
    std::size_t n_paths = 0;
    double total_switch_cost = 0.0;  // unweighted average of paid switching costs
    double avg_switches = 0.0;
};

/// Monte Carlo cost of a bound strategy: weighted running cost plus switching
/// costs plus terminal payoff, with the measure change folded into the weight.
CostEstimate estimate_cost(const PathEnsemble& paths, const SwitchingStructure& s,
                           const MarkovianFeedbackRule& rule, const CostModel& cost);

struct LowerBoundCheck {
    double reference;  // lattice value at the root
    std::vector<CostEstimate> costs;
    double worst_margin;  // min over strategies of (mean + 3 se - reference)
    bool pass;            // worst_margin >= 0
};

/// Checks J(a) >= Y(0) within Monte Carlo noise for each supplied strategy.
LowerBoundCheck check_lower_bound(double reference, const PathEnsemble& paths,
                                  const SwitchingStructure& s,
                                  const std::vector<MarkovianFeedbackRule>& rules,
                                  const CostModel& cost);

}  // namespace oswitch
