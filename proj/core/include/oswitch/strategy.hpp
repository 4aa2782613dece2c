#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "oswitch/bsde_lattice.hpp"

namespace oswitch {

/// Adapted switching strategy in feedback form: at each (level, node, entering
/// mode) the table gives the mode after the (possible) switch at that instant.
/// Adaptedness is structural -- the decision depends only on the node.
struct FeedbackStrategy {
    int initial_mode = 0;
    // decision[level][node*m + entering_mode] in [0, m)
    std::vector<std::vector<int>> decision;

    static FeedbackStrategy stay(const LatticeModel& lattice, int m, int initial_mode);
};

/// Seeded random strategy: at every (node, mode) switch to a uniform other
/// mode with probability switch_prob, else stay.
FeedbackStrategy random_feedback_strategy(const LatticeModel& lattice, int m,
                                          int initial_mode, std::uint64_t seed,
                                          double switch_prob);

std::string strategy_to_json(const FeedbackStrategy& s);
FeedbackStrategy strategy_from_json(const std::string& text);

/// Value process of the switched BSDE for a feedback strategy. Returns
/// U[level][node*m + entering_mode]; the root value for the strategy is
/// U[0][initial_mode]. Switching costs are folded into the recursion exactly
/// as the change of variable U + A folds them into the terminal data.
std::vector<std::vector<double>> switched_bsde_value(const LatticeModel& lattice,
                                                     const SwitchingStructure& s,
                                                     const Generator& g,
                                                     const TerminalCondition& terminal,
                                                     const FeedbackStrategy& strat);

struct EnumerationResult {
    double value;  // infimum over enumerated strategies of U(0)
    FeedbackStrategy best;
    std::uint64_t policies_evaluated;
};

/// Brute-force infimum over all adapted feedback strategies with switch
/// decisions at grid times (levels 0..N-1; switching at T never helps when the
/// terminal data lies in the domain closure, and one switch per instant is
/// sufficient under the weak triangle inequality).
EnumerationResult enumerate_strategies(const LatticeModel& lattice,
                                       const SwitchingStructure& s, const Generator& g,
                                       const TerminalCondition& terminal, int start_mode,
                                       int max_switches = -1,
                                       std::uint64_t policy_cap = (1ull << 22));

/// Optimal strategy read off a reflected solution: switch at the first grid
/// time where the constraint for the current mode binds; argmin target,
/// smallest index on ties.
FeedbackStrategy extract_optimal_strategy(const ReflectedSolution& sol,
                                          const LatticeModel& lattice,
                                          const SwitchingStructure& s, int start_mode,
                                          double tol = 1e-9);

/// Per-mode fields spliced along a strategy, with the jump processes of the
/// verification argument.
struct SplicedSolution {
    // all tables indexed [level][node*m + entering_mode]
    std::vector<std::vector<double>> value;    // spliced Y
    std::vector<std::vector<double>> dK;       // reflected increments along the strategy
    std::vector<std::vector<double>> dAtilde;  // jump gaps Y_new + k - Y_old
    std::vector<std::vector<double>> dA;       // switching costs paid
    double min_dAtilde = 0.0;                  // should be >= -1e-9 (Y in Qbar)
    double max_identity_residual = 0.0;        // one-step switched-BSDE identity
    double expected_K_plus_Atilde = 0.0;       // forward-weighted total along the strategy
    double max_K_plus_Atilde = 0.0;            // max reachable increment
};

SplicedSolution spliced_solution(const ReflectedSolution& sol, const LatticeModel& lattice,
                                 const SwitchingStructure& s, const Generator& g,
                                 const FeedbackStrategy& strat);

struct StrategyCheck {
    double value;     // U(0) for this strategy
    bool dominated;   // value >= Y_i(0) - tol
};

struct OptimalityReport {
    double reference;         // Y_i(0)
    double optimal_value;     // U(0) for the extracted strategy
    double optimal_gap;       // |optimal_value - reference|
    double min_sample_value;  // min over supplied strategies
    std::vector<StrategyCheck> samples;
    bool pass;
};

OptimalityReport verify_optimality(const ReflectedSolution& sol, const LatticeModel& lattice,
                                   const SwitchingStructure& s, const Generator& g,
                                   const TerminalCondition& terminal, int start_mode,
                                   std::span<const FeedbackStrategy> samples,
                                   double tol = 1e-9);

struct SeparationAudit {
    int audited = 0;            // strictly ordered interior switch pairs checked
    int exempt_coincident = 0;  // consecutive switches on the same grid instant
    double min_gap;             // min |Y(theta_j) - Y(theta_{j-1})| over audited pairs
    double c;                   // separation constant
    bool pass;                  // all audited gaps >= c - tol
    std::vector<double> gaps;
};

/// Samples lattice paths and audits the jump-distance claim for consecutive
/// switch times of the given strategy.
SeparationAudit switch_separation_audit(const ReflectedSolution& sol,
                                        const LatticeModel& lattice,
                                        const SwitchingStructure& s,
                                        const FeedbackStrategy& strat, int n_paths,
                                        std::uint64_t seed, double tol = 1e-6);

struct SwitchEvent {
    int path_id;
    double time;
    int from_mode, to_mode;
    double cost;
};

/// Realizes the switch events of a feedback strategy along sampled paths
/// (for the event-log CSV).
std::vector<SwitchEvent> realize_switch_events(const LatticeModel& lattice,
                                               const SwitchingStructure& s,
                                               const FeedbackStrategy& strat, int n_paths,
                                               std::uint64_t seed);

}  // namespace oswitch
