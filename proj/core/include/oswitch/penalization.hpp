#pragma once

#include <span>
#include <vector>

#include "oswitch/bsde_lattice.hpp"

namespace oswitch {

/// Solution of the penalized (coupled, unreflected) system at one penalty
/// level. dK holds the penalty-flux increments n*dt*sum_l (y_i - y_l - k)^+.
struct PenalizedRun {
    double n = 0.0;
    int modes = 0, d = 0;
    std::vector<std::vector<double>> Y, Z, dK;
    std::vector<double> violation_per_pair;  // m*m, E int ((Y_i-Y_j-k)^+)^2 dt
    double violation_total = 0.0;
};

/// Solves the coupled system with generator psi_i - n * sum_l (y_i-y_l-k(i,l))^+.
/// The implicit step couples the modes through the penalty; it is solved per
/// node by a damped semismooth Newton iteration on the m-vector (the Jacobian
/// is an M-matrix for lipschitz*dt < 1). If the iteration stalls the step is
/// subdivided into a backward Euler chain before failing hard.
PenalizedRun solve_penalized(const LatticeModel& lattice, const SwitchingStructure& s,
                             const Generator& g, const TerminalCondition& terminal,
                             double n_penalty);

/// Max over all lattice edges of the one-step martingale identity residual
/// Y(next) - Y(v) + psi*dt - Z*dW - dK. Vanishes identically for binomial d=1.
double penalized_step_identity_gap(const PenalizedRun& run, const LatticeModel& lattice,
                                   const Generator& g);

struct ScheduleEntry {
    double n;
    std::vector<double> root;        // Y^n at the root, per mode
    double violation_total;          // V(n) summed over pairs
    double monotone_gap;             // max positive part of Y^n - Y^{previous n}
    double squeeze_violation;        // max positive part of Y_reflected - Y^n
    double dist_to_reflected;        // sup-norm distance to the reflected reference
};

struct ScheduleReport {
    std::vector<ScheduleEntry> entries;
    double decay_slope;                  // log V vs log n, fitted on the tail (last 3 points)
    std::vector<double> limit_estimate;  // 1/n extrapolation of the root values
    double max_monotone_violation;
    double max_squeeze_violation;
};

ScheduleReport run_schedule(const LatticeModel& lattice, const SwitchingStructure& s,
                            const Generator& g, const TerminalCondition& terminal,
                            std::span<const double> n_list,
                            const ReflectedSolution* reflected_ref);

struct LimitKReport {
    double sup_increment_gap;  // max over nodes |dK^n - dK_reflected|
    double total_mass_gap;     // max over modes |E K^n(T) - E K(T)|
    std::vector<double> mass_penalized, mass_reflected;  // E K_i(T) per mode
};

LimitKReport extract_limit_K(const PenalizedRun& run, const ReflectedSolution& reflected,
                             const LatticeModel& lattice);

/// Discrete form of the penalized minimal condition: per-mode weighted sum of
/// (Y_i^n - min_{j!=i}(Y_j^n + k(i,j)))^- * dK_i^n. Expected 0 within 1e-9.
std::vector<double> check_discrete_minimal_condition(const PenalizedRun& run,
                                                     const SwitchingStructure& s,
                                                     const LatticeModel& lattice);

}  // namespace oswitch
