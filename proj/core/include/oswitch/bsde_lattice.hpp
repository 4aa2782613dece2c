#pragma once

#include <span>
#include <vector>

#include "oswitch/core_model.hpp"
#include "oswitch/generator.hpp"
#include "oswitch/lattice.hpp"

namespace oswitch {

/// Backward-induction solution without reflection. Layout: Y[level][node*m + i],
/// Z[level][(node*m + i)*d + r].
struct PlainSolution {
    int modes = 0, d = 0;
    std::vector<std::vector<double>> Y;
    std::vector<std::vector<double>> Z;
};

/// Reflected solution; dK holds the per-level increments (dK at a level is the
/// mass removed by the projection applied at that level), Ytilde the
/// pre-reflection values.
struct ReflectedSolution {
    int modes = 0, d = 0;
    std::vector<std::vector<double>> Y;
    std::vector<std::vector<double>> Z;
    std::vector<std::vector<double>> dK;
    std::vector<std::vector<double>> Ytilde;
};

/// One implicit Euler step: solves y = e + psi(t, y, z, mode) * dt by fixed
/// point from y0 = e (contraction for lipschitz * dt < 1; residual 1e-13 or 50
/// iterations).
double implicit_step(const Generator& g, double t, double e, std::span<const double> z,
                     int mode, std::span<const double> state, double dt);

/// State span a node exposes to the generator/terminal: the attached state if
/// present, else the Brownian value.
std::span<const double> node_state(const LatticeNode& n);

PlainSolution solve_plain_bsde(const LatticeModel& lattice, int modes, const Generator& g,
                               const TerminalCondition& terminal);

ReflectedSolution solve_reflected_dp(const LatticeModel& lattice,
                                     const SwitchingStructure& s, const Generator& g,
                                     const TerminalCondition& terminal);

struct ReflectedDiagnostics {
    double max_constraint_violation;  // max over nodes of the Qbar membership excess
    double skorokhod_residual;        // sum over nodes of (Y_i - min_j(Y_j + k)) * dK_i
    double min_dK;                    // most negative reflection increment (>= 0 expected)
};

ReflectedDiagnostics diagnose_reflected(const ReflectedSolution& sol,
                                        const LatticeModel& lattice,
                                        const SwitchingStructure& s);

}  // namespace oswitch
