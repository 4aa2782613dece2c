#pragma once

#include <functional>
#include <span>
#include <vector>

#include "oswitch/bsde_lattice.hpp"

namespace oswitch {

/// Coefficients of the Markovian problem in one space dimension: operator
/// drift/diffusion, terminal payoff, and the driver (state span = {x}).
struct MarkovianCoefficients {
    std::function<double(double t, double x)> b;
    std::function<double(double t, double x)> sigma;
    Generator psi;
    TerminalCondition terminal;
};

struct PdeGridSpec {
    double x_min = -1.0, x_max = 1.0;
    int space_nodes = 101;  // M
    int time_steps = 100;   // N_t
    double T = 1.0;
};

/// Space-time grid with the full m-vector solution at every time level.
/// Layout: u[level][j*m + i], level time_steps holds the terminal data.
struct PdeGrid {
    PdeGridSpec spec;
    int modes = 0;
    double h = 0.0, dt = 0.0;
    std::vector<std::vector<double>> u;

    double x(int j) const { return spec.x_min + j * h; }
    double time(int level) const { return level * dt; }
    /// Bilinear interpolation; clamps to the grid box.
    double value(double t, double x, int mode) const;
};

/// Backward implicit Euler per mode (upwinded first-order term when
/// |b| h / sigma^2 > 2, linear-extrapolation boundary closure, lagged driver
/// iteration to 1e-12), then node-wise oblique projection across modes.
PdeGrid solve_vi_projection(const MarkovianCoefficients& c, const SwitchingStructure& s,
                            const PdeGridSpec& spec);

/// Same stepping with the penalty source n * sum_l (u_i - u_l - k(i,l))^+
/// handled by an active-set linearization inside the sweep; no projection.
PdeGrid solve_penalized_pde(const MarkovianCoefficients& c, const SwitchingStructure& s,
                            const PdeGridSpec& spec, double n_penalty);

struct ComplementarityReport {
    double max_violation;       // max over nodes of min(step residual, constraint slack)
    double max_pde_residual_on_inactive;  // residual where the constraint is slack
};

/// Discrete complementarity of the projected solution: at every node either
/// the implicit-step residual vanishes or the constraint binds.
ComplementarityReport check_complementarity(const PdeGrid& grid,
                                            const MarkovianCoefficients& c,
                                            const SwitchingStructure& s, double tol);

struct FkPoint {
    double t, x;
};

struct FkEntry {
    double t, x;
    int mode;
    double u_pde, y_chain, gap;
};

struct FkReport {
    std::vector<FkEntry> entries;
    double max_gap = 0.0;
    int chain_steps = 0;  // time steps of the approximating Markov chain
};

/// Probabilistic cross-check: approximates the diffusion by a locally
/// consistent birth-death chain on the same spatial grid, solves the reflected
/// system on that chain, and compares at the sample points. Points must lie in
/// the inner 60% of the domain (boundary closure pollutes the edges).
FkReport feynman_kac_check(const MarkovianCoefficients& c, const SwitchingStructure& s,
                           const PdeGrid& grid, std::span<const FkPoint> points);

}  // namespace oswitch
