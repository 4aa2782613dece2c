#include "oswitch/bsde_lattice.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace oswitch {

std::span<const double> node_state(const LatticeNode& n) {
    return n.state.empty() ? std::span<const double>(n.w) : std::span<const double>(n.state);
}

double implicit_step(const Generator& g, double t, double e, std::span<const double> z,
                     int mode, std::span<const double> state, double dt) {
    double y = e;
    for (int it = 0; it < 50; ++it) {
        const double next = e + g.psi(t, y, z, mode, state) * dt;
        if (std::abs(next - y) <= 1e-13) return next;
        y = next;
    }
    return y;
}

namespace {

void check_step_size(const Generator& g, double dt) {
    if (g.lipschitz * dt >= 1.0)
        throw PreconditionError("implicit step not contractive: C*dt = " +
                                std::to_string(g.lipschitz * dt) + " >= 1; increase N");
}

// Continuation mean and Z row for one (node, mode) from next-level values.
void conditional_moments(const LatticeNode& node, const std::vector<double>& y_next,
                         int stride, int offset, int d, double dt, double& e,
                         double* z_out) {
    e = 0.0;
    for (int r = 0; r < d; ++r) z_out[r] = 0.0;
    for (const auto& edge : node.edges) {
        const double yv = y_next[static_cast<std::size_t>(edge.next) * stride + offset];
        e += edge.prob * yv;
        for (int r = 0; r < d; ++r) z_out[r] += edge.prob * yv * edge.dw[r];
    }
    for (int r = 0; r < d; ++r) z_out[r] /= dt;
}

}  // namespace

PlainSolution solve_plain_bsde(const LatticeModel& lattice, int modes, const Generator& g,
                               const TerminalCondition& terminal) {
    check_step_size(g, lattice.dt());
    const int m = modes, d = lattice.dimension(), N = lattice.steps();
    PlainSolution sol;
    sol.modes = m;
    sol.d = d;
    sol.Y.resize(N + 1);
    sol.Z.resize(N + 1);

    for (int n = N; n >= 0; --n) {
        const auto& level = lattice.levels()[n];
        sol.Y[n].assign(level.size() * m, 0.0);
        sol.Z[n].assign(level.size() * m * d, 0.0);
        const double t = lattice.time(n);
        for (std::size_t v = 0; v < level.size(); ++v) {
            for (int i = 0; i < m; ++i) {
                const std::size_t yi = v * m + i;
                if (n == N) {
                    sol.Y[n][yi] = terminal.value(node_state(level[v]), i);
                    continue;
                }
                double e;
                conditional_moments(level[v], sol.Y[n + 1], m, i, d, lattice.dt(), e,
                                    &sol.Z[n][yi * d]);
                sol.Y[n][yi] = implicit_step(g, t, e, {&sol.Z[n][yi * d], (std::size_t)d}, i,
                                             node_state(level[v]), lattice.dt());
            }
        }
    }
    return sol;
}

ReflectedSolution solve_reflected_dp(const LatticeModel& lattice,
                                     const SwitchingStructure& s, const Generator& g,
                                     const TerminalCondition& terminal) {
    check_step_size(g, lattice.dt());
    if (!s.weak_ok())
        throw PreconditionError("solve_reflected_dp: cost matrix fails the weak hypotheses");
    const int m = s.modes(), d = lattice.dimension(), N = lattice.steps();
    ReflectedSolution sol;
    sol.modes = m;
    sol.d = d;
    sol.Y.resize(N + 1);
    sol.Z.resize(N + 1);
    sol.dK.resize(N + 1);
    sol.Ytilde.resize(N + 1);

    std::vector<double> ytilde(m);
    for (int n = N; n >= 0; --n) {
        const auto& level = lattice.levels()[n];
        sol.Y[n].assign(level.size() * m, 0.0);
        sol.Z[n].assign(level.size() * m * d, 0.0);
        sol.dK[n].assign(level.size() * m, 0.0);
        sol.Ytilde[n].assign(level.size() * m, 0.0);
        const double t = lattice.time(n);
        for (std::size_t v = 0; v < level.size(); ++v) {
            if (n == N) {
                for (int i = 0; i < m; ++i)
                    ytilde[i] = terminal.value(node_state(level[v]), i);
                const auto member = in_Q_closure(ytilde, s, 1e-12);
                if (!member.inside)
                    throw PreconditionError(
                        "solve_reflected_dp: terminal values outside the domain closure "
                        "(violation " + std::to_string(member.worst_violation) + ")");
                for (int i = 0; i < m; ++i) {
                    sol.Y[n][v * m + i] = ytilde[i];
                    sol.Ytilde[n][v * m + i] = ytilde[i];
                }
                continue;
            }
            for (int i = 0; i < m; ++i) {
                const std::size_t yi = v * m + i;
                double e;
                conditional_moments(level[v], sol.Y[n + 1], m, i, d, lattice.dt(), e,
                                    &sol.Z[n][yi * d]);
                ytilde[i] = implicit_step(g, t, e, {&sol.Z[n][yi * d], (std::size_t)d}, i,
                                          node_state(level[v]), lattice.dt());
            }
            const auto projected = oblique_project(ytilde, s);
            for (int i = 0; i < m; ++i) {
                sol.Ytilde[n][v * m + i] = ytilde[i];
                sol.Y[n][v * m + i] = projected[i];
                sol.dK[n][v * m + i] = ytilde[i] - projected[i];
            }
        }
    }
    return sol;
}

ReflectedDiagnostics diagnose_reflected(const ReflectedSolution& sol,
                                        const LatticeModel& lattice,
                                        const SwitchingStructure& s) {
    const int m = sol.modes;
    ReflectedDiagnostics diag{-std::numeric_limits<double>::infinity(), 0.0, 0.0};
    for (int n = 0; n <= lattice.steps(); ++n) {
        const auto& level = lattice.levels()[n];
        for (std::size_t v = 0; v < level.size(); ++v) {
            for (int i = 0; i < m; ++i) {
                double bound = std::numeric_limits<double>::infinity();
                for (int j = 0; j < m; ++j)
                    if (j != i) bound = std::min(bound, sol.Y[n][v * m + j] + s.cost(i, j));
                const double yv = sol.Y[n][v * m + i];
                if (m > 1) diag.max_constraint_violation =
                    std::max(diag.max_constraint_violation, yv - bound);
                const double dk = sol.dK[n][v * m + i];
                diag.min_dK = std::min(diag.min_dK, dk);
                if (m > 1) diag.skorokhod_residual += (yv - bound) * dk;
            }
        }
    }
    if (m == 1) diag.max_constraint_violation = 0.0;
    return diag;
}

}  // namespace oswitch
