#include "oswitch/penalization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace oswitch {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Residual of the coupled implicit step:
//   F_i(y) = y_i - e_i - psi(t, y_i, z_i, i) dt + n dt sum_l (y_i - y_l - k(i,l))^+
void step_residual(const SwitchingStructure& s, const Generator& g, double t,
                   std::span<const double> e, const std::vector<double>& z, int d,
                   std::span<const double> state, double dt, double n_penalty,
                   const std::vector<double>& y, std::vector<double>& F) {
    const int m = s.modes();
    for (int i = 0; i < m; ++i) {
        double pen = 0.0;
        for (int l = 0; l < m; ++l)
            if (l != i) pen += std::max(0.0, y[i] - y[l] - s.cost(i, l));
        const std::span<const double> zi{&z[static_cast<std::size_t>(i) * d],
                                         static_cast<std::size_t>(d)};
        F[i] = y[i] - e[i] - g.psi(t, y[i], zi, i, state) * dt + n_penalty * dt * pen;
    }
}

// Dense partial-pivot solve of J x = b for small m; J and b are overwritten.
void solve_small(std::vector<double>& J, std::vector<double>& b, int m) {
    for (int c = 0; c < m; ++c) {
        int piv = c;
        for (int r = c + 1; r < m; ++r)
            if (std::abs(J[r * m + c]) > std::abs(J[piv * m + c])) piv = r;
        if (piv != c) {
            for (int k = 0; k < m; ++k) std::swap(J[c * m + k], J[piv * m + k]);
            std::swap(b[c], b[piv]);
        }
        const double p = J[c * m + c];
        if (p == 0.0) throw InternalError("penalized step: singular Newton matrix");
        for (int r = c + 1; r < m; ++r) {
            const double f = J[r * m + c] / p;
            if (f == 0.0) continue;
            for (int k = c; k < m; ++k) J[r * m + k] -= f * J[c * m + k];
            b[r] -= f * b[c];
        }
    }
    for (int r = m - 1; r >= 0; --r) {
        double acc = b[r];
        for (int k = r + 1; k < m; ++k) acc -= J[r * m + k] * b[k];
        b[r] = acc / J[r * m + r];
    }
}

// Damped semismooth Newton for the coupled step. Returns false if it fails to
// reach the tolerance within the iteration cap.
bool newton_step(const SwitchingStructure& s, const Generator& g, double t,
                 std::span<const double> e, const std::vector<double>& z, int d,
                 std::span<const double> state, double dt, double n_penalty,
                 std::vector<double>& y) {
    const int m = s.modes();
    std::vector<double> F(m), Ftrial(m), J(m * m), step(m), ytrial(m);
    double scale = 1.0;
    for (int i = 0; i < m; ++i) scale = std::max(scale, std::abs(e[i]));
    const double tol = 1e-13 * scale;

    y.assign(e.begin(), e.end());
    step_residual(s, g, t, e, z, d, state, dt, n_penalty, y, F);
    double norm = 0.0;
    for (int i = 0; i < m; ++i) norm = std::max(norm, std::abs(F[i]));

    for (int it = 0; it < 100; ++it) {
        if (norm <= tol) return true;
        std::fill(J.begin(), J.end(), 0.0);
        for (int i = 0; i < m; ++i) {
            const std::span<const double> zi{&z[static_cast<std::size_t>(i) * d],
                                             static_cast<std::size_t>(d)};
            const double h = 1e-7 * std::max(1.0, std::abs(y[i]));
            const double dpsi = (g.psi(t, y[i] + h, zi, i, state) -
                                 g.psi(t, y[i] - h, zi, i, state)) / (2.0 * h);
            double diag = 1.0 - dpsi * dt;
            for (int l = 0; l < m; ++l) {
                if (l == i) continue;
                if (y[i] - y[l] - s.cost(i, l) > 0.0) {
                    diag += n_penalty * dt;
                    J[i * m + l] -= n_penalty * dt;
                }
            }
            J[i * m + i] = diag;
        }
        step = F;
        solve_small(J, step, m);

        double damping = 1.0;
        bool improved = false;
        for (int half = 0; half < 40; ++half) {
            for (int i = 0; i < m; ++i) ytrial[i] = y[i] - damping * step[i];
            step_residual(s, g, t, e, z, d, state, dt, n_penalty, ytrial, Ftrial);
            double trial_norm = 0.0;
            for (int i = 0; i < m; ++i) trial_norm = std::max(trial_norm, std::abs(Ftrial[i]));
            if (trial_norm < norm || trial_norm <= tol) {
                y = ytrial;
                F = Ftrial;
                norm = trial_norm;
                improved = true;
                break;
            }
            damping *= 0.5;
        }
        if (!improved) return false;
    }
    return norm <= tol;
}

// Coupled step with sub-stepping fallback: a backward Euler chain in the
// driver with the continuation value and z frozen over the step.
void coupled_step(const SwitchingStructure& s, const Generator& g, double t,
                  std::span<const double> e, const std::vector<double>& z, int d,
                  std::span<const double> state, double dt, double n_penalty,
                  std::vector<double>& y) {
    if (newton_step(s, g, t, e, z, d, state, dt, n_penalty, y)) return;
    std::vector<double> stage(e.begin(), e.end());
    for (int substeps = 2; substeps <= 64; substeps *= 2) {
        const double ddt = dt / substeps;
        stage.assign(e.begin(), e.end());
        bool ok = true;
        for (int u = substeps - 1; u >= 0 && ok; --u) {
            ok = newton_step(s, g, t + u * ddt, stage, z, d, state, ddt, n_penalty, y);
            if (ok) stage = y;
        }
        if (ok) {
            y = stage;
            return;
        }
    }
    throw PreconditionError(
        "penalized implicit step failed to converge at n = " + std::to_string(n_penalty) +
        " even with 64 substeps; refine the time grid");
}

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

PenalizedRun solve_penalized(const LatticeModel& lattice, const SwitchingStructure& s,
                             const Generator& g, const TerminalCondition& terminal,
                             double n_penalty) {
    if (!(n_penalty >= 0.0))
        throw PreconditionError("solve_penalized: penalty level must be nonnegative");
    if (g.lipschitz * lattice.dt() >= 1.0)
        throw PreconditionError("solve_penalized: implicit step not contractive, C*dt = " +
                                std::to_string(g.lipschitz * lattice.dt()));
    const int m = s.modes(), d = lattice.dimension(), N = lattice.steps();
    const double dt = lattice.dt();

    PenalizedRun run;
    run.n = n_penalty;
    run.modes = m;
    run.d = d;
    run.Y.resize(N + 1);
    run.Z.resize(N + 1);
    run.dK.resize(N + 1);
    run.violation_per_pair.assign(static_cast<std::size_t>(m) * m, 0.0);

    std::vector<double> e(m), y(m), znode;
    for (int n = N; n >= 0; --n) {
        const auto& level = lattice.levels()[n];
        run.Y[n].assign(level.size() * m, 0.0);
        run.Z[n].assign(level.size() * m * d, 0.0);
        run.dK[n].assign(level.size() * m, 0.0);
        const double t = lattice.time(n);
        for (std::size_t v = 0; v < level.size(); ++v) {
            const auto state = node_state(level[v]);
            if (n == N) {
                for (int i = 0; i < m; ++i)
                    run.Y[n][v * m + i] = terminal.value(state, i);
                continue;
            }
            znode.assign(static_cast<std::size_t>(m) * d, 0.0);
            for (int i = 0; i < m; ++i)
                conditional_moments(level[v], run.Y[n + 1], m, i, d, dt, e[i],
                                    &znode[static_cast<std::size_t>(i) * d]);
            coupled_step(s, g, t, e, znode, d, state, dt, n_penalty, y);
            for (int i = 0; i < m; ++i) {
                run.Y[n][v * m + i] = y[i];
                std::copy_n(&znode[static_cast<std::size_t>(i) * d], d,
                            &run.Z[n][(v * m + i) * d]);
                double pen = 0.0;
                for (int l = 0; l < m; ++l)
                    if (l != i) pen += std::max(0.0, y[i] - y[l] - s.cost(i, l));
                run.dK[n][v * m + i] = n_penalty * dt * pen;
                for (int l = 0; l < m; ++l) {
                    if (l == i) continue;
                    const double excess = std::max(0.0, y[i] - y[l] - s.cost(i, l));
                    run.violation_per_pair[i * m + l] +=
                        level[v].prob * dt * excess * excess;
                }
            }
        }
    }
    run.violation_total = 0.0;
    for (double vp : run.violation_per_pair) run.violation_total += vp;
    return run;
}

double penalized_step_identity_gap(const PenalizedRun& run, const LatticeModel& lattice,
                                   const Generator& g) {
    const int m = run.modes, d = run.d, N = lattice.steps();
    const double dt = lattice.dt();
    double worst = 0.0;
    for (int n = 0; n < N; ++n) {
        const auto& level = lattice.levels()[n];
        const double t = lattice.time(n);
        for (std::size_t v = 0; v < level.size(); ++v) {
            const auto state = node_state(level[v]);
            for (int i = 0; i < m; ++i) {
                const std::size_t yi = v * m + i;
                const double yv = run.Y[n][yi];
                const std::span<const double> z{&run.Z[n][yi * d],
                                                static_cast<std::size_t>(d)};
                const double drift = g.psi(t, yv, z, i, state) * dt - run.dK[n][yi];
                for (const auto& edge : level[v].edges) {
                    double zdw = 0.0;
                    for (int r = 0; r < d; ++r) zdw += z[r] * edge.dw[r];
                    const double resid =
                        run.Y[n + 1][static_cast<std::size_t>(edge.next) * m + i] + drift -
                        zdw - yv;
                    worst = std::max(worst, std::abs(resid));
                }
            }
        }
    }
    return worst;
}

ScheduleReport run_schedule(const LatticeModel& lattice, const SwitchingStructure& s,
                            const Generator& g, const TerminalCondition& terminal,
                            std::span<const double> n_list,
                            const ReflectedSolution* reflected_ref) {
    if (n_list.size() < 2)
        throw PreconditionError("run_schedule: need at least two penalty levels");
    for (std::size_t k = 1; k < n_list.size(); ++k)
        if (!(n_list[k] > n_list[k - 1]) || !(n_list[k - 1] > 0.0))
            throw PreconditionError("run_schedule: penalty levels must be positive ascending");

    const int m = s.modes();
    ScheduleReport report;
    report.max_monotone_violation = 0.0;
    report.max_squeeze_violation = reflected_ref ? 0.0 : kNaN;

    PenalizedRun prev, last;
    for (std::size_t k = 0; k < n_list.size(); ++k) {
        PenalizedRun run = solve_penalized(lattice, s, g, terminal, n_list[k]);
        ScheduleEntry entry;
        entry.n = n_list[k];
        entry.root.assign(run.Y[0].begin(), run.Y[0].begin() + m);
        entry.violation_total = run.violation_total;
        entry.monotone_gap = 0.0;
        entry.squeeze_violation = reflected_ref ? 0.0 : kNaN;
        entry.dist_to_reflected = reflected_ref ? 0.0 : kNaN;
        if (k > 0) {
            for (std::size_t lev = 0; lev < run.Y.size(); ++lev)
                for (std::size_t q = 0; q < run.Y[lev].size(); ++q)
                    entry.monotone_gap = std::max(entry.monotone_gap,
                                                  run.Y[lev][q] - prev.Y[lev][q]);
        }
        if (reflected_ref) {
            for (std::size_t lev = 0; lev < run.Y.size(); ++lev)
                for (std::size_t q = 0; q < run.Y[lev].size(); ++q) {
                    const double gap = reflected_ref->Y[lev][q] - run.Y[lev][q];
                    entry.squeeze_violation = std::max(entry.squeeze_violation, gap);
                    entry.dist_to_reflected =
                        std::max(entry.dist_to_reflected, std::abs(gap));
                }
            report.max_squeeze_violation =
                std::max(report.max_squeeze_violation, entry.squeeze_violation);
        }
        report.max_monotone_violation =
            std::max(report.max_monotone_violation, entry.monotone_gap);
        report.entries.push_back(std::move(entry));
        prev = std::move(run);
        if (k + 1 == n_list.size()) last = prev;
    }

    // Tail fit of log V(n) vs log n; small n is pre-asymptotic.
    std::vector<double> lx, ly;
    for (const auto& entry : report.entries)
        if (entry.violation_total > 0.0) {
            lx.push_back(std::log(entry.n));
            ly.push_back(std::log(entry.violation_total));
        }
    if (lx.size() > 3) {
        lx.erase(lx.begin(), lx.end() - 3);
        ly.erase(ly.begin(), ly.end() - 3);
    }
    if (lx.size() >= 2) {
        double mx = 0.0, my = 0.0;
        for (std::size_t k = 0; k < lx.size(); ++k) {
            mx += lx[k];
            my += ly[k];
        }
        mx /= lx.size();
        my /= ly.size();
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t k = 0; k < lx.size(); ++k) {
            sxy += (lx[k] - mx) * (ly[k] - my);
            sxx += (lx[k] - mx) * (lx[k] - mx);
        }
        report.decay_slope = sxy / sxx;
    } else {
        report.decay_slope = kNaN;
    }

    // Limit estimate: Y^n ~ Y + a/n fitted through the last two levels.
    const auto& e1 = report.entries[report.entries.size() - 2];
    const auto& e2 = report.entries.back();
    report.limit_estimate.resize(m);
    for (int i = 0; i < m; ++i) {
        const double a = (e1.root[i] - e2.root[i]) / (1.0 / e1.n - 1.0 / e2.n);
        report.limit_estimate[i] = e2.root[i] - a / e2.n;
    }
    return report;
}

LimitKReport extract_limit_K(const PenalizedRun& run, const ReflectedSolution& reflected,
                             const LatticeModel& lattice) {
    const int m = run.modes, N = lattice.steps();
    LimitKReport rep;
    rep.sup_increment_gap = 0.0;
    rep.mass_penalized.assign(m, 0.0);
    rep.mass_reflected.assign(m, 0.0);
    for (int n = 0; n <= N; ++n) {
        const auto& level = lattice.levels()[n];
        for (std::size_t v = 0; v < level.size(); ++v)
            for (int i = 0; i < m; ++i) {
                const std::size_t yi = v * m + i;
                rep.sup_increment_gap = std::max(
                    rep.sup_increment_gap, std::abs(run.dK[n][yi] - reflected.dK[n][yi]));
                rep.mass_penalized[i] += level[v].prob * run.dK[n][yi];
                rep.mass_reflected[i] += level[v].prob * reflected.dK[n][yi];
            }
    }
    rep.total_mass_gap = 0.0;
    for (int i = 0; i < m; ++i)
        rep.total_mass_gap = std::max(rep.total_mass_gap,
                                      std::abs(rep.mass_penalized[i] - rep.mass_reflected[i]));
    return rep;
}

std::vector<double> check_discrete_minimal_condition(const PenalizedRun& run,
                                                     const SwitchingStructure& s,
                                                     const LatticeModel& lattice) {
    const int m = run.modes, N = lattice.steps();
    std::vector<double> out(m, 0.0);
    if (m == 1) return out;
    for (int n = 0; n < N; ++n) {
        const auto& level = lattice.levels()[n];
        for (std::size_t v = 0; v < level.size(); ++v)
            for (int i = 0; i < m; ++i) {
                double bound = std::numeric_limits<double>::infinity();
                for (int j = 0; j < m; ++j)
                    if (j != i) bound = std::min(bound, run.Y[n][v * m + j] + s.cost(i, j));
                const double slack = run.Y[n][v * m + i] - bound;
                out[i] += level[v].prob * std::max(0.0, -slack) * run.dK[n][v * m + i];
            }
    }
    return out;
}

}  // namespace oswitch
