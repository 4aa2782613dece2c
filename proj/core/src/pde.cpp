#include "oswitch/pde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace oswitch {

namespace {

// Rows of L u = lo * u_{j-1} + di * u_j + up * u_{j+1} at one time level.
// Upwinded first-order term past the monotonicity threshold; boundary rows use
// the linear-extrapolation closure (no second-derivative contribution).
void operator_rows(const MarkovianCoefficients& c, double t, double x_min, double h, int M,
                   std::vector<double>& lo, std::vector<double>& di,
                   std::vector<double>& up) {
    lo.assign(M, 0.0);
    di.assign(M, 0.0);
    up.assign(M, 0.0);
    for (int j = 0; j < M; ++j) {
        const double x = x_min + j * h;
        const double bj = c.b(t, x), sig = c.sigma(t, x);
        const double s2 = 0.5 * sig * sig;
        if (j == 0) {
            di[j] = -bj / h;
            up[j] = bj / h;
            continue;
        }
        if (j == M - 1) {
            lo[j] = -bj / h;
            di[j] = bj / h;
            continue;
        }
        lo[j] = s2 / (h * h);
        di[j] = -2.0 * s2 / (h * h);
        up[j] = s2 / (h * h);
        const bool upwind = sig * sig <= 0.0 || std::abs(bj) * h / (sig * sig) > 2.0;
        if (!upwind) {
            lo[j] -= bj / (2.0 * h);
            up[j] += bj / (2.0 * h);
        } else if (bj >= 0.0) {
            di[j] -= bj / h;
            up[j] += bj / h;
        } else {
            lo[j] -= bj / h;
            di[j] += bj / h;
        }
    }
}

// Thomas solve of (I - dt L + diag(extra)) u = rhs; all inputs per row.
void tridiag_solve(const std::vector<double>& lo, const std::vector<double>& di,
                   const std::vector<double>& up, const std::vector<double>& extra,
                   double dt, std::vector<double>& rhs, std::vector<double>& cp,
                   std::vector<double>& out) {
    const int M = static_cast<int>(rhs.size());
    cp.assign(M, 0.0);
    out.assign(M, 0.0);
    double diag = 1.0 - dt * di[0] + extra[0];
    cp[0] = -dt * up[0] / diag;
    out[0] = rhs[0] / diag;
    for (int j = 1; j < M; ++j) {
        const double a = -dt * lo[j];
        diag = 1.0 - dt * di[j] + extra[j] - a * cp[j - 1];
        cp[j] = -dt * up[j] / diag;
        out[j] = (rhs[j] - a * out[j - 1]) / diag;
    }
    for (int j = M - 2; j >= 0; --j) out[j] -= cp[j] * out[j + 1];
}

// One backward time level: lagged-driver implicit solves per mode, the penalty
// handled by active-set linearization inside the sweep. Returns the
// pre-projection values; the caller projects if required.
void step_level(const MarkovianCoefficients& c, const SwitchingStructure& s, double t,
                double x_min, double h, int M, double dt, double n_penalty,
                const std::vector<double>& u_next, std::vector<double>& u_out) {
    const int m = s.modes();
    std::vector<double> lo, di, up;
    operator_rows(c, t, x_min, h, M, lo, di, up);

    std::vector<double> v = u_next;
    std::vector<double> rhs(M), extra(M), cp(M), col(M), z(M);

    for (int sweep = 0; sweep < 500; ++sweep) {
        double change = 0.0, scale = 1.0;
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < M; ++j) {
                const double sig = c.sigma(t, x_min + j * h);
                double dx;
                if (j == 0)
                    dx = (v[static_cast<std::size_t>(1) * m + i] - v[i]) / h;
                else if (j == M - 1)
                    dx = (v[static_cast<std::size_t>(j) * m + i] -
                          v[static_cast<std::size_t>(j - 1) * m + i]) / h;
                else
                    dx = (v[static_cast<std::size_t>(j + 1) * m + i] -
                          v[static_cast<std::size_t>(j - 1) * m + i]) / (2.0 * h);
                z[j] = sig * dx;
            }
            for (int j = 0; j < M; ++j) {
                const double x = x_min + j * h;
                const double yi = v[static_cast<std::size_t>(j) * m + i];
                rhs[j] = u_next[static_cast<std::size_t>(j) * m + i] +
                         dt * c.psi.psi(t, yi, {&z[static_cast<std::size_t>(j)], 1}, i,
                                        {&x, 1});
                extra[j] = 0.0;
                if (n_penalty > 0.0) {
                    for (int l = 0; l < m; ++l) {
                        if (l == i) continue;
                        const double ul = v[static_cast<std::size_t>(j) * m + l];
                        if (yi - ul - s.cost(i, l) > 0.0) {
                            extra[j] += n_penalty * dt;
                            rhs[j] += n_penalty * dt * (ul + s.cost(i, l));
                        }
                    }
                }
            }
            tridiag_solve(lo, di, up, extra, dt, rhs, cp, col);
            for (int j = 0; j < M; ++j) {
                auto& slot = v[static_cast<std::size_t>(j) * m + i];
                change = std::max(change, std::abs(col[j] - slot));
                scale = std::max(scale, std::abs(col[j]));
                slot = col[j];
            }
        }
        if (change <= 1e-12 * scale) {
            u_out = std::move(v);
            return;
        }
    }
    throw PreconditionError(
        "pde step failed to converge at t = " + std::to_string(t) +
        "; the grid is too coarse for the driver (or the penalty level)");
}

void validate_spec(const MarkovianCoefficients& c, const PdeGridSpec& spec) {
    if (spec.space_nodes < 3 || spec.time_steps < 1 || !(spec.T > 0.0) ||
        !(spec.x_max > spec.x_min))
        throw StructuralError("pde grid spec: need M >= 3, N_t >= 1, T > 0, x_max > x_min");
    const double dt = spec.T / spec.time_steps;
    if (c.psi.lipschitz * dt >= 1.0)
        throw PreconditionError("pde solve: implicit step not contractive, C*dt = " +
                                std::to_string(c.psi.lipschitz * dt));
}

PdeGrid solve_backward(const MarkovianCoefficients& c, const SwitchingStructure& s,
                       const PdeGridSpec& spec, double n_penalty, bool project) {
    validate_spec(c, spec);
    const int M = spec.space_nodes, Nt = spec.time_steps, m = s.modes();
    PdeGrid grid;
    grid.spec = spec;
    grid.modes = m;
    grid.h = (spec.x_max - spec.x_min) / (M - 1);
    grid.dt = spec.T / Nt;
    grid.u.assign(Nt + 1, std::vector<double>(static_cast<std::size_t>(M) * m, 0.0));

    for (int j = 0; j < M; ++j) {
        const double x = spec.x_min + j * grid.h;
        for (int i = 0; i < m; ++i)
            grid.u[Nt][static_cast<std::size_t>(j) * m + i] = c.terminal.value({&x, 1}, i);
    }

    std::vector<double> node(m);
    for (int n = Nt - 1; n >= 0; --n) {
        step_level(c, s, grid.time(n), spec.x_min, grid.h, M, grid.dt, n_penalty,
                   grid.u[n + 1], grid.u[n]);
        if (project) {
            for (int j = 0; j < M; ++j) {
                for (int i = 0; i < m; ++i)
                    node[i] = grid.u[n][static_cast<std::size_t>(j) * m + i];
                const auto proj = oblique_project(node, s);
                for (int i = 0; i < m; ++i)
                    grid.u[n][static_cast<std::size_t>(j) * m + i] = proj[i];
            }
        }
    }
    return grid;
}

}  // namespace

double PdeGrid::value(double t, double x, int mode) const {
    const int M = spec.space_nodes, Nt = spec.time_steps;
    t = std::clamp(t, 0.0, spec.T);
    x = std::clamp(x, spec.x_min, spec.x_max);
    const double ft = t / dt, fx = (x - spec.x_min) / h;
    const int n0 = std::min(static_cast<int>(ft), Nt - 1);
    const int j0 = std::min(static_cast<int>(fx), M - 2);
    const double wt = ft - n0, wx = fx - j0;
    auto at = [&](int n, int j) {
        return u[n][static_cast<std::size_t>(j) * modes + mode];
    };
    const double lo = at(n0, j0) * (1 - wx) + at(n0, j0 + 1) * wx;
    const double hi = at(n0 + 1, j0) * (1 - wx) + at(n0 + 1, j0 + 1) * wx;
    return lo * (1 - wt) + hi * wt;
}

PdeGrid solve_vi_projection(const MarkovianCoefficients& c, const SwitchingStructure& s,
                            const PdeGridSpec& spec) {
    return solve_backward(c, s, spec, 0.0, true);
}

PdeGrid solve_penalized_pde(const MarkovianCoefficients& c, const SwitchingStructure& s,
                            const PdeGridSpec& spec, double n_penalty) {
    if (!(n_penalty >= 0.0))
        throw PreconditionError("solve_penalized_pde: penalty level must be nonnegative");
    return solve_backward(c, s, spec, n_penalty, false);
}

ComplementarityReport check_complementarity(const PdeGrid& grid,
                                            const MarkovianCoefficients& c,
                                            const SwitchingStructure& s, double tol) {
    const int M = grid.spec.space_nodes, Nt = grid.spec.time_steps, m = grid.modes;
    ComplementarityReport rep{0.0, 0.0};
    std::vector<double> utilde;
    for (int n = 0; n < Nt; ++n) {
        step_level(c, s, grid.time(n), grid.spec.x_min, grid.h, M, grid.dt, 0.0,
                   grid.u[n + 1], utilde);
        for (int j = 0; j < M; ++j) {
            for (int i = 0; i < m; ++i) {
                const std::size_t idx = static_cast<std::size_t>(j) * m + i;
                const double resid = utilde[idx] - grid.u[n][idx];
                double slack = std::numeric_limits<double>::infinity();
                for (int l = 0; l < m; ++l)
                    if (l != i)
                        slack = std::min(slack, grid.u[n][static_cast<std::size_t>(j) * m + l] +
                                                    s.cost(i, l) - grid.u[n][idx]);
                if (m == 1) slack = std::numeric_limits<double>::infinity();
                rep.max_violation =
                    std::max(rep.max_violation, std::min(std::max(resid, 0.0), slack));
                if (slack > tol)
                    rep.max_pde_residual_on_inactive =
                        std::max(rep.max_pde_residual_on_inactive, std::abs(resid));
            }
        }
    }
    return rep;
}

FkReport feynman_kac_check(const MarkovianCoefficients& c, const SwitchingStructure& s,
                           const PdeGrid& grid, std::span<const FkPoint> points) {
    const int M = grid.spec.space_nodes, m = s.modes();
    const double h = grid.h, x_min = grid.spec.x_min, T = grid.spec.T;

    const double center = 0.5 * (grid.spec.x_min + grid.spec.x_max);
    const double margin = 0.3 * (grid.spec.x_max - grid.spec.x_min);
    for (const auto& pt : points)
        if (std::abs(pt.x - center) > margin || pt.t < 0.0 || pt.t > T)
            throw PreconditionError(
                "feynman_kac_check: sample point outside the inner 60% of the domain");

    // Stability-limited chain step: dt <= h^2 / (sigma^2 + |b| h) everywhere.
    double dt_max = std::numeric_limits<double>::infinity();
    for (double t : {0.0, 0.5 * T, T})
        for (int j = 0; j < M; ++j) {
            const double x = x_min + j * h;
            const double denom = c.sigma(t, x) * c.sigma(t, x) + std::abs(c.b(t, x)) * h;
            if (denom > 0.0) dt_max = std::min(dt_max, h * h / denom);
        }
    int Nc = grid.spec.time_steps;
    if (std::isfinite(dt_max)) Nc = std::max(Nc, static_cast<int>(std::ceil(T / (0.9 * dt_max))));
    const std::size_t total = static_cast<std::size_t>(Nc + 1) * M;
    if (total > LatticeModel::kDefaultNodeCap)
        throw CapacityError("feynman_kac_check: chain needs " + std::to_string(total) +
                            " nodes; refine less or shrink the grid");

    LatticeModel chain;
    chain.T_ = T;
    chain.steps_ = Nc;
    chain.dt_ = T / Nc;
    chain.d_ = 1;
    chain.levels_.resize(Nc + 1);
    const double dtc = chain.dt_;
    for (int n = 0; n <= Nc; ++n) {
        auto& level = chain.levels_[n];
        level.resize(M);
        const double t = n * dtc;
        for (int j = 0; j < M; ++j) {
            const double x = x_min + j * h;
            auto& node = level[j];
            node.w = {x};
            node.state = {x};
            node.prob = 1.0 / M;
            if (n == Nc) continue;
            const double bj = c.b(t, x), sig = c.sigma(t, x);
            const double s2 = 0.5 * sig * sig;
            double p_up = (s2 * dtc + std::max(bj, 0.0) * h * dtc) / (h * h);
            double p_dn = (s2 * dtc + std::max(-bj, 0.0) * h * dtc) / (h * h);
            double p_st = 1.0 - p_up - p_dn;
            if (p_st < -1e-12)
                throw InternalError("feynman_kac_check: chain step not stable");
            p_st = std::max(p_st, 0.0);
            const int j_up = std::min(j + 1, M - 1), j_dn = std::max(j - 1, 0);
            auto dw_to = [&](int jt) {
                const double dx = (x_min + jt * h) - x;
                return sig > 1e-14 ? (dx - bj * dtc) / sig : 0.0;
            };
            if (p_up > 0.0) node.edges.push_back({j_up, p_up, {dw_to(j_up)}});
            if (p_dn > 0.0) node.edges.push_back({j_dn, p_dn, {dw_to(j_dn)}});
            if (p_st > 0.0) node.edges.push_back({j, p_st, {dw_to(j)}});
        }
    }

    const auto sol = solve_reflected_dp(chain, s, c.psi, c.terminal);

    auto chain_value = [&](double t, double x, int mode) {
        const double ft = std::clamp(t, 0.0, T) / dtc;
        const double fx = (std::clamp(x, x_min, grid.spec.x_max) - x_min) / h;
        const int n0 = std::min(static_cast<int>(ft), Nc - 1);
        const int j0 = std::min(static_cast<int>(fx), M - 2);
        const double wt = ft - n0, wx = fx - j0;
        auto at = [&](int n, int j) {
            return sol.Y[n][static_cast<std::size_t>(j) * m + mode];
        };
        const double lo = at(n0, j0) * (1 - wx) + at(n0, j0 + 1) * wx;
        const double hi = at(n0 + 1, j0) * (1 - wx) + at(n0 + 1, j0 + 1) * wx;
        return lo * (1 - wt) + hi * wt;
    };

    FkReport rep;
    rep.chain_steps = Nc;
    for (const auto& pt : points)
        for (int i = 0; i < m; ++i) {
            FkEntry entry;
            entry.t = pt.t;
            entry.x = pt.x;
            entry.mode = i;
            entry.u_pde = grid.value(pt.t, pt.x, i);
            entry.y_chain = chain_value(pt.t, pt.x, i);
            entry.gap = std::abs(entry.u_pde - entry.y_chain);
            rep.max_gap = std::max(rep.max_gap, entry.gap);
            rep.entries.push_back(entry);
        }
    return rep;
}

}  // namespace oswitch
