#include "oswitch/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <json.hpp>

namespace oswitch {

FeedbackStrategy FeedbackStrategy::stay(const LatticeModel& lattice, int m,
                                        int initial_mode) {
    FeedbackStrategy s;
    s.initial_mode = initial_mode;
    s.decision.resize(lattice.steps() + 1);
    for (int n = 0; n <= lattice.steps(); ++n) {
        s.decision[n].resize(lattice.levels()[n].size() * m);
        for (std::size_t v = 0; v < lattice.levels()[n].size(); ++v)
            for (int a = 0; a < m; ++a) s.decision[n][v * m + a] = a;
    }
    return s;
}

FeedbackStrategy random_feedback_strategy(const LatticeModel& lattice, int m,
                                          int initial_mode, std::uint64_t seed,
                                          double switch_prob) {
    auto s = FeedbackStrategy::stay(lattice, m, initial_mode);
    if (m < 2) return s;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int n = 0; n < lattice.steps(); ++n)  // no terminal switches
        for (std::size_t slot = 0; slot < s.decision[n].size(); ++slot)
            if (u(rng) < switch_prob) {
                const int a = static_cast<int>(slot % m);
                int target = static_cast<int>(rng() % static_cast<std::uint64_t>(m - 1));
                if (target >= a) ++target;
                s.decision[n][slot] = target;
            }
    return s;
}

std::string strategy_to_json(const FeedbackStrategy& s) {
    nlohmann::json j;
    j["initial_mode"] = s.initial_mode;
    j["decision"] = s.decision;
    return j.dump();
}

FeedbackStrategy strategy_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    FeedbackStrategy s;
    s.initial_mode = j.at("initial_mode").get<int>();
    s.decision = j.at("decision").get<std::vector<std::vector<int>>>();
    return s;
}

std::vector<std::vector<double>> switched_bsde_value(const LatticeModel& lattice,
                                                     const SwitchingStructure& s,
                                                     const Generator& g,
                                                     const TerminalCondition& terminal,
                                                     const FeedbackStrategy& strat) {
    const int m = s.modes(), d = lattice.dimension(), N = lattice.steps();
    if (static_cast<int>(strat.decision.size()) != N + 1)
        throw StructuralError("switched_bsde_value: strategy/lattice level mismatch");
    std::vector<std::vector<double>> U(N + 1);
    std::vector<double> z(d);
    for (int n = N; n >= 0; --n) {
        const auto& level = lattice.levels()[n];
        if (strat.decision[n].size() != level.size() * m)
            throw StructuralError("switched_bsde_value: strategy/lattice node mismatch");
        U[n].assign(level.size() * m, 0.0);
        const double t = lattice.time(n);
        for (std::size_t v = 0; v < level.size(); ++v) {
            for (int a = 0; a < m; ++a) {
                const int a2 = strat.decision[n][v * m + a];
                const double cost = (a2 == a) ? 0.0 : s.cost(a, a2);
                if (n == N) {
                    U[n][v * m + a] = cost + terminal.value(node_state(level[v]), a2);
                    continue;
                }
                double e = 0.0;
                std::fill(z.begin(), z.end(), 0.0);
                for (const auto& edge : level[v].edges) {
                    const double uv = U[n + 1][static_cast<std::size_t>(edge.next) * m + a2];
                    e += edge.prob * uv;
                    for (int r = 0; r < d; ++r) z[r] += edge.prob * uv * edge.dw[r];
                }
                for (int r = 0; r < d; ++r) z[r] /= lattice.dt();
                U[n][v * m + a] =
                    cost + implicit_step(g, t, e, z, a2, node_state(level[v]), lattice.dt());
            }
        }
    }
    return U;
}

EnumerationResult enumerate_strategies(const LatticeModel& lattice,
                                       const SwitchingStructure& s, const Generator& g,
                                       const TerminalCondition& terminal, int start_mode,
                                       int max_switches, std::uint64_t policy_cap) {
    const int m = s.modes(), N = lattice.steps();
    if (max_switches < 0) max_switches = N + 1;  // unrestricted at grid resolution

    std::size_t slots = 0;
    for (int n = 0; n < N; ++n) slots += lattice.levels()[n].size() * m;
    const double policies = std::pow(static_cast<double>(m), static_cast<double>(slots));
    if (policies > static_cast<double>(policy_cap))
        throw CapacityError("enumerate_strategies: " + std::to_string(policies) +
                            " policies exceed cap");

    auto strat = FeedbackStrategy::stay(lattice, m, start_mode);
    std::vector<int*> slot_ptr;
    slot_ptr.reserve(slots);
    for (int n = 0; n < N; ++n)
        for (auto& dec : strat.decision[n]) slot_ptr.push_back(&dec);

    EnumerationResult result;
    result.value = std::numeric_limits<double>::infinity();
    result.policies_evaluated = 0;

    std::vector<int> digits(slots, 0);
    for (std::size_t i = 0; i < slots; ++i) *slot_ptr[i] = 0;
    // switch-count table for the optional filter
    std::vector<std::vector<int>> sw;
    const bool filter = max_switches <= N;
    if (filter) {
        sw.resize(N + 1);
        for (int n = 0; n <= N; ++n) sw[n].assign(lattice.levels()[n].size() * m, 0);
    }

    while (true) {
        bool admissible = true;
        if (filter) {
            for (int n = N; n >= 0; --n) {
                const auto& level = lattice.levels()[n];
                for (std::size_t v = 0; v < level.size(); ++v)
                    for (int a = 0; a < m; ++a) {
                        const int a2 = strat.decision[n][v * m + a];
                        int worst = 0;
                        if (n < N)
                            for (const auto& edge : level[v].edges)
                                worst = std::max(
                                    worst, sw[n + 1][static_cast<std::size_t>(edge.next) * m + a2]);
                        sw[n][v * m + a] = worst + (a2 != a ? 1 : 0);
                    }
            }
            admissible = sw[0][start_mode] <= max_switches;
        }
        if (admissible) {
            const auto U = switched_bsde_value(lattice, s, g, terminal, strat);
            ++result.policies_evaluated;
            const double val = U[0][start_mode];
            if (val < result.value) {
                result.value = val;
                result.best = strat;
            }
        }
        // base-m odometer
        std::size_t pos = 0;
        while (pos < slots) {
            if (++digits[pos] < m) {
                *slot_ptr[pos] = digits[pos];
                break;
            }
            digits[pos] = 0;
            *slot_ptr[pos] = 0;
            ++pos;
        }
        if (pos == slots) break;
    }
    return result;
}

FeedbackStrategy extract_optimal_strategy(const ReflectedSolution& sol,
                                          const LatticeModel& lattice,
                                          const SwitchingStructure& s, int start_mode,
                                          double tol) {
    const int m = s.modes(), N = lattice.steps();
    auto strat = FeedbackStrategy::stay(lattice, m, start_mode);
    for (int n = 0; n < N; ++n) {  // never switch at T: terminal data is in Qbar
        const auto& level = lattice.levels()[n];
        for (std::size_t v = 0; v < level.size(); ++v) {
            for (int a = 0; a < m; ++a) {
                double bound = std::numeric_limits<double>::infinity();
                int argmin = -1;
                for (int l = 0; l < m; ++l) {
                    if (l == a) continue;
                    const double cand = sol.Y[n][v * m + l] + s.cost(a, l);
                    if (cand < bound) {
                        bound = cand;
                        argmin = l;
                    }
                }
                if (m > 1 && sol.Y[n][v * m + a] >= bound - tol) {
                    if (argmin < 0)
                        throw InternalError("extract_optimal_strategy: no argmin at a "
                                            "binding node");
                    strat.decision[n][v * m + a] = argmin;
                }
            }
        }
    }
    return strat;
}

SplicedSolution spliced_solution(const ReflectedSolution& sol, const LatticeModel& lattice,
                                 const SwitchingStructure& s, const Generator& g,
                                 const FeedbackStrategy& strat) {
    const int m = s.modes(), d = sol.d, N = lattice.steps();
    SplicedSolution out;
    out.value.resize(N + 1);
    out.dK.resize(N + 1);
    out.dAtilde.resize(N + 1);
    out.dA.resize(N + 1);
    out.min_dAtilde = std::numeric_limits<double>::infinity();

    for (int n = 0; n <= N; ++n) {
        const auto& level = lattice.levels()[n];
        out.value[n].assign(level.size() * m, 0.0);
        out.dK[n].assign(level.size() * m, 0.0);
        out.dAtilde[n].assign(level.size() * m, 0.0);
        out.dA[n].assign(level.size() * m, 0.0);
        for (std::size_t v = 0; v < level.size(); ++v)
            for (int a = 0; a < m; ++a) {
                const int a2 = strat.decision[n][v * m + a];
                out.value[n][v * m + a] = sol.Y[n][v * m + a2];
                out.dK[n][v * m + a] = sol.dK[n][v * m + a2];
                if (a2 != a) {
                    out.dA[n][v * m + a] = s.cost(a, a2);
                    out.dAtilde[n][v * m + a] =
                        sol.Y[n][v * m + a2] + s.cost(a, a2) - sol.Y[n][v * m + a];
                    out.min_dAtilde = std::min(out.min_dAtilde, out.dAtilde[n][v * m + a]);
                }
            }
    }
    if (!std::isfinite(out.min_dAtilde)) out.min_dAtilde = 0.0;

    // One-step identity of the spliced BSDE: the spliced value solves the
    // switched recursion with the extra nondecreasing K + Atilde term.
    out.max_identity_residual = 0.0;
    for (int n = 0; n < N; ++n) {
        const auto& level = lattice.levels()[n];
        const double t = lattice.time(n);
        for (std::size_t v = 0; v < level.size(); ++v)
            for (int a = 0; a < m; ++a) {
                const int a2 = strat.decision[n][v * m + a];
                double e = 0.0;
                for (const auto& edge : level[v].edges) {
                    const std::size_t c = static_cast<std::size_t>(edge.next) * m;
                    // spliced value at the child minus its jump terms recovers
                    // the mode-a2 field
                    e += edge.prob * (out.value[n + 1][c + a2] - out.dAtilde[n + 1][c + a2] +
                                      out.dA[n + 1][c + a2]);
                }
                const std::size_t yi = v * m + a2;
                const double y_impl = sol.Ytilde[n][yi];
                const double psi =
                    g.psi(t, y_impl, {&sol.Z[n][yi * d], (std::size_t)d}, a2,
                          node_state(level[v]));
                const double resid = out.value[n][v * m + a] -
                                     (e + psi * lattice.dt() - sol.dK[n][yi]);
                out.max_identity_residual =
                    std::max(out.max_identity_residual, std::abs(resid));
            }
    }

    // Forward measure over (node, entering mode) pairs along the strategy.
    std::vector<std::vector<double>> pi(N + 1);
    for (int n = 0; n <= N; ++n) pi[n].assign(lattice.levels()[n].size() * m, 0.0);
    pi[0][strat.initial_mode] = 1.0;
    out.expected_K_plus_Atilde = 0.0;
    out.max_K_plus_Atilde = 0.0;
    for (int n = 0; n <= N; ++n) {
        const auto& level = lattice.levels()[n];
        for (std::size_t v = 0; v < level.size(); ++v)
            for (int a = 0; a < m; ++a) {
                const double p = pi[n][v * m + a];
                if (p <= 0.0) continue;
                const int a2 = strat.decision[n][v * m + a];
                const double incr = out.dK[n][v * m + a] + out.dAtilde[n][v * m + a];
                out.expected_K_plus_Atilde += p * incr;
                out.max_K_plus_Atilde = std::max(out.max_K_plus_Atilde, incr);
                if (n < N)
                    for (const auto& edge : level[v].edges)
                        pi[n + 1][static_cast<std::size_t>(edge.next) * m + a2] +=
                            p * edge.prob;
            }
    }
    return out;
}

OptimalityReport verify_optimality(const ReflectedSolution& sol, const LatticeModel& lattice,
                                   const SwitchingStructure& s, const Generator& g,
                                   const TerminalCondition& terminal, int start_mode,
                                   std::span<const FeedbackStrategy> samples, double tol) {
    OptimalityReport rep;
    rep.reference = sol.Y[0][start_mode];
    rep.min_sample_value = std::numeric_limits<double>::infinity();
    rep.pass = true;
    for (const auto& strat : samples) {
        const auto U = switched_bsde_value(lattice, s, g, terminal, strat);
        StrategyCheck chk;
        chk.value = U[0][start_mode];
        chk.dominated = chk.value >= rep.reference - tol;
        rep.pass = rep.pass && chk.dominated;
        rep.min_sample_value = std::min(rep.min_sample_value, chk.value);
        rep.samples.push_back(chk);
    }
    const auto opt = extract_optimal_strategy(sol, lattice, s, start_mode, tol);
    const auto Uopt = switched_bsde_value(lattice, s, g, terminal, opt);
    rep.optimal_value = Uopt[0][start_mode];
    rep.optimal_gap = std::abs(rep.optimal_value - rep.reference);
    rep.pass = rep.pass && rep.optimal_gap <= tol;
    return rep;
}

namespace {

int sample_child(const LatticeNode& node, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double r = u(rng);
    for (const auto& edge : node.edges) {
        r -= edge.prob;
        if (r <= 0.0) return edge.next;
    }
    return node.edges.back().next;
}

}  // namespace

SeparationAudit switch_separation_audit(const ReflectedSolution& sol,
                                        const LatticeModel& lattice,
                                        const SwitchingStructure& s,
                                        const FeedbackStrategy& strat, int n_paths,
                                        std::uint64_t seed, double tol) {
    SeparationAudit audit;
    audit.min_gap = std::numeric_limits<double>::infinity();
    const auto sep = separation_constant(s);
    if (!sep.strictly_separated)
        throw PreconditionError("switch_separation_audit: strict hypothesis required");
    audit.c = sep.c;
    const int m = s.modes(), N = lattice.steps();

    std::mt19937_64 rng(seed);
    for (int p = 0; p < n_paths; ++p) {
        int v = 0, mode = strat.initial_mode;
        int last_switch_level = -1;
        std::vector<double> last_y;
        for (int n = 0; n <= N; ++n) {
            const int a2 = strat.decision[n][static_cast<std::size_t>(v) * m + mode];
            if (a2 != mode) {
                std::vector<double> y(sol.Y[n].begin() + static_cast<std::ptrdiff_t>(v) * m,
                                      sol.Y[n].begin() + static_cast<std::ptrdiff_t>(v) * m + m);
                if (last_switch_level >= 0 && n < N) {
                    if (n == last_switch_level) {
                        ++audit.exempt_coincident;
                    } else {
                        double d2 = 0.0;
                        for (int i = 0; i < m; ++i)
                            d2 += (y[i] - last_y[i]) * (y[i] - last_y[i]);
                        const double gap = std::sqrt(d2);
                        audit.gaps.push_back(gap);
                        audit.min_gap = std::min(audit.min_gap, gap);
                        ++audit.audited;
                    }
                }
                if (n < N) {
                    last_switch_level = n;
                    last_y = std::move(y);
                }
                mode = a2;
            }
            if (n < N) v = sample_child(lattice.levels()[n][v], rng);
        }
    }
    audit.pass = audit.audited == 0 || audit.min_gap >= audit.c - tol;
    return audit;
}

std::vector<SwitchEvent> realize_switch_events(const LatticeModel& lattice,
                                               const SwitchingStructure& s,
                                               const FeedbackStrategy& strat, int n_paths,
                                               std::uint64_t seed) {
    std::vector<SwitchEvent> events;
    const int m = s.modes(), N = lattice.steps();
    std::mt19937_64 rng(seed);
    for (int p = 0; p < n_paths; ++p) {
        int v = 0, mode = strat.initial_mode;
        for (int n = 0; n <= N; ++n) {
            const int a2 = strat.decision[n][static_cast<std::size_t>(v) * m + mode];
            if (a2 != mode) {
                events.push_back({p, lattice.time(n), mode, a2, s.cost(mode, a2)});
                mode = a2;
            }
            if (n < N) v = sample_child(lattice.levels()[n][v], rng);
        }
    }
    return events;
}

}  // namespace oswitch
