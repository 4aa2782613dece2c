#include "oswitch/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "oswitch/bsde_lattice.hpp"
#include "oswitch/pde.hpp"
#include "oswitch/penalization.hpp"
#include "oswitch/sde.hpp"
#include "oswitch/strategy.hpp"

namespace oswitch {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(4) << std::scientific << v;
    return os.str();
}

struct Instance {
    std::string name;
    int m = 0;
    std::vector<double> costs;
    Generator g;
    TerminalCondition terminal = TerminalCondition::constant({0.0});
    double T = 1.0;
    bool gauss_hermite = false;
    int gh_nodes = 4;
    bool has_state = false;
    StateMap state;
    bool binding = false;
};

Generator constant_generator(std::vector<double> values) {
    Generator g;
    g.psi = [values](double, double, std::span<const double>, int mode,
                     std::span<const double>) { return values[mode]; };
    g.lipschitz = 0.0;
    return g;
}

Generator linear_generator(std::vector<double> a, std::vector<double> bz,
                           std::vector<double> c) {
    Generator g;
    g.psi = [a, bz, c](double, double y, std::span<const double> z, int mode,
                       std::span<const double>) {
        double acc = a[mode] * y + c[mode];
        if (!z.empty()) acc += bz[mode] * z[0];
        return acc;
    };
    double lip = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        lip = std::max(lip, std::abs(a[i]) + std::abs(bz[i]));
    g.lipschitz = lip;
    return g;
}

// Quadratic running costs and mode-dependent bounded drifts for the Markovian
// instance; shared between the lattice, Monte Carlo, and PDE criteria.
constexpr double kMkSigma = 0.5;
constexpr double kMkCost = 0.3;
const std::vector<double> kMkL0{0.0, 0.3};    // constant part of l_i
const std::vector<double> kMkL2{1.0, 0.1};    // x^2 part of l_i
const std::vector<double> kMkDrift{0.1, -0.1};
const std::vector<double> kMkTerminal{0.0, 0.1};

Generator markovian_generator() {
    Generator g;
    g.psi = [](double, double, std::span<const double> z, int mode,
               std::span<const double> state) {
        const double x = state.empty() ? 0.0 : state[0];
        double acc = kMkL0[mode] + kMkL2[mode] * x * x;
        if (!z.empty()) acc += kMkDrift[mode] * z[0];
        return acc;
    };
    g.lipschitz = 0.1;
    return g;
}

TerminalCondition markovian_terminal() {
    return TerminalCondition::function(
        [](std::span<const double>, int mode) { return kMkTerminal[mode]; });
}

CostModel markovian_cost_model() {
    CostModel cost;
    cost.running = [](double, double x, int mode) {
        return kMkL0[mode] + kMkL2[mode] * x * x;
    };
    cost.drift = [](double, double, int mode) { return kMkDrift[mode]; };
    cost.terminal = markovian_terminal();
    return cost;
}

DiffusionSpec markovian_diffusion() {
    DiffusionSpec spec;
    spec.x0 = 0.0;
    spec.sigma = [](double, double) { return kMkSigma; };
    return spec;
}

std::vector<Instance> bundled_instances() {
    std::vector<Instance> out;

    Instance det;
    det.name = "deterministic_two_mode";
    det.m = 2;
    det.costs = {0, 0.5, 0.5, 0};
    det.g = constant_generator({2.0, 0.0});
    det.terminal = TerminalCondition::constant({0.0, 0.0});
    det.binding = true;
    out.push_back(std::move(det));

    Instance m1;
    m1.name = "m1_plain";
    m1.m = 1;
    m1.costs = {0};
    m1.g = linear_generator({-0.1}, {0.0}, {0.0});
    m1.terminal = TerminalCondition::constant({1.0});
    out.push_back(std::move(m1));

    Instance inactive;
    inactive.name = "constraint_inactive";
    inactive.m = 2;
    inactive.costs = {0, 5, 5, 0};
    inactive.g = constant_generator({0.3, -0.2});
    inactive.terminal = TerminalCondition::constant({0.1, -0.1});
    out.push_back(std::move(inactive));

    Instance cyc;
    cyc.name = "three_mode_cyclic";
    cyc.m = 3;
    cyc.costs = {0, 0.3, 0.35, 0.32, 0, 0.3, 0.3, 0.34, 0};
    cyc.g = linear_generator({-0.2, 0.1, 0.0}, {0.1, -0.1, 0.05}, {1.0, -0.5, 0.2});
    cyc.terminal = TerminalCondition::constant({0.1, 0.0, -0.05});
    cyc.binding = true;
    out.push_back(std::move(cyc));

    Instance mk;
    mk.name = "quadratic_markovian";
    mk.m = 2;
    mk.costs = {0, kMkCost, kMkCost, 0};
    mk.g = markovian_generator();
    mk.terminal = markovian_terminal();
    mk.gauss_hermite = true;
    mk.has_state = true;
    mk.state = arithmetic_state(0.0, 0.0, kMkSigma);
    mk.binding = true;
    out.push_back(std::move(mk));

    return out;
}

LatticeModel make_lattice(const Instance& inst, int N) {
    BranchSpec spec;
    if (inst.gauss_hermite) {
        spec.kind = BranchSpec::Kind::GaussHermite;
        spec.gh_nodes = inst.gh_nodes;
    }
    LatticeModel lattice = LatticeModel::build(inst.T, N, 1, spec);
    if (inst.has_state) attach_state(lattice, inst.state);
    return lattice;
}

struct SolvedInstance {
    Instance inst;
    SwitchingStructure s;
    LatticeModel lattice;
    ReflectedSolution sol;
};

template <class F>
CriterionResult run_criterion(int id, const std::string& name, F&& fn) {
    CriterionResult r;
    r.id = id;
    r.name = name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        fn(r);
    } catch (const std::exception& e) {
        r.pass = false;
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

// Brute-force projection oracle: minimum over all switching chains without
// repeated modes of terminal value plus accumulated costs.
void chain_minimum(const SwitchingStructure& s, std::span<const double> y, int cur,
                   double acc, unsigned visited, std::vector<double>& best, int origin) {
    best[origin] = std::min(best[origin], acc + y[cur]);
    for (int j = 0; j < s.modes(); ++j) {
        if (j == cur || (visited & (1u << j))) continue;
        chain_minimum(s, y, j, acc + s.cost(cur, j), visited | (1u << j), best, origin);
    }
}

// Explicit enumeration of deterministic switching schedules with at most two
// switches on the time grid; valid as an exhaustive search when nothing in
// the problem depends on the noise and one or two switches are enough.
double best_schedule_value(const std::vector<double>& rates, const SwitchingStructure& s,
                           const std::vector<double>& xi, double T, int N, int start) {
    const double dt = T / N;
    const int m = s.modes();
    double best = std::numeric_limits<double>::infinity();
    auto run_cost = [&](int mode, int from, int to) { return rates[mode] * dt * (to - from); };

    best = std::min(best, run_cost(start, 0, N) + xi[start]);
    for (int k0 = 0; k0 < N; ++k0)
        for (int m1 = 0; m1 < m; ++m1) {
            if (m1 == start) continue;
            const double one = run_cost(start, 0, k0) + s.cost(start, m1) +
                               run_cost(m1, k0, N) + xi[m1];
            best = std::min(best, one);
            for (int k1 = k0; k1 < N; ++k1)
                for (int m2 = 0; m2 < m; ++m2) {
                    if (m2 == m1) continue;
                    best = std::min(best, run_cost(start, 0, k0) + s.cost(start, m1) +
                                              run_cost(m1, k0, k1) + s.cost(m1, m2) +
                                              run_cost(m2, k1, N) + xi[m2]);
                }
        }
    return best;
}

struct CostCase {
    int m;
    std::vector<double> costs;
    bool weak_ok, strict_ok;
    int vi = -1, vj = -1, vl = -1;  // expected violating triple, when any
};

std::vector<CostCase> cost_library() {
    std::vector<CostCase> lib;
    // weakly valid, strictness fails
    lib.push_back({2, {0, 0, 0, 0}, true, false});
    lib.push_back({3, std::vector<double>(9, 0.0), true, false});
    lib.push_back({4, std::vector<double>(16, 0.0), true, false});
    lib.push_back({3, {0, 1, 2, 9, 0, 1, 9, 9, 0}, true, false});
    lib.push_back({3, {0, 0.5, 1.0, 0.5, 0, 0.5, 1.0, 0.5, 0}, true, false});
    lib.push_back({3, {0, 0.3, 0.3, 0.3, 0, 0.6, 0.3, 0.6, 0}, true, false});
    lib.push_back({4, {0, 1, 1, 2, 1, 0, 1, 1, 1, 1, 0, 1, 2, 1, 1, 0}, true, false});
    lib.push_back({3, {0, 0.2, 0.4, 0.2, 0, 0.2, 0.4, 0.2, 0}, true, false});
    lib.push_back({4, {0, 0.5, 1.0, 0.5, 0.5, 0, 0.5, 0.5, 1.0, 0.5, 0, 0.5,
                       0.5, 0.5, 0.5, 0}, true, false});
    lib.push_back({3, {0, 0, 0.5, 0, 0, 0.5, 0.5, 0.5, 0}, true, false});
    // strictly valid
    lib.push_back({2, {0, 0.5, 0.5, 0}, true, true});
    lib.push_back({2, {0, 1, 2, 0}, true, true});
    lib.push_back({3, {0, 1, 1, 1, 0, 1, 1, 1, 0}, true, true});
    lib.push_back({3, {0, 0.3, 0.35, 0.32, 0, 0.3, 0.3, 0.34, 0}, true, true});
    lib.push_back({4, {0, 0.4, 0.5, 0.6, 0.5, 0, 0.4, 0.5, 0.6, 0.5, 0, 0.4,
                       0.4, 0.6, 0.5, 0}, true, true});
    // violating, with the known triple
    lib.push_back({3, {0, 0.1, 1.0, 0.1, 0, 0.1, 1.0, 0.1, 0}, false, false, 0, 1, 2});
    lib.push_back({3, {0, 0.2, 2.0, 0.2, 0, 0.2, 2.0, 0.2, 0}, false, false, 0, 1, 2});
    lib.push_back({4, {0, 0.5, 0.5, 3.0, 0.5, 0, 0.5, 0.5, 0.5, 0.5, 0, 0.5,
                       3.0, 0.5, 0.5, 0}, false, false, 0, 1, 3});
    lib.push_back({2, {0, -0.5, 0.5, 0}, false, false, 0, 1, 1});
    lib.push_back({3, {0, 0.1, 0.1, 0.1, 0, 0.5, 0.1, 0.5, 0}, false, false, 1, 0, 2});
    return lib;
}

}  // namespace

AcceptanceReport run_acceptance_suite(const std::string& tier) {
    if (tier != "quick" && tier != "full")
        throw StructuralError("acceptance tier must be 'quick' or 'full'");
    const bool quick = tier == "quick";
    const int N_main = quick ? 32 : 64;
    const std::size_t paths_big = quick ? 10'000 : 100'000;

    AcceptanceReport report;
    report.tier = tier;
    const auto t0 = std::chrono::steady_clock::now();

    const auto instances = bundled_instances();
    std::vector<SolvedInstance> solved;
    for (const auto& inst : instances) {
        SwitchingStructure s(inst.m, inst.costs);
        LatticeModel lattice = make_lattice(inst, N_main);
        ReflectedSolution sol = solve_reflected_dp(lattice, s, inst.g, inst.terminal);
        solved.push_back({inst, std::move(s), std::move(lattice), std::move(sol)});
    }

    report.criteria.push_back(run_criterion(1, "hypothesis gatekeeping", [&](CriterionResult& r) {
        int wrong = 0;
        for (const auto& c : cost_library()) {
            const auto v = validate_costs(c.costs, c.m);
            bool ok = v.weak_ok == c.weak_ok && v.strict_ok == c.strict_ok;
            if (c.vi >= 0) {
                bool found = false;
                for (const auto& t : v.violations)
                    if (t.i == c.vi && t.j == c.vj && t.l == c.vl && !t.strict_only)
                        found = true;
                ok = ok && found;
            }
            if (!ok) ++wrong;
        }
        r.pass = wrong == 0;
        r.detail = "misclassified " + std::to_string(wrong) + " of 20";
    }));

    report.criteria.push_back(run_criterion(2, "projection oracle equivalence", [&](CriterionResult& r) {
        std::mt19937_64 rng(77);
        std::uniform_real_distribution<double> uy(-2.0, 2.0), uk(0.05, 1.0);
        double worst = 0.0;
        for (int trial = 0; trial < 1000; ++trial) {
            const int m = 2 + trial % 3;
            std::vector<double> costs(static_cast<std::size_t>(m) * m, 0.0);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j)
                    if (i != j) costs[static_cast<std::size_t>(i) * m + j] = uk(rng);
            SwitchingStructure s(m, costs);
            std::vector<double> y(m);
            for (auto& v : y) v = uy(rng);
            const auto proj = oblique_project(y, s);
            std::vector<double> oracle(m, std::numeric_limits<double>::infinity());
            for (int i = 0; i < m; ++i)
                chain_minimum(s, y, i, 0.0, 1u << i, oracle, i);
            for (int i = 0; i < m; ++i) worst = std::max(worst, std::abs(proj[i] - oracle[i]));
        }
        r.pass = worst <= 1e-12;
        r.detail = "max |projection - chain minimum| = " + fmt(worst);
    }));

    report.criteria.push_back(run_criterion(3, "constraint membership", [&](CriterionResult& r) {
        double worst = -std::numeric_limits<double>::infinity();
        for (const auto& si : solved)
            worst = std::max(worst, diagnose_reflected(si.sol, si.lattice, si.s)
                                        .max_constraint_violation);
        r.pass = worst <= 0.0;
        r.detail = "max membership excess = " + fmt(worst);
    }));

    report.criteria.push_back(run_criterion(4, "discrete Skorokhod identity", [&](CriterionResult& r) {
        double worst_resid = 0.0, min_dk = 0.0;
        for (const auto& si : solved) {
            const auto d = diagnose_reflected(si.sol, si.lattice, si.s);
            worst_resid = std::max(worst_resid, std::abs(d.skorokhod_residual));
            min_dk = std::min(min_dk, d.min_dK);
        }
        r.pass = worst_resid == 0.0 && min_dk >= 0.0;
        r.detail = "max |residual| = " + fmt(worst_resid) + ", min dK = " + fmt(min_dk);
    }));

    const std::vector<double> schedule{1, 4, 16, 64, 256};
    std::vector<ScheduleReport> schedule_reports;
    report.criteria.push_back(run_criterion(5, "penalization monotonicity", [&](CriterionResult& r) {
        double mono = 0.0, squeeze = 0.0;
        for (const auto& si : solved) {
            if (!si.inst.binding) continue;
            // schedule criteria run at N=32 regardless of tier
            const LatticeModel lat = make_lattice(si.inst, 32);
            const ReflectedSolution ref =
                solve_reflected_dp(lat, si.s, si.inst.g, si.inst.terminal);
            auto rep = run_schedule(lat, si.s, si.inst.g, si.inst.terminal, schedule, &ref);
            mono = std::max(mono, rep.max_monotone_violation);
            squeeze = std::max(squeeze, rep.max_squeeze_violation);
            schedule_reports.push_back(std::move(rep));
        }
        r.pass = mono <= 1e-9 && squeeze <= 1e-9;
        r.detail = "max monotone gap = " + fmt(mono) + ", max squeeze gap = " + fmt(squeeze);
    }));

    report.criteria.push_back(run_criterion(6, "violation decay order", [&](CriterionResult& r) {
        double worst_slope = -std::numeric_limits<double>::infinity();
        std::string slopes;
        for (const auto& rep : schedule_reports) {
            worst_slope = std::max(worst_slope, rep.decay_slope);
            slopes += (slopes.empty() ? "" : ", ") + fmt(rep.decay_slope);
        }
        r.pass = !schedule_reports.empty() && worst_slope <= -1.7;
        r.detail = "fitted slopes: " + slopes;
    }));

    report.criteria.push_back(run_criterion(7, "representation at desk scale", [&](CriterionResult& r) {
        std::mt19937_64 rng(123);
        std::uniform_real_distribution<double> uk(0.1, 0.6), uc(-0.5, 0.5), ux(-1.0, 1.0);
        double worst = 0.0;
        for (int t = 0; t < 10; ++t) {
            const int N = quick ? 2 + t % 2 : 2 + t % 3;
            SwitchingStructure s(2, {0.0, uk(rng), uk(rng), 0.0});
            Generator g = linear_generator({uc(rng), uc(rng)}, {uc(rng), uc(rng)},
                                           {uc(rng), uc(rng)});
            std::vector<double> raw{ux(rng), ux(rng)};
            const auto xi = oblique_project(raw, s);
            const auto terminal = TerminalCondition::constant(xi);
            LatticeModel lattice = LatticeModel::build(1.0, N, 1);
            const auto sol = solve_reflected_dp(lattice, s, g, terminal);
            const auto en = enumerate_strategies(lattice, s, g, terminal, 0);
            worst = std::max(worst, std::abs(en.value - sol.Y[0][0]));
        }
        r.pass = worst <= 1e-10;
        r.detail = "max |enumeration - DP| = " + fmt(worst);
    }));

    report.criteria.push_back(run_criterion(8, "optimal strategy attainment", [&](CriterionResult& r) {
        double worst_gap = 0.0, worst_ka = 0.0;
        for (const auto& si : solved) {
            for (int start = 0; start < si.inst.m; ++start) {
                const auto strat = extract_optimal_strategy(si.sol, si.lattice, si.s, start);
                const auto U = switched_bsde_value(si.lattice, si.s, si.inst.g,
                                                   si.inst.terminal, strat);
                worst_gap = std::max(worst_gap, std::abs(U[0][start] - si.sol.Y[0][start]));
                const auto spl = spliced_solution(si.sol, si.lattice, si.s, si.inst.g, strat);
                worst_ka = std::max(worst_ka, spl.max_K_plus_Atilde);
            }
        }
        r.pass = worst_gap <= 1e-9 && worst_ka <= 1e-9;
        r.detail = "max |U*(0) - Y(0)| = " + fmt(worst_gap) +
                   ", max K + Atilde increment = " + fmt(worst_ka);
    }));

    report.criteria.push_back(run_criterion(9, "deterministic two-mode benchmark", [&](CriterionResult& r) {
        const auto& si = solved[0];
        const std::vector<double> target{0.5, 0.0};
        double worst = 0.0;
        const auto rep =
            run_schedule(si.lattice, si.s, si.inst.g, si.inst.terminal, schedule, &si.sol);
        for (int i = 0; i < 2; ++i) {
            worst = std::max(worst, std::abs(si.sol.Y[0][i] - target[i]));
            worst = std::max(worst, std::abs(rep.limit_estimate[i] - target[i]));
            const double en = best_schedule_value({2.0, 0.0}, si.s, {0.0, 0.0}, si.inst.T,
                                                  si.lattice.steps(), i);
            worst = std::max(worst, std::abs(en - target[i]));
        }
        r.pass = worst <= 1e-6;
        r.detail = "max error over routes and modes = " + fmt(worst);
    }));

    report.criteria.push_back(run_criterion(10, "closed-form linear benchmark", [&](CriterionResult& r) {
        const auto& inst = instances[1];
        const double exact = std::exp(-0.1);
        const std::vector<int> Ns = quick ? std::vector<int>{8, 16, 32}
                                          : std::vector<int>{16, 32, 64, 128};
        std::vector<double> errs;
        for (int N : Ns) {
            LatticeModel lattice = LatticeModel::build(1.0, N, 1);
            const auto sol = solve_plain_bsde(lattice, 1, inst.g, inst.terminal);
            errs.push_back(std::abs(sol.Y[0][0] - exact));
        }
        double min_order = std::numeric_limits<double>::infinity();
        for (std::size_t k = 1; k < errs.size(); ++k)
            min_order = std::min(min_order, std::log2(errs[k - 1] / errs[k]));
        const double err_ref = quick ? errs[errs.size() - 1] : errs[2];
        r.pass = err_ref <= 2e-3 && min_order >= 0.9;
        r.detail = "error at reference N = " + fmt(err_ref) +
                   ", min pairwise order = " + fmt(min_order);
    }));

    const auto& mkv = solved[4];
    report.criteria.push_back(run_criterion(11, "switched-SDE bound and attainment", [&](CriterionResult& r) {
        const auto diffusion = markovian_diffusion();
        const auto cost = markovian_cost_model();
        const auto ensemble = simulate_driverless(diffusion, mkv.inst.T,
                                                  mkv.lattice.steps(), paths_big, 4242);
        const double reference = mkv.sol.Y[0][0];
        const auto optimal = extract_optimal_strategy(mkv.sol, mkv.lattice, mkv.s, 0);
        const auto rule_opt = MarkovianFeedbackRule::bind(mkv.lattice, optimal, mkv.inst.m);
        const auto est = estimate_cost(ensemble, mkv.s, rule_opt, cost);

        std::vector<MarkovianFeedbackRule> rules;
        for (int k = 0; k < 20; ++k)
            rules.push_back(MarkovianFeedbackRule::bind(
                mkv.lattice,
                random_feedback_strategy(mkv.lattice, mkv.inst.m, 0, 9001 + k, 0.15),
                mkv.inst.m));
        const auto bound = check_lower_bound(reference, ensemble, mkv.s, rules, cost);

        const double gap = std::abs(est.mean - reference);
        r.pass = bound.pass && gap <= 3.0 * est.se;
        r.detail = "attainment gap = " + fmt(gap) + " (3SE = " + fmt(3.0 * est.se) +
                   "), worst bound margin = " + fmt(bound.worst_margin);
    }));

    report.criteria.push_back(run_criterion(12, "Girsanov weight sanity", [&](CriterionResult& r) {
        const auto diffusion = markovian_diffusion();
        const auto cost = markovian_cost_model();
        const auto rule = MarkovianFeedbackRule::bind(
            mkv.lattice, random_feedback_strategy(mkv.lattice, mkv.inst.m, 0, 555, 0.15),
            mkv.inst.m);
        double worst_sigma = 0.0;
        for (std::size_t paths : {paths_big / 10, paths_big}) {
            const auto ens = simulate_driverless(diffusion, mkv.inst.T, mkv.lattice.steps(),
                                                 paths, 31337);
            const auto est = estimate_cost(ens, mkv.s, rule, cost);
            worst_sigma =
                std::max(worst_sigma, std::abs(est.mean_weight - 1.0) / est.weight_se);
        }
        r.pass = worst_sigma <= 3.0;
        r.detail = "worst |mean weight - 1| / SE = " + fmt(worst_sigma);
    }));

    report.criteria.push_back(run_criterion(13, "Feynman-Kac cross-check", [&](CriterionResult& r) {
        struct PdeCase {
            MarkovianCoefficients c;
            SwitchingStructure s;
        };
        std::vector<PdeCase> cases;
        {
            MarkovianCoefficients c;
            c.b = [](double, double) { return 0.0; };
            c.sigma = [](double, double) { return kMkSigma; };
            c.psi = markovian_generator();
            c.terminal = markovian_terminal();
            cases.push_back({std::move(c), SwitchingStructure(2, {0, kMkCost, kMkCost, 0})});
        }
        {
            MarkovianCoefficients c;
            c.b = [](double, double) { return 0.0; };
            c.sigma = [](double, double) { return 0.1; };
            c.psi = constant_generator({2.0, 0.0});
            c.terminal = TerminalCondition::constant({0.0, 0.0});
            cases.push_back({std::move(c), SwitchingStructure(2, {0, 0.5, 0.5, 0})});
        }

        double worst_fine = 0.0;
        bool decreasing = true;
        std::string gaps;
        for (const auto& pc : cases) {
            PdeGridSpec coarse{-3.0, 3.0, quick ? 41 : 61, quick ? 16 : 32, 1.0};
            PdeGridSpec fine{-3.0, 3.0, quick ? 81 : 121, quick ? 32 : 64, 1.0};
            const std::vector<FkPoint> points{
                {0.0, 0.0}, {0.25, -1.2}, {0.25, 1.2}, {0.5, -0.6}, {0.5, 0.6}};
            const auto gc =
                feynman_kac_check(pc.c, pc.s, solve_vi_projection(pc.c, pc.s, coarse), points);
            const auto gf =
                feynman_kac_check(pc.c, pc.s, solve_vi_projection(pc.c, pc.s, fine), points);
            if (!(gf.max_gap <= gc.max_gap || gf.max_gap <= 1e-4)) decreasing = false;
            worst_fine = std::max(worst_fine, gf.max_gap);
            gaps += (gaps.empty() ? "" : "; ") + fmt(gc.max_gap) + " -> " + fmt(gf.max_gap);
        }
        r.pass = decreasing && worst_fine <= 1e-2;
        r.detail = "gaps coarse -> fine: " + gaps;
    }));

    report.criteria.push_back(run_criterion(14, "penalized PDE monotone convergence", [&](CriterionResult& r) {
        MarkovianCoefficients c;
        c.b = [](double, double) { return 0.0; };
        c.sigma = [](double, double) { return kMkSigma; };
        c.psi = markovian_generator();
        c.terminal = markovian_terminal();
        SwitchingStructure s(2, {0, kMkCost, kMkCost, 0});
        PdeGridSpec spec{-3.0, 3.0, quick ? 41 : 81, quick ? 20 : 40, 1.0};
        const auto ref = solve_vi_projection(c, s, spec);

        double mono = 0.0, below = 0.0, prev_dist = -1.0;
        bool shrinking = true;
        std::vector<std::vector<double>> prev;
        std::string dists;
        for (double n : {1.0, 10.0, 100.0}) {
            const auto pg = solve_penalized_pde(c, s, spec, n);
            double dist = 0.0;
            for (std::size_t lev = 0; lev < pg.u.size(); ++lev)
                for (std::size_t q = 0; q < pg.u[lev].size(); ++q) {
                    dist = std::max(dist, std::abs(pg.u[lev][q] - ref.u[lev][q]));
                    below = std::max(below, ref.u[lev][q] - pg.u[lev][q]);
                    if (!prev.empty())
                        mono = std::max(mono, pg.u[lev][q] - prev[lev][q]);
                }
            if (prev_dist >= 0.0 && dist > prev_dist) shrinking = false;
            dists += (dists.empty() ? "" : ", ") + fmt(dist);
            prev_dist = dist;
            prev = pg.u;
        }
        // the projection route carries an O(dt) splitting offset near the free
        // boundary, so domination is reported but only monotonicity and the
        // shrinking distance are gating
        r.pass = mono <= 1e-9 && shrinking;
        r.detail = "sup distances: " + dists + "; monotone gap = " + fmt(mono) +
                   ", below gap = " + fmt(below);
    }));

    report.criteria.push_back(run_criterion(15, "bitwise reproducibility", [&](CriterionResult& r) {
        bool ok = true;
        const auto diffusion = markovian_diffusion();
        const auto e1 = simulate_driverless(diffusion, 1.0, 16, 500, 42);
        const auto e2 = simulate_driverless(diffusion, 1.0, 16, 500, 42);
        ok = ok && e1.X == e2.X && e1.dW == e2.dW;

        const auto cost = markovian_cost_model();
        const auto rule = MarkovianFeedbackRule::bind(
            mkv.lattice, random_feedback_strategy(mkv.lattice, mkv.inst.m, 0, 7, 0.2),
            mkv.inst.m);
        const auto rule2 = MarkovianFeedbackRule::bind(
            mkv.lattice, random_feedback_strategy(mkv.lattice, mkv.inst.m, 0, 7, 0.2),
            mkv.inst.m);
        const auto c1 = estimate_cost(e1, mkv.s, rule, cost);
        const auto c2 = estimate_cost(e2, mkv.s, rule2, cost);
        ok = ok && c1.mean == c2.mean && c1.se == c2.se && c1.mean_weight == c2.mean_weight;

        const auto& si = solved[0];
        LatticeModel lat = LatticeModel::build(1.0, 8, 1);
        const auto ref = solve_reflected_dp(lat, si.s, si.inst.g, si.inst.terminal);
        const auto r1 = run_schedule(lat, si.s, si.inst.g, si.inst.terminal, schedule, &ref);
        const auto r2 = run_schedule(lat, si.s, si.inst.g, si.inst.terminal, schedule, &ref);
        for (std::size_t k = 0; k < r1.entries.size(); ++k)
            ok = ok && r1.entries[k].root == r2.entries[k].root &&
                 r1.entries[k].violation_total == r2.entries[k].violation_total;

        r.pass = ok;
        r.detail = ok ? "all re-runs bitwise identical" : "re-run mismatch";
    }));

    report.total_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.all_pass = true;
    for (const auto& c : report.criteria) report.all_pass = report.all_pass && c.pass;
    return report;
}

void print_acceptance(const AcceptanceReport& report, std::ostream& out) {
    for (const auto& c : report.criteria) {
        out << "CRITERION " << std::setw(2) << std::setfill('0') << c.id << std::setfill(' ')
            << " " << (c.pass ? "PASS" : "FAIL") << "  " << c.name << " ("
            << std::fixed << std::setprecision(2) << c.seconds << "s): " << c.detail << "\n";
        out.unsetf(std::ios::fixed);
    }
    out << "ACCEPTANCE " << (report.all_pass ? "PASS" : "FAIL") << " (" << report.tier
        << " tier, " << std::fixed << std::setprecision(1) << report.total_seconds << "s)\n";
    out.unsetf(std::ios::fixed);
}

}  // namespace oswitch
