#include "oswitch/experiment.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>

#include "oswitch/bsde_lattice.hpp"
#include "oswitch/penalization.hpp"
#include "oswitch/strategy.hpp"

namespace oswitch {

namespace {

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
    return buf;
}

std::ofstream open_csv(const std::string& dir, const std::string& name,
                       const std::string& header) {
    std::ofstream out(dir + "/" + name);
    out << std::setprecision(17);
    out << header << "\n";
    return out;
}

json to_json_vec(const std::vector<double>& v) { return json(v); }

}  // namespace

LatticeModel build_lattice_from_config(const json& config) {
    const json& problem = config.at("problem");
    const json& lat = config.at("solver").at("lattice");
    const double T = problem.at("horizon").get<double>();
    const int steps = lat.at("steps").get<int>();
    const int d = lat.value("dimension", 1);
    BranchSpec spec;
    const std::string scheme = lat.value("scheme", std::string("binomial"));
    if (scheme == "binomial") {
        spec.kind = BranchSpec::Kind::Binomial;
    } else if (scheme == "gauss_hermite") {
        spec.kind = BranchSpec::Kind::GaussHermite;
        spec.gh_nodes = lat.value("gh_nodes", 3);
    } else {
        throw StructuralError("config /solver/lattice/scheme: unknown scheme '" + scheme +
                              "'");
    }
    LatticeModel lattice = LatticeModel::build(T, steps, d, spec);
    const auto state = build_state_map(problem);
    if (state.has_map) attach_state(lattice, state.map);
    return lattice;
}

ExperimentOutcome run_experiment(json config, const std::string& out_root) {
    apply_env_overrides(config);
    const std::string hash = config_hash(config);

    ExperimentOutcome outcome;
    outcome.artifact_dir = out_root + "/" + hash + "-" + timestamp_utc();
    std::filesystem::create_directories(outcome.artifact_dir);
    {
        std::ofstream cfg_copy(outcome.artifact_dir + "/config.json");
        cfg_copy << config.dump(2) << "\n";
    }

    const json& problem = config.at("problem");
    const json& checks = config.at("checks");
    const json tols = checks.value("tolerances", json::object());
    const double tol_constraint = tols.value("constraint", 0.0);
    const double tol_skorokhod = tols.value("skorokhod", 0.0);
    const double tol_monotone = tols.value("monotone", 1e-9);
    const double tol_attainment = tols.value("attainment", 1e-9);
    const double tol_complementarity = tols.value("complementarity", 1e-8);
    const double tol_fk = tols.value("feynman_kac", 1e-2);

    const auto s = build_structure(problem);
    const auto g = build_generator(problem);
    const auto terminal = build_terminal(problem);
    const int start_mode = problem.value("start_mode", 0);
    const std::uint64_t seed =
        config.at("solver").value("seed", static_cast<std::uint64_t>(12345));
    const int m = s.modes();

    json summary;
    summary["config_hash"] = hash;
    json verdicts = json::object();

    LatticeModel lattice = build_lattice_from_config(config);
    ReflectedSolution sol;
    bool have_reflected = false;

    if (checks.value("reflected", true)) {
        sol = solve_reflected_dp(lattice, s, g, terminal);
        have_reflected = true;
        const auto diag = diagnose_reflected(sol, lattice, s);
        std::vector<double> root(sol.Y[0].begin(), sol.Y[0].begin() + m);
        summary["reflected"] = {
            {"root", to_json_vec(root)},
            {"max_constraint_violation", diag.max_constraint_violation},
            {"skorokhod_residual", diag.skorokhod_residual},
            {"min_dK", diag.min_dK},
        };
        verdicts["reflected"] = diag.max_constraint_violation <= tol_constraint &&
                                std::abs(diag.skorokhod_residual) <= tol_skorokhod &&
                                diag.min_dK >= -tol_constraint;

        auto csv = open_csv(outcome.artifact_dir, "reflected_values.csv",
                            "level,node,mode,t,Y,Ytilde,dK");
        for (int n = 0; n <= lattice.steps(); ++n)
            for (std::size_t v = 0; v < lattice.levels()[n].size(); ++v)
                for (int i = 0; i < m; ++i)
                    csv << n << ',' << v << ',' << i << ',' << lattice.time(n) << ','
                        << sol.Y[n][v * m + i] << ',' << sol.Ytilde[n][v * m + i] << ','
                        << sol.dK[n][v * m + i] << "\n";
    }

    if (checks.value("penalization", false)) {
        if (!have_reflected)
            throw StructuralError("config /checks/penalization: requires reflected");
        std::vector<double> schedule =
            config.at("solver").value("penalty_schedule", std::vector<double>{1, 4, 16, 64, 256});
        const auto report = run_schedule(lattice, s, g, terminal, schedule, &sol);
        auto csv = open_csv(outcome.artifact_dir, "penalization.csv",
                            "n,violation_total,monotone_gap,squeeze_violation,"
                            "dist_to_reflected,root_mode0");
        for (const auto& e : report.entries)
            csv << e.n << ',' << e.violation_total << ',' << e.monotone_gap << ','
                << e.squeeze_violation << ',' << e.dist_to_reflected << ',' << e.root[0]
                << "\n";

        const auto last = solve_penalized(lattice, s, g, terminal, schedule.back());
        const auto limitK = extract_limit_K(last, sol, lattice);
        const auto minimal = check_discrete_minimal_condition(last, s, lattice);
        double minimal_worst = 0.0;
        for (double v : minimal) minimal_worst = std::max(minimal_worst, std::abs(v));

        summary["penalization"] = {
            {"decay_slope", report.decay_slope},
            {"limit_estimate", to_json_vec(report.limit_estimate)},
            {"max_monotone_violation", report.max_monotone_violation},
            {"max_squeeze_violation", report.max_squeeze_violation},
            {"limit_K_sup_gap", limitK.sup_increment_gap},
            {"limit_K_mass_gap", limitK.total_mass_gap},
            {"minimal_condition", minimal_worst},
        };
        verdicts["penalization"] = report.max_monotone_violation <= tol_monotone &&
                                   report.max_squeeze_violation <= tol_monotone &&
                                   minimal_worst <= tol_monotone;
    }

    FeedbackStrategy optimal;
    bool have_strategy = false;
    if (checks.value("strategy", false)) {
        if (!have_reflected)
            throw StructuralError("config /checks/strategy: requires reflected");
        optimal = extract_optimal_strategy(sol, lattice, s, start_mode);
        have_strategy = true;
        const int samples = checks.value("strategy_samples", 20);
        std::vector<FeedbackStrategy> random;
        for (int r = 0; r < samples; ++r)
            random.push_back(
                random_feedback_strategy(lattice, m, start_mode, seed + 1000 + r, 0.15));
        const auto report =
            verify_optimality(sol, lattice, s, g, terminal, start_mode, random, tol_attainment);
        const auto spliced = spliced_solution(sol, lattice, s, g, optimal);

        {
            std::ofstream out(outcome.artifact_dir + "/strategy.json");
            out << strategy_to_json(optimal) << "\n";
        }
        auto csv = open_csv(outcome.artifact_dir, "tournament.csv",
                            "strategy,value,dominated");
        csv << "optimal," << report.optimal_value << ",1\n";
        for (std::size_t r = 0; r < report.samples.size(); ++r)
            csv << "random_" << r << ',' << report.samples[r].value << ','
                << (report.samples[r].dominated ? 1 : 0) << "\n";

        summary["strategy"] = {
            {"reference", report.reference},
            {"optimal_value", report.optimal_value},
            {"optimal_gap", report.optimal_gap},
            {"min_sample_value", report.min_sample_value},
            {"max_K_plus_Atilde", spliced.max_K_plus_Atilde},
            {"min_dAtilde", spliced.min_dAtilde},
        };
        verdicts["strategy"] = report.pass &&
                               spliced.max_K_plus_Atilde <= tol_attainment &&
                               spliced.min_dAtilde >= -tol_attainment;
    }

    if (checks.value("simulate", false)) {
        if (!has_markovian_block(problem))
            throw StructuralError("config /checks/simulate: requires /problem/markovian");
        if (!have_strategy)
            throw StructuralError("config /checks/simulate: requires strategy");
        const json& mc = config.at("solver").at("mc");
        const std::size_t paths = mc.at("paths").get<std::size_t>();
        const int mc_steps = mc.value("steps", lattice.steps());
        if (mc_steps != lattice.steps())
            throw StructuralError(
                "config /solver/mc/steps: must match /solver/lattice/steps for binding");
        const auto diffusion = build_diffusion(problem);
        const auto cost = build_cost_model(problem);
        const auto ensemble =
            simulate_driverless(diffusion, lattice.horizon(), mc_steps, paths, seed);

        const auto rule_opt = MarkovianFeedbackRule::bind(lattice, optimal, m);
        const auto est_opt = estimate_cost(ensemble, s, rule_opt, cost);
        const double reference = sol.Y[0][start_mode];

        const int n_random = checks.value("mc_strategies", 20);
        std::vector<MarkovianFeedbackRule> rules;
        for (int r = 0; r < n_random; ++r)
            rules.push_back(MarkovianFeedbackRule::bind(
                lattice, random_feedback_strategy(lattice, m, start_mode, seed + 2000 + r, 0.15),
                m));
        const auto bound = check_lower_bound(reference, ensemble, s, rules, cost);

        auto csv = open_csv(outcome.artifact_dir, "costs.csv",
                            "strategy,J,SE,mean_weight,verdict");
        const bool attain = std::abs(est_opt.mean - reference) <= 3.0 * est_opt.se;
        csv << "optimal," << est_opt.mean << ',' << est_opt.se << ',' << est_opt.mean_weight
            << ',' << (attain ? 1 : 0) << "\n";
        for (std::size_t r = 0; r < bound.costs.size(); ++r)
            csv << "random_" << r << ',' << bound.costs[r].mean << ',' << bound.costs[r].se
                << ',' << bound.costs[r].mean_weight << ','
                << (bound.costs[r].mean + 3.0 * bound.costs[r].se >= reference ? 1 : 0)
                << "\n";

        const bool girsanov_ok =
            std::abs(est_opt.mean_weight - 1.0) <= 3.0 * est_opt.weight_se;
        summary["simulate"] = {
            {"reference", reference},
            {"J_optimal", est_opt.mean},
            {"SE_optimal", est_opt.se},
            {"attainment_gap", std::abs(est_opt.mean - reference)},
            {"worst_lower_bound_margin", bound.worst_margin},
            {"mean_weight", est_opt.mean_weight},
            {"weight_se", est_opt.weight_se},
        };
        verdicts["simulate"] = attain && bound.pass && girsanov_ok;
    }

    if (checks.value("pde", false)) {
        if (!has_markovian_block(problem))
            throw StructuralError("config /checks/pde: requires /problem/markovian");
        const auto coeffs = build_markovian(problem);
        const auto spec = build_pde_spec(config);
        const auto grid = solve_vi_projection(coeffs, s, spec);

        double membership = 0.0;
        for (const auto& level : grid.u)
            for (int j = 0; j < spec.space_nodes; ++j) {
                const std::span<const double> node{&level[static_cast<std::size_t>(j) * m],
                                                   static_cast<std::size_t>(m)};
                membership = std::max(membership, in_Q_closure(node, s, 0.0).worst_violation);
            }
        const auto comp = check_complementarity(grid, coeffs, s, tol_complementarity);

        std::vector<double> penalties =
            config.at("solver").at("pde").value("penalties", std::vector<double>{1, 10, 100});
        double pen_monotone = 0.0, prev_dist = -1.0;
        bool dist_shrinks = true;
        std::vector<double> dists;
        std::vector<std::vector<double>> prev_u;
        for (double n_pen : penalties) {
            const auto pgrid = solve_penalized_pde(coeffs, s, spec, n_pen);
            double dist = 0.0;
            for (std::size_t lev = 0; lev < pgrid.u.size(); ++lev)
                for (std::size_t q = 0; q < pgrid.u[lev].size(); ++q) {
                    dist = std::max(dist, std::abs(pgrid.u[lev][q] - grid.u[lev][q]));
                    if (!prev_u.empty())
                        pen_monotone =
                            std::max(pen_monotone, pgrid.u[lev][q] - prev_u[lev][q]);
                }
            dists.push_back(dist);
            if (prev_dist >= 0.0 && dist > prev_dist) dist_shrinks = false;
            prev_dist = dist;
            prev_u = pgrid.u;
        }

        const double w = spec.x_max - spec.x_min, cx = 0.5 * (spec.x_min + spec.x_max);
        const std::vector<FkPoint> points = {{0.0, cx},
                                             {0.25 * spec.T, cx - 0.2 * w},
                                             {0.25 * spec.T, cx + 0.2 * w},
                                             {0.5 * spec.T, cx - 0.1 * w},
                                             {0.5 * spec.T, cx + 0.1 * w}};
        const auto fk = feynman_kac_check(coeffs, s, grid, points);

        {
            auto csv = open_csv(outcome.artifact_dir, "pde_grid.csv", "t,x,mode,u");
            for (int n = 0; n <= spec.time_steps; ++n)
                for (int j = 0; j < spec.space_nodes; ++j)
                    for (int i = 0; i < m; ++i)
                        csv << grid.time(n) << ',' << grid.x(j) << ',' << i << ','
                            << grid.u[n][static_cast<std::size_t>(j) * m + i] << "\n";
        }
        {
            auto csv = open_csv(outcome.artifact_dir, "fk_comparison.csv",
                                "t,x,mode,u_pde,y_chain,gap");
            for (const auto& e : fk.entries)
                csv << e.t << ',' << e.x << ',' << e.mode << ',' << e.u_pde << ','
                    << e.y_chain << ',' << e.gap << "\n";
        }

        summary["pde"] = {
            {"membership_violation", membership},
            {"complementarity_violation", comp.max_violation},
            {"penalized_monotone_violation", pen_monotone},
            {"penalized_distances", to_json_vec(dists)},
            {"fk_max_gap", fk.max_gap},
            {"fk_chain_steps", fk.chain_steps},
        };
        verdicts["pde"] = membership <= 1e-12 && comp.max_violation <= tol_complementarity &&
                          pen_monotone <= tol_monotone && dist_shrinks &&
                          fk.max_gap <= tol_fk;
    }

    bool pass = true;
    for (const auto& [key, value] : verdicts.items()) pass = pass && value.get<bool>();
    summary["verdicts"] = verdicts;
    summary["pass"] = pass;
    outcome.pass = pass;
    outcome.summary = summary;
    {
        std::ofstream out(outcome.artifact_dir + "/summary.json");
        out << summary.dump(2) << "\n";
    }
    return outcome;
}

}  // namespace oswitch
