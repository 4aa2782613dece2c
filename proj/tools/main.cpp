#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "oswitch/acceptance.hpp"
#include "oswitch/experiment.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "runs";
    std::uint64_t seed = 0;
    bool has_seed = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required) {
    auto* c = cmd->add_option("--config", opts.config_path, "config file (JSON)");
    if (config_required) c->required();
    cmd->add_option("--out", opts.out_dir, "artifact output directory");
    cmd->add_option("--seed", opts.seed, "seed override")->each([&](const std::string&) {
        opts.has_seed = true;
    });
}

// Runs the pipeline with the checks block restricted to the verb's stage(s).
int run_verb(const CommonOpts& opts, std::initializer_list<const char*> stages) {
    try {
        oswitch::json config = oswitch::load_config_file(opts.config_path);
        if (opts.has_seed) config["solver"]["seed"] = opts.seed;
        config["checks"]["reflected"] = true;
        for (const char* key : {"penalization", "strategy", "simulate", "pde"})
            config["checks"][key] = false;
        for (const char* key : stages) config["checks"][key] = true;
        const auto outcome = oswitch::run_experiment(std::move(config), opts.out_dir);
        std::cout << outcome.summary.dump(2) << "\n";
        std::cerr << "artifacts: " << outcome.artifact_dir << "\n";
        return outcome.pass ? 0 : 1;
    } catch (const std::exception& e) {
        oswitch::json err;
        err["error"] = e.what();
        std::cerr << err.dump(2) << "\n";
        return 2;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reflected-BSDE / optimal switching solver suite"};
    app.require_subcommand(1);

    CommonOpts solve_o, pen_o, strat_o, sim_o, pde_o, acc_o;
    std::string tier = "quick";

    add_common(app.add_subcommand("solve", "reflected dynamic-programming solve"), solve_o,
               true);
    add_common(app.add_subcommand("penalize", "penalty-schedule study"), pen_o, true);
    add_common(app.add_subcommand("strategy", "optimal strategy extraction and checks"),
               strat_o, true);
    add_common(app.add_subcommand("simulate", "switched-SDE Monte Carlo"), sim_o, true);
    add_common(app.add_subcommand("pde", "variational-inequality cross-check"), pde_o, true);
    auto* accept = app.add_subcommand("accept", "run the acceptance battery");
    add_common(accept, acc_o, false);
    accept->add_option("--tier", tier, "quick or full")
        ->check(CLI::IsMember({"quick", "full"}));

    CLI11_PARSE(app, argc, argv);

    if (app.got_subcommand("solve")) return run_verb(solve_o, {});
    if (app.got_subcommand("penalize")) return run_verb(pen_o, {"penalization"});
    if (app.got_subcommand("strategy")) return run_verb(strat_o, {"strategy"});
    if (app.got_subcommand("simulate")) return run_verb(sim_o, {"strategy", "simulate"});
    if (app.got_subcommand("pde")) return run_verb(pde_o, {"pde"});

    try {
        const auto report = oswitch::run_acceptance_suite(tier);
        oswitch::print_acceptance(report, std::cout);
        if (!acc_o.out_dir.empty()) {
            oswitch::json j;
            j["tier"] = report.tier;
            j["all_pass"] = report.all_pass;
            j["total_seconds"] = report.total_seconds;
            for (const auto& c : report.criteria)
                j["criteria"].push_back({{"id", c.id},
                                         {"name", c.name},
                                         {"pass", c.pass},
                                         {"detail", c.detail},
                                         {"seconds", c.seconds}});
            std::filesystem::create_directories(acc_o.out_dir);
            std::ofstream out(acc_o.out_dir + "/acceptance.json");
            if (out) out << j.dump(2) << "\n";
        }
        return report.all_pass ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "acceptance suite error: " << e.what() << "\n";
        return 2;
    }
}
