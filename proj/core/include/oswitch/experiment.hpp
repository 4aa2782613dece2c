#pragma once

#include <string>

#include "oswitch/config.hpp"

namespace oswitch {

struct ExperimentOutcome {
    bool pass = false;
    std::string artifact_dir;
    json summary;
};

/// Runs the pipeline requested by the config's checks block (reflected solve,
/// penalization schedule, strategy verification, Monte Carlo, PDE cross-check)
/// and writes CSV/JSON artifacts under out_root/<hash>-<timestamp>/.
/// All numeric outputs are deterministic for a fixed config and seed.
ExperimentOutcome run_experiment(json config, const std::string& out_root);

/// Builds the lattice described by the solver block and attaches the state
/// map when the problem declares one.
LatticeModel build_lattice_from_config(const json& config);

}  // namespace oswitch
