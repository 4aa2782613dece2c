#pragma once

#include <string>

#include <json.hpp>

#include "oswitch/core_model.hpp"
#include "oswitch/generator.hpp"
#include "oswitch/lattice.hpp"
#include "oswitch/pde.hpp"
#include "oswitch/sde.hpp"

namespace oswitch {

using json = nlohmann::json;

/// Reads and schema-validates a config file. Validation errors name the
/// offending field by JSON pointer path.
json load_config_file(const std::string& path);

/// Parses a config from text (same validation as the file loader).
json parse_config(const std::string& text);

/// Applies environment overrides: OSWITCH_a__b__c=value sets /a/b/c. Values
/// are parsed as JSON when possible, otherwise taken as strings.
void apply_env_overrides(json& config);

/// FNV-1a hash of the canonical serialization, as 16 hex digits. Embedded in
/// every artifact so outputs can be traced to their exact configuration.
std::string config_hash(const json& config);

// Builders from the validated problem block. Each throws StructuralError with
// the field path on bad input.
SwitchingStructure build_structure(const json& problem);
Generator build_generator(const json& problem);
TerminalCondition build_terminal(const json& problem);

/// State map per the problem's "state" entry; .has_map false for "none".
struct StateMapSpec {
    bool has_map = false;
    StateMap map;
};
StateMapSpec build_state_map(const json& problem);

bool has_markovian_block(const json& problem);
MarkovianCoefficients build_markovian(const json& problem);
DiffusionSpec build_diffusion(const json& problem);
CostModel build_cost_model(const json& problem);

PdeGridSpec build_pde_spec(const json& config);

}  // namespace oswitch
