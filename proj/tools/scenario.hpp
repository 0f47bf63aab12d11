// Scenario files: YAML with one section per model component. Every field
// has a default (the reference parameter set), unknown sections or keys are
// rejected, and `section.key=value` overrides are applied after the file.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "qkdring/simulator.hpp"

namespace qkdring::cli {

struct Scenario {
    simulator::ScenarioConfig config;
    std::string source;                  // file path, or empty for pure defaults
    std::vector<std::string> overrides;  // as given, in order
};

/// Parses YAML text; `origin` prefixes error messages ("file:line: ...").
simulator::ScenarioConfig parse_scenario(const std::string& yaml_text, const std::string& origin);

Scenario load_scenario(const std::string& path, const std::vector<std::string>& overrides);

/// Applies one `section.key=value` assignment.
void apply_override(simulator::ScenarioConfig& config, const std::string& assignment);

/// Fully resolved configuration, re-loadable by parse_scenario.
void write_manifest(std::ostream& out, const Scenario& scenario);

/// Every `section.key` the loader accepts, in manifest order.
std::vector<std::string> known_fields();

}  // namespace qkdring::cli
