#pragma once

#include "etso/optimizer.hpp"
#include "etso/plant_env.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace etso {

/// A complete benchmark setting: optimizer configuration plus the environment it runs against.
struct Scenario {
  std::string id;
  std::string description;
  std::string scenario_class;  // stationary, insignificant-change, significant-change, safe-set-shift
  int horizon = 60;
  EtsoConfig etso;
  EnvironmentConfig environment;
  nlohmann::json expected = nlohmann::json::object();
  nlohmann::json document;  // the (overridden) source document, echoed into record headers
};

/// Shipped scenarios as (id, JSON text), sorted by id. Generated at build time.
const std::vector<std::pair<std::string, std::string>>& embedded_scenarios();
std::vector<std::string> scenario_ids();

/// Resolves an embedded id first, then a filesystem path. Throws NotFoundError.
nlohmann::json load_scenario_document(const std::string& id_or_path);

/// Applies "dotted.key=value"; the value is parsed as JSON and falls back to a string.
/// Only keys that already exist may be set, so typos fail loudly. Throws ConfigError.
void apply_override(nlohmann::json& document, const std::string& assignment);

/// Throws SchemaError on malformed documents and ConfigError on invalid values.
Scenario parse_scenario(const nlohmann::json& document);

Scenario load_scenario(const std::string& id_or_path, const std::vector<std::string>& overrides = {});

struct ValidationCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool ok() const;
};

/// Pre-run oracle sweep: backup clears J_crit by epsilon in every mode, J_crit lies below the
/// raw safety threshold, change rounds respect dwell and T_L, integration is converged, and the
/// scenario class holds (change magnitude versus the exploit threshold, safe-set shift).
ValidationReport validate_scenario(const Scenario& scenario);

/// Noise-free cost of every grid point in a mode; crashed points report J_crit.
struct ModeSweep {
  Vector cost;
  std::vector<bool> crashed;
};
ModeSweep sweep_mode(const Scenario& scenario, const Environment& env, std::size_t mode);

}  // namespace etso
