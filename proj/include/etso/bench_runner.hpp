#pragma once

#include "etso/optimizer.hpp"
#include "etso/scenario.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace etso {

struct RunConfig {
  std::string scenario = "stationary-gp";  // embedded id or path
  std::vector<PolicyKind> policies{PolicyKind::Etso};
  std::optional<int> horizon;       // T; scenario value (default 60) when unset
  std::optional<int> learn_rounds;  // T_L; scenario value (default 15) when unset
  std::vector<std::uint64_t> seeds{1};
  std::vector<std::string> overrides;  // dotted.key=value applied to the scenario document
  /// When set, the post-trigger backup flight is an extra evaluation within the same round
  /// instead of occupying the next round.
  bool free_backup_requery = false;
  unsigned threads = 0;  // 0: hardware concurrency
  std::string output;

  void validate() const;
  nlohmann::ordered_json to_json() const;
};

/// One environment evaluation. Round 0 is the initial backup flight.
struct ExperimentRecord {
  std::string scenario;
  PolicyKind policy = PolicyKind::Etso;
  std::uint64_t seed = 0;
  int round = 0;
  int t_prime = 0;
  std::vector<double> theta;
  double noisy_cost = 0.0;
  double true_cost = 0.0;
  bool crashed = false;
  bool reset = false;           // this observation fired the trigger
  bool backup_requery = false;  // backup flight that completes a reset
  std::size_t mode = 0;
  double normalized_performance = 0.0;  // against the round-0 true backup cost
  std::size_t safe_set_size = 0;
  double j_min = 0.0;        // raw units
  bool in_safe_set = false;  // selection came from the current (or frozen) safe set
};

struct RunOutcome {
  PolicyKind policy = PolicyKind::Etso;
  std::uint64_t seed = 0;
  bool valid = true;
  std::string error;
  int evaluations = 0;
  int resets = 0;
  int crashes = 0;
};

struct MatrixResult {
  Scenario scenario;
  RunConfig config;
  std::vector<ExperimentRecord> records;  // canonical order
  std::vector<RunOutcome> runs;           // (policy, seed) order
};

/// Loads the scenario with the config's overrides, horizon and learn rounds applied.
Scenario resolve_scenario(const RunConfig& config);

/// Single (policy, seed) run. Deterministic.
std::vector<ExperimentRecord> run_single(const Scenario& scenario, PolicyKind policy,
                                         std::uint64_t seed, bool free_backup_requery,
                                         RunOutcome* outcome = nullptr);

MatrixResult run_matrix(const RunConfig& config);
MatrixResult run_matrix(const Scenario& scenario, const RunConfig& config);

/// Orders records by (scenario, policy, seed, round, backup_requery).
void canonical_sort(std::vector<ExperimentRecord>& records);

/// Named independent RNG streams derived from a run's root seed.
enum class Stream : std::uint32_t { EnvironmentNoise = 1, Objective = 2 };
std::uint64_t stream_seed(std::uint64_t root, Stream stream);

struct PolicySummary {
  std::string scenario;
  PolicyKind policy = PolicyKind::Etso;
  std::size_t runs = 0;
  std::vector<double> mean;  // per round 0..T, normalized performance
  std::vector<double> std;   // sample standard deviation, 0 for a single run
  std::vector<int> crashes;  // crash records per round
  std::vector<int> resets;   // trigger firings per round
  int total_crashes = 0;
  int crashed_runs = 0;
  int total_resets = 0;
  std::map<int, int> reset_histogram;  // round -> firings
  double final_mean = 0.0;             // mean performance over the last 10 rounds
};

/// Aggregates per (scenario, policy). Throws DomainError on empty input.
std::vector<PolicySummary> summarize(const std::vector<ExperimentRecord>& records);

}  // namespace etso
