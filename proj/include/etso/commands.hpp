#pragma once

#include "etso/optimizer.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace etso {

/// Process exit codes of the etso tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,         // unexpected failure
  kExitUsage = 2,            // malformed command line
  kExitConfigNotFound = 3,   // scenario id/path or input file does not exist
  kExitInvalidConfig = 4,    // bad scenario value, override, seed list or policy
  kExitSchema = 5,           // malformed or mixed-schema document
  kExitOutput = 6,           // output path not writable
  kExitValidation = 7,       // scenario failed its pre-run checks
  kExitNumerical = 8,        // factorization failed beyond the jitter ceiling
};

struct CliInvocation {
  enum class Command { Run, Summarize, ExportPlotData, ValidateScenario };
  Command command = Command::Run;
  std::string config;               // run, validate-scenario
  std::vector<std::string> inputs;  // summarize, export-plot-data: records files
  std::string output;
  std::vector<std::string> overrides;
  std::vector<std::uint64_t> seeds{1};
  std::vector<PolicyKind> policies{PolicyKind::Etso};
  std::optional<int> horizon;
  std::optional<int> learn_rounds;
  bool free_backup_requery = false;
  unsigned threads = 0;
  int verbosity = 0;
};

/// "1..20", "1,4,9" or a mix such as "1..3,10". Throws ConfigError.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

/// Comma separated policy names, or "all". Throws ConfigError.
std::vector<PolicyKind> parse_policy_list(const std::string& text);

/// Runs one subcommand. Diagnostics go to `err` as a single line
/// "etso: error[<kind>]: <message>"; the return value is an ExitCode.
int execute(const CliInvocation& invocation, std::ostream& out, std::ostream& err);

/// Summary path written next to a records file: "x.jsonl" -> "x.summary.csv".
std::string summary_path_for(const std::string& records_path);

}  // namespace etso
