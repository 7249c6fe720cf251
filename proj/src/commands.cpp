#include "etso/commands.hpp"

#include "etso/bench_runner.hpp"
#include "etso/errors.hpp"
#include "etso/records.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace etso {
namespace {

namespace fs = std::filesystem;

struct OutputError : Error {
  using Error::Error;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

std::uint64_t parse_u64(const std::string& s) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError("invalid seed '" + s + "'");
  }
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw ConfigError("seed out of range '" + s + "'");
  }
}

void write_file(const std::string& path, const std::string& content) {
  const fs::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw OutputError("cannot write '" + path + "'");
  f << content;
  f.flush();
  if (!f) throw OutputError("failed while writing '" + path + "'");
}

std::vector<ExperimentRecord> load_inputs(const std::vector<std::string>& inputs) {
  if (inputs.empty()) throw ConfigError("no records files given");
  std::vector<ExperimentRecord> all;
  for (const auto& path : inputs) {
    RecordsFile f = read_records_file(path);
    all.insert(all.end(), f.records.begin(), f.records.end());
  }
  canonical_sort(all);
  return all;
}

int cmd_run(const CliInvocation& inv, std::ostream& out) {
  RunConfig cfg;
  cfg.scenario = inv.config;
  cfg.policies = inv.policies;
  cfg.seeds = inv.seeds;
  cfg.overrides = inv.overrides;
  cfg.horizon = inv.horizon;
  cfg.learn_rounds = inv.learn_rounds;
  cfg.free_backup_requery = inv.free_backup_requery;
  cfg.threads = inv.threads;
  const Scenario scenario = resolve_scenario(cfg);
  cfg.output = inv.output.empty() ? scenario.id + ".records.jsonl" : inv.output;

  const MatrixResult result = run_matrix(scenario, cfg);

  std::ostringstream records;
  write_records(records, records_header(result), result.records);
  std::ostringstream summary;
  const auto summaries = summarize(result.records);
  write_summary(summary, summaries);
  write_file(cfg.output, records.str());
  write_file(summary_path_for(cfg.output), summary.str());

  std::map<PolicyKind, int> invalid;
  for (const auto& r : result.runs) invalid[r.policy] += r.valid ? 0 : 1;
  for (const auto& s : summaries) {
    out << "policy=" << to_string(s.policy) << " runs=" << s.runs << " crashes=" << s.total_crashes
        << " crashed_runs=" << s.crashed_runs << " resets=" << s.total_resets
        << " invalid_runs=" << invalid[s.policy] << '\n';
  }
  if (inv.verbosity > 0) {
    for (const auto& r : result.runs) {
      if (!r.valid) out << "invalid run policy=" << to_string(r.policy) << " seed=" << r.seed << ": " << r.error << '\n';
    }
  }
  return kExitOk;
}

int cmd_summarize(const CliInvocation& inv, std::ostream& out) {
  const auto records = load_inputs(inv.inputs);
  std::ostringstream s;
  write_summary(s, summarize(records));
  if (inv.output.empty()) {
    out << s.str();
  } else {
    write_file(inv.output, s.str());
  }
  return kExitOk;
}

int cmd_export(const CliInvocation& inv, std::ostream& out) {
  const auto records = load_inputs(inv.inputs);
  const std::string dir = inv.output.empty() ? "." : inv.output;
  std::map<std::string, std::vector<ExperimentRecord>> by_scenario;
  for (const auto& r : records) by_scenario[r.scenario].push_back(r);
  for (const auto& [id, recs] : by_scenario) {
    std::ostringstream curve;
    write_curve(curve, summarize(recs));
    std::ostringstream events;
    write_events(events, recs);
    const std::string curve_path = (fs::path(dir) / (id + ".curve.csv")).string();
    const std::string events_path = (fs::path(dir) / (id + ".events.csv")).string();
    write_file(curve_path, curve.str());
    write_file(events_path, events.str());
    out << curve_path << '\n' << events_path << '\n';
  }
  return kExitOk;
}

int cmd_validate(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> targets;
  if (inv.config == "all") {
    targets = scenario_ids();
  } else {
    targets.push_back(inv.config);
  }
  bool ok = true;
  for (const auto& t : targets) {
    const Scenario sc = load_scenario(t, inv.overrides);
    const ValidationReport report = validate_scenario(sc);
    for (const auto& c : report.checks) {
      out << sc.id << ' ' << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    }
    ok = ok && report.ok();
  }
  if (!ok) {
    err << "etso: error[validation]: scenario checks failed\n";
    return kExitValidation;
  }
  return kExitOk;
}

void diagnose(std::ostream& err, const char* kind, const std::string& message) {
  std::string line = message;
  for (auto& c : line) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  err << "etso: error[" << kind << "]: " << line << '\n';
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    const auto dots = item.find("..");
    if (dots != std::string::npos) {
      const std::uint64_t a = parse_u64(trim(item.substr(0, dots)));
      const std::uint64_t b = parse_u64(trim(item.substr(dots + 2)));
      if (b < a) throw ConfigError("empty seed range '" + item + "'");
      if (b - a > 100000) throw ConfigError("seed range too large '" + item + "'");
      for (std::uint64_t s = a; s <= b; ++s) seeds.push_back(s);
    } else {
      seeds.push_back(parse_u64(item));
    }
  }
  if (seeds.empty()) throw ConfigError("seed list is empty");
  return seeds;
}

std::vector<PolicyKind> parse_policy_list(const std::string& text) {
  if (trim(text) == "all") {
    return {PolicyKind::Etso, PolicyKind::SafeOptBudget, PolicyKind::SafeOptInfinite,
            PolicyKind::BackupOnly};
  }
  std::vector<PolicyKind> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_policy(trim(item)));
  if (out.empty()) throw ConfigError("policy list is empty");
  return out;
}

std::string summary_path_for(const std::string& records_path) {
  const std::string suffix = ".jsonl";
  if (records_path.size() > suffix.size() &&
      records_path.compare(records_path.size() - suffix.size(), suffix.size(), suffix) == 0) {
    std::string base = records_path.substr(0, records_path.size() - suffix.size());
    const std::string rec = ".records";
    if (base.size() > rec.size() && base.compare(base.size() - rec.size(), rec.size(), rec) == 0) {
      base.resize(base.size() - rec.size());
    }
    return base + ".summary.csv";
  }
  return records_path + ".summary.csv";
}

int execute(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  try {
    switch (inv.command) {
      case CliInvocation::Command::Run: return cmd_run(inv, out);
      case CliInvocation::Command::Summarize: return cmd_summarize(inv, out);
      case CliInvocation::Command::ExportPlotData: return cmd_export(inv, out);
      case CliInvocation::Command::ValidateScenario: return cmd_validate(inv, out, err);
    }
    diagnose(err, "usage", "unknown subcommand");
    return kExitUsage;
  } catch (const NotFoundError& e) {
    diagnose(err, "config-not-found", e.what());
    return kExitConfigNotFound;
  } catch (const SchemaError& e) {
    diagnose(err, "schema", e.what());
    return kExitSchema;
  } catch (const ConfigError& e) {
    diagnose(err, "invalid-config", e.what());
    return kExitInvalidConfig;
  } catch (const OutputError& e) {
    diagnose(err, "output", e.what());
    return kExitOutput;
  } catch (const NumericalError& e) {
    diagnose(err, "numerical", e.what());
    return kExitNumerical;
  } catch (const AssumptionViolation& e) {
    diagnose(err, "validation", e.what());
    return kExitValidation;
  } catch (const DomainError& e) {
    diagnose(err, "invalid-config", e.what());
    return kExitInvalidConfig;
  } catch (const std::exception& e) {
    diagnose(err, "internal", e.what());
    return kExitInternal;
  }
}

}  // namespace etso
