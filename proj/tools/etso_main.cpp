// etso: run benchmark matrices, summarize record files, export plot data.
#include "etso/commands.hpp"
#include "etso/errors.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using etso::CliInvocation;

  CLI::App app{"Event-triggered safe Bayesian optimization benchmarks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "etso 0.1.0");

  CliInvocation inv;
  std::string seeds = "1";
  std::string policies = "etso";
  int verbose = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--set", inv.overrides, "Override a scenario setting, key=value (repeatable)");
    sub->add_flag("-v,--verbose", verbose, "More output");
  };

  CLI::App* run = app.add_subcommand("run", "Run a (policy x seed) matrix on one scenario");
  run->add_option("--config", inv.config, "Scenario id or path to a scenario file")->required();
  run->add_option("--policy", policies, "Policy list: etso, safeopt, safeopt-inf, backup or all");
  run->add_option("--seeds", seeds, "Seeds, e.g. 1..20 or 1,2,7");
  run->add_option("--output", inv.output, "Records file (summary is written next to it)");
  run->add_option("--horizon", inv.horizon, "Round budget T");
  run->add_option("--learn-rounds", inv.learn_rounds, "Learning rounds T_L");
  run->add_flag("--free-backup-requery", inv.free_backup_requery,
                "Do not charge the post-trigger backup flight to the round budget");
  run->add_option("--threads", inv.threads, "Worker threads (0: all cores)");
  add_common(run);

  CLI::App* summarize = app.add_subcommand("summarize", "Summarize records files into a table");
  summarize->add_option("inputs", inv.inputs, "Records files")->required();
  summarize->add_option("--output", inv.output, "Summary file (default: standard output)");
  summarize->add_flag("-v,--verbose", verbose, "More output");

  CLI::App* exporter = app.add_subcommand("export-plot-data", "Write curve and event files per scenario");
  exporter->add_option("inputs", inv.inputs, "Records files")->required();
  exporter->add_option("--output", inv.output, "Output directory");
  exporter->add_flag("-v,--verbose", verbose, "More output");

  CLI::App* validate = app.add_subcommand("validate-scenario", "Run the pre-run oracle checks");
  validate->add_option("--config", inv.config, "Scenario id, path, or 'all'")->required();
  add_common(validate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "etso: error[usage]: " << e.what() << '\n';
    return etso::kExitUsage;
  }
  inv.verbosity = verbose;

  if (app.got_subcommand(run)) {
    inv.command = CliInvocation::Command::Run;
    try {
      inv.seeds = etso::parse_seed_list(seeds);
      inv.policies = etso::parse_policy_list(policies);
    } catch (const etso::Error& e) {
      std::cerr << "etso: error[invalid-config]: " << e.what() << '\n';
      return etso::kExitInvalidConfig;
    }
  } else if (app.got_subcommand(summarize)) {
    inv.command = CliInvocation::Command::Summarize;
  } else if (app.got_subcommand(exporter)) {
    inv.command = CliInvocation::Command::ExportPlotData;
  } else {
    inv.command = CliInvocation::Command::ValidateScenario;
  }
  return etso::execute(inv, std::cout, std::cerr);
}
