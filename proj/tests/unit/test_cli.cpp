#include "etso/commands.hpp"
#include "etso/errors.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace etso;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("etso-test-" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

int run(const CliInvocation& inv, std::string* err_text = nullptr) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = execute(inv, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

CliInvocation small_run(const fs::path& output) {
  CliInvocation inv;
  inv.command = CliInvocation::Command::Run;
  inv.config = "stationary-gp";
  inv.overrides = {"horizon=10", "learn_rounds=4"};
  inv.seeds = {1, 2};
  inv.policies = parse_policy_list("etso,backup");
  inv.output = output.string();
  return inv;
}

}  // namespace

TEST_CASE("seed and policy lists") {
  CHECK(parse_seed_list("1..3,7") == std::vector<std::uint64_t>{1, 2, 3, 7});
  CHECK(parse_seed_list(" 5 ") == std::vector<std::uint64_t>{5});
  CHECK_THROWS_AS(parse_seed_list("3..1"), ConfigError);
  CHECK_THROWS_AS(parse_seed_list("a"), ConfigError);
  CHECK_THROWS_AS(parse_seed_list(""), ConfigError);
  CHECK(parse_policy_list("all").size() == 4);
  CHECK(parse_policy_list("etso, safeopt-inf").size() == 2);
  CHECK_THROWS_AS(parse_policy_list("etso,nope"), ConfigError);
}

TEST_CASE("summary path") {
  CHECK(summary_path_for("out/ac40.records.jsonl") == "out/ac40.summary.csv");
  CHECK(summary_path_for("x.jsonl") == "x.summary.csv");
  CHECK(summary_path_for("x.txt") == "x.txt.summary.csv");
}

TEST_CASE("run, summarize and export round trip") {
  TempDir dir;
  const fs::path records = dir.path / "s.records.jsonl";
  REQUIRE(run(small_run(records)) == kExitOk);
  REQUIRE(fs::exists(records));
  REQUIRE(fs::exists(dir.path / "s.summary.csv"));

  CliInvocation sum;
  sum.command = CliInvocation::Command::Summarize;
  sum.inputs = {records.string()};
  sum.output = (dir.path / "again.csv").string();
  REQUIRE(run(sum) == kExitOk);
  CHECK(slurp(dir.path / "again.csv") == slurp(dir.path / "s.summary.csv"));

  CliInvocation exp;
  exp.command = CliInvocation::Command::ExportPlotData;
  exp.inputs = {records.string()};
  exp.output = (dir.path / "plots").string();
  REQUIRE(run(exp) == kExitOk);
  const std::string curve = slurp(dir.path / "plots" / "stationary-gp.curve.csv");
  const std::string events = slurp(dir.path / "plots" / "stationary-gp.events.csv");
  CHECK(curve.rfind("# schema=etso-curve/1\nround,etso_mean,etso_std,backup_mean,backup_std\n", 0) == 0);
  CHECK(events.rfind("# schema=etso-events/1\n", 0) == 0);
  REQUIRE(run(exp) == kExitOk);
  CHECK(slurp(dir.path / "plots" / "stationary-gp.curve.csv") == curve);

  // Same run twice gives identical bytes.
  const fs::path second = dir.path / "t.records.jsonl";
  CliInvocation again = small_run(second);
  again.threads = 2;
  REQUIRE(run(again) == kExitOk);
  CHECK(slurp(records) == slurp(second));
}

TEST_CASE("error paths exit nonzero with one diagnostic line") {
  TempDir dir;
  std::string err;

  CliInvocation missing = small_run(dir.path / "x.jsonl");
  missing.config = "does-not-exist";
  CHECK(run(missing, &err) == kExitConfigNotFound);
  CHECK(err.rfind("etso: error[config-not-found]: ", 0) == 0);
  CHECK(std::count(err.begin(), err.end(), '\n') == 1);

  CliInvocation bad = small_run(dir.path / "x.jsonl");
  bad.overrides.push_back("epsilon=-2");
  CHECK(run(bad, &err) == kExitInvalidConfig);
  CHECK(err.rfind("etso: error[invalid-config]: ", 0) == 0);

  const fs::path junk = dir.path / "junk.jsonl";
  std::ofstream(junk) << "{\"schema\":\"etso-summary/1\"}\n";
  CliInvocation sum;
  sum.command = CliInvocation::Command::Summarize;
  sum.inputs = {junk.string()};
  CHECK(run(sum, &err) == kExitSchema);
  CHECK(err.rfind("etso: error[schema]: ", 0) == 0);

  sum.inputs = {(dir.path / "absent.jsonl").string()};
  CHECK(run(sum, &err) == kExitConfigNotFound);

  const fs::path blocker = dir.path / "file";
  std::ofstream(blocker) << "x";
  CHECK(run(small_run(blocker / "out.jsonl"), &err) == kExitOutput);
  CHECK(err.rfind("etso: error[output]: ", 0) == 0);

  CliInvocation val;
  val.command = CliInvocation::Command::ValidateScenario;
  val.config = "ac40";
  val.overrides = {"environment.critical_cost=-2"};
  CHECK(run(val, &err) == kExitValidation);
  CHECK(err.rfind("etso: error[validation]: ", 0) == 0);
}
