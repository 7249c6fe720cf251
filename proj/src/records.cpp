#include "etso/records.hpp"

#include "etso/errors.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace etso {
namespace {

using ojson = nlohmann::ordered_json;

std::string number(double v) {
  // Shortest round-trip form, identical to what the JSON writer emits.
  return ojson(v).dump();
}

}  // namespace

ojson record_to_json(const ExperimentRecord& r) {
  ojson j;
  j["scenario"] = r.scenario;
  j["policy"] = std::string(to_string(r.policy));
  j["seed"] = r.seed;
  j["round"] = r.round;
  j["t_prime"] = r.t_prime;
  j["theta"] = r.theta;
  j["noisy_cost"] = r.noisy_cost;
  j["true_cost"] = r.true_cost;
  j["crashed"] = r.crashed;
  j["reset"] = r.reset;
  j["backup_requery"] = r.backup_requery;
  j["mode"] = r.mode;
  j["normalized_performance"] = r.normalized_performance;
  j["safe_set_size"] = r.safe_set_size;
  j["j_min"] = r.j_min;
  j["in_safe_set"] = r.in_safe_set;
  return j;
}

ExperimentRecord record_from_json(const nlohmann::json& j) {
  try {
    ExperimentRecord r;
    r.scenario = j.at("scenario").get<std::string>();
    r.policy = parse_policy(j.at("policy").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.round = j.at("round").get<int>();
    r.t_prime = j.at("t_prime").get<int>();
    r.theta = j.at("theta").get<std::vector<double>>();
    r.noisy_cost = j.at("noisy_cost").get<double>();
    r.true_cost = j.at("true_cost").get<double>();
    r.crashed = j.at("crashed").get<bool>();
    r.reset = j.at("reset").get<bool>();
    r.backup_requery = j.at("backup_requery").get<bool>();
    r.mode = j.at("mode").get<std::size_t>();
    r.normalized_performance = j.at("normalized_performance").get<double>();
    r.safe_set_size = j.at("safe_set_size").get<std::size_t>();
    r.j_min = j.at("j_min").get<double>();
    r.in_safe_set = j.at("in_safe_set").get<bool>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("record: ") + e.what());
  } catch (const ConfigError& e) {
    throw SchemaError(std::string("record: ") + e.what());
  }
}

ojson records_header(const MatrixResult& result) {
  ojson h;
  h["schema"] = kRecordsSchema;
  h["run_config"] = result.config.to_json();
  h["scenario"] = ojson::parse(result.scenario.document.dump());
  return h;
}

void write_records(std::ostream& out, const ojson& header, const std::vector<ExperimentRecord>& records) {
  out << header.dump() << '\n';
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

RecordsFile read_records(std::istream& in) {
  RecordsFile file;
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw SchemaError("records: file is empty");
  try {
    file.header = ojson::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("records header: ") + e.what());
  }
  if (!file.header.is_object() || file.header.value("schema", "") != kRecordsSchema) {
    throw SchemaError(std::string("records: header schema is not '") + kRecordsSchema + "'");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError("records line " + std::to_string(line_no) + ": " + e.what());
    }
    if (j.contains("schema")) {
      throw SchemaError("records line " + std::to_string(line_no) + ": second header (mixed files)");
    }
    file.records.push_back(record_from_json(j));
  }
  if (file.records.empty()) throw SchemaError("records: file holds no records");
  return file;
}

RecordsFile read_records_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open records file '" + path + "'");
  return read_records(in);
}

void write_summary(std::ostream& out, const std::vector<PolicySummary>& summaries) {
  out << "# schema=" << kSummarySchema << '\n';
  out << "scenario,policy,round,runs,mean_performance,std_performance,crashes,resets,"
         "final10_mean,total_crashes,crashed_runs,total_resets\n";
  for (const auto& s : summaries) {
    for (std::size_t t = 0; t < s.mean.size(); ++t) {
      out << s.scenario << ',' << to_string(s.policy) << ',' << t << ',' << s.runs << ','
          << number(s.mean[t]) << ',' << number(s.std[t]) << ',' << s.crashes[t] << ','
          << s.resets[t] << ',' << number(s.final_mean) << ',' << s.total_crashes << ','
          << s.crashed_runs << ',' << s.total_resets << '\n';
    }
  }
}

void write_curve(std::ostream& out, const std::vector<PolicySummary>& summaries) {
  out << "# schema=" << kCurveSchema << '\n';
  out << "round";
  std::size_t rounds = 0;
  for (const auto& s : summaries) {
    out << ',' << to_string(s.policy) << "_mean," << to_string(s.policy) << "_std";
    rounds = std::max(rounds, s.mean.size());
  }
  out << '\n';
  for (std::size_t t = 0; t < rounds; ++t) {
    out << t;
    for (const auto& s : summaries) {
      if (t < s.mean.size()) {
        out << ',' << number(s.mean[t]) << ',' << number(s.std[t]);
      } else {
        out << ",,";
      }
    }
    out << '\n';
  }
}

void write_events(std::ostream& out, const std::vector<ExperimentRecord>& records) {
  out << "# schema=" << kEventsSchema << '\n';
  out << "policy,seed,round,event\n";
  for (const auto& r : records) {
    if (r.reset) out << to_string(r.policy) << ',' << r.seed << ',' << r.round << ",reset\n";
    if (r.crashed) out << to_string(r.policy) << ',' << r.seed << ',' << r.round << ",crash\n";
  }
}

}  // namespace etso
