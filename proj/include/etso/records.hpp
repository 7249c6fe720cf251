#pragma once

#include "etso/bench_runner.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace etso {

inline constexpr const char* kRecordsSchema = "etso-records/1";
inline constexpr const char* kSummarySchema = "etso-summary/1";
inline constexpr const char* kCurveSchema = "etso-curve/1";
inline constexpr const char* kEventsSchema = "etso-events/1";

/// Records file: UTF-8, LF line endings. Line 1 is a header object
///   {"schema": "etso-records/1", "run_config": {...}, "scenario": {...}}
/// followed by one record per line with fields in this order:
///   scenario, policy, seed, round, t_prime, theta, noisy_cost, true_cost, crashed, reset,
///   backup_requery, mode, normalized_performance, safe_set_size, j_min, in_safe_set
struct RecordsFile {
  nlohmann::ordered_json header;
  std::vector<ExperimentRecord> records;
};

nlohmann::ordered_json record_to_json(const ExperimentRecord& r);
ExperimentRecord record_from_json(const nlohmann::json& j);

nlohmann::ordered_json records_header(const MatrixResult& result);
void write_records(std::ostream& out, const nlohmann::ordered_json& header,
                   const std::vector<ExperimentRecord>& records);
/// Throws SchemaError on a missing/foreign header, malformed lines or an empty file.
RecordsFile read_records(std::istream& in);
RecordsFile read_records_file(const std::string& path);

/// Summary table, comma separated, first line "# schema=etso-summary/1". One row per
/// (scenario, policy, round); run-level totals are repeated on every row of the group.
void write_summary(std::ostream& out, const std::vector<PolicySummary>& summaries);

/// Plot-ready files for one scenario.
///   curve:  round, then <policy>_mean, <policy>_std per policy
///   events: policy, seed, round, event (reset | crash)
void write_curve(std::ostream& out, const std::vector<PolicySummary>& summaries);
void write_events(std::ostream& out, const std::vector<ExperimentRecord>& records);

}  // namespace etso
