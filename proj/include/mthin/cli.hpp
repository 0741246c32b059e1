#pragma once

#include "mthin/criteria.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mthin::cli {

using Json = nlohmann::json;

/// A parsed config: named declarations plus jobs with every default filled in.
struct RunConfig {
  std::map<std::string, Json> processes;
  std::map<std::string, Json> domains;
  std::map<std::string, Json> sets;
  std::vector<Json> jobs;
  std::string output_dir = "out";
  bool timestamp = true;
};

/// Throws InputError with a line/field diagnostic on malformed input.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const Json& root);

ScalingProfile make_profile(const Json& decl);
DomainDescriptor make_domain(const Json& decl);
GraphFunction make_graph(const Json& decl);
SetDescriptor make_set(const Json& decl, const DomainDescriptor& domain);
/// Cubes selected by a whitney_subfamily declaration.
std::vector<WhitneyCube> whitney_selection(const Json& decl, const DomainDescriptor& domain);

Json to_json(const EnergyResult& r);
Json to_json(const CriterionReport& r);
Json to_json(const ScalingCertificate& c);
Json to_json(const QuasiAdditivityReport& r);

struct RunOptions {
  std::optional<std::string> output_dir;
  std::set<std::string> commands;  // empty: every command
  std::optional<std::string> job;
  bool consistency = false;
  std::optional<bool> timestamp;
};

struct JobOutcome {
  std::string name;
  std::string command;
  int exit_code = 0;
  std::string message;
  std::vector<std::string> files;
  Json report;
};

/// Runs the selected jobs concurrently and writes one JSON report (plus CSV
/// where relevant) per job. Job failures are captured in the outcomes.
std::vector<JobOutcome> run_jobs(const RunConfig& config, const RunOptions& options);

/// Agreement lines for criterion jobs sharing set, mode and test point.
std::vector<std::string> consistency_lines(const std::vector<JobOutcome>& outcomes);

/// First nonzero job exit code in config order, or 0.
int exit_code(const std::vector<JobOutcome>& outcomes);

/// Writes through a temporary file and a rename.
void write_atomic(const std::string& path, const std::string& content);

/// JSON text without the "generated_at" field, for reproducibility checks.
std::string strip_timestamp(const std::string& json_text);

}  // namespace mthin::cli
