#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "filmlab/lab.hpp"

namespace filmlab {

using Json = nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;
  Json raw;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  int threads = 1;
  bool verbose = false;
};

struct RunReport {
  Json summary;  // includes a "config" echo in every written summary
  std::vector<std::pair<std::string, bool>> invariants;
  int exit_code = 0;
  std::vector<std::string> written_files;
  double elapsed_seconds = 0.0;  // reported on stdout only, files stay seed-deterministic
};

/// Parses and schema-checks a config document (throws ConfigError).
RunConfig parse_config(const Json& doc);

/// Dispatches a parsed config; writes outputs atomically under out_dir.
/// Exit code 0 on success, 1 on invariant failure, 2 on schema violation,
/// 3 on numerical non-convergence.
RunReport run(const RunConfig& config);

Json operator_to_json(const DifferentialOperator& op);
DifferentialOperator operator_from_json(const Json& doc);
DensityPtr density_from_json(const Json& doc, const DifferentialOperator& op);

/// Deterministic double formatting used in every CSV cell ("%.17g").
std::string format_double(double v);

/// Writes content via a temp file and rename.
void atomic_write(const std::string& path, const std::string& content);

void save_field(const std::string& path, const PeriodicField& f);
PeriodicField load_field(const std::string& path);
/// CSV slice dump for plotting: one row per node, coordinates then components.
std::string field_to_csv(const PeriodicField& f);

void save_envelope_table(const std::string& path, const ConvexEnvelopeTable& table);
ConvexEnvelopeTable load_envelope_table(const std::string& path);

}  // namespace filmlab
