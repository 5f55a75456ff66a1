#pragma once

// Batch experiment driver behind the nsbayes CLI.
//
// A run reads a JSON config, executes one command and writes
//   out/{run-id}/report.json, manifest.json, tables/*.csv, plots/*.svg, artifacts/*
// The run id is derived from the command, the canonical config text and the
// master seed, so repeating a run rewrites the same directory.

#include <cstdint>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace nsbayes::harness {

using json = nlohmann::json;
namespace fs = std::filesystem;

/// Config schema violation; `path` names the offending field ("$.chain.n_iter").
class ConfigError : public std::runtime_error {
public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error(path + ": " + message), path(std::move(path)) {}
  std::string path;
};

/// Strict view of one JSON object: every key must be read before finish().
class ConfigReader {
public:
  explicit ConfigReader(const json& object, std::string path = "$");

  const std::string& path() const { return path_; }
  bool has(const std::string& key) const;

  double number(const std::string& key);
  double number(const std::string& key, double fallback);
  std::int64_t integer(const std::string& key);
  std::int64_t integer(const std::string& key, std::int64_t fallback);
  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback);
  bool boolean(const std::string& key, bool fallback);
  std::string string(const std::string& key);
  std::string string(const std::string& key, const std::string& fallback);
  std::vector<double> numbers(const std::string& key);
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback);
  /// Nested object; a missing optional section reads as {}.
  ConfigReader section(const std::string& key);
  ConfigReader optional_section(const std::string& key);

  /// Throws ConfigError naming the first key that was never read.
  void finish() const;

  std::string child(const std::string& key) const { return path_ + "." + key; }

private:
  const json& get(const std::string& key, bool required);

  json object_;
  std::string path_;
  std::set<std::string> seen_;
};

struct ReportRow {
  std::string name;
  double value = 0.0;
  /// "<", "<=", ">", ">=", "==", "in" (closed interval [lower, upper]) or "report" (not asserted).
  std::string comparator = "report";
  double lower = 0.0;  // bound for one-sided comparators, low end for "in"
  double upper = 0.0;
  bool asserted = false;
  bool pass = true;
  std::string provenance;  // module invariant the row instantiates
  double seconds = 0.0;    // wall time of the check that produced the row
  std::string note;

  json to_json() const;
};

ReportRow reported(std::string name, double value, std::string provenance, std::string note = {});
/// Asserted row; pass is evaluated from the comparator.
ReportRow asserted(std::string name, double value, std::string comparator, double bound, std::string provenance);
ReportRow asserted_in(std::string name, double value, double lower, double upper, std::string provenance);

struct RunReport {
  std::string run_id;
  std::string command;
  std::string version;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<ReportRow> rows;
  std::vector<std::string> artifacts;  // paths relative to the run directory

  /// Adds a row; names must be unique within a report.
  void add(ReportRow row);
  /// Sets `seconds` on every row added since `first`.
  void stamp(std::size_t first, double seconds);
  const ReportRow* find(const std::string& name) const;
  bool ok() const;
  json to_json() const;
};

struct RunOptions {
  fs::path out_root = "out";
  std::uint64_t seed = 0;
  bool seed_given = false;  // --seed overrides the config's "seed" key
  int workers = 0;          // 0: OpenMP default
  bool resume = false;      // reuse chain checkpoints in the run directory
  bool quiet = false;
};

/// Paths of one run's output tree.
struct RunContext {
  fs::path dir;
  std::uint64_t seed = 0;
  int workers = 0;
  bool resume = false;
  bool quiet = false;
  json manifest;

  /// Creates the output tree and writes manifest.json; commands call it once the config is validated.
  void open() const;
  fs::path table(const std::string& name) const { return dir / "tables" / name; }
  fs::path plot(const std::string& name) const { return dir / "plots" / name; }
  fs::path artifact(const std::string& name) const { return dir / "artifacts" / name; }
  /// Progress line on stderr unless quiet.
  void log(const std::string& message) const;
};

/// Four significant digits, for log lines and summaries.
std::string fmt_number(double v);

const std::vector<std::string>& commands();
std::string version();

/// Hex FNV-1a of the canonical (sorted-key) config text.
std::string config_hash(const json& config);
std::string run_id(const std::string& command, const json& config, std::uint64_t seed);

/// Validates, runs and persists; returns the report (also written to report.json).
RunReport run_command(const std::string& command, const json& config, const RunOptions& options);
/// Re-runs the command recorded in a run directory's manifest.json with resume enabled;
/// a non-empty `expected_command` must match the recorded one.
RunReport resume_run(const fs::path& run_dir_or_manifest, RunOptions options, const std::string& expected_command = {});

json load_config(const fs::path& path);

// Command bodies; `cfg` excludes the top-level "seed" key.
void cmd_forward(ConfigReader& cfg, const RunContext& ctx, RunReport& report);
void cmd_operator_tests(ConfigReader& cfg, const RunContext& ctx, RunReport& report);
void cmd_assimilate(ConfigReader& cfg, const RunContext& ctx, RunReport& report);
void cmd_bvm(ConfigReader& cfg, const RunContext& ctx, RunReport& report);
void cmd_coverage(ConfigReader& cfg, const RunContext& ctx, RunReport& report);

}  // namespace nsbayes::harness
