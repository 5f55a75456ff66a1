#include "nsbayes/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "nsbayes/io.hpp"
#include "nsbayes/kernels.hpp"
#include "nsbayes/rng.hpp"

#ifndef NSBAYES_VERSION
#define NSBAYES_VERSION "unknown"
#endif

namespace nsbayes::harness {

namespace {

const char* type_name(const json& j) {
  if (j.is_number()) return "number";
  if (j.is_boolean()) return "boolean";
  if (j.is_string()) return "string";
  if (j.is_array()) return "array";
  if (j.is_object()) return "object";
  return "null";
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

bool compare(double v, const std::string& op, double lo, double hi) {
  if (std::isnan(v)) return false;
  if (op == "<") return v < lo;
  if (op == "<=") return v <= lo;
  if (op == ">") return v > lo;
  if (op == ">=") return v >= lo;
  if (op == "==") return v == lo;
  if (op == "in") return v >= lo && v <= hi;
  throw std::invalid_argument("unknown comparator '" + op + "'");
}

}  // namespace

ConfigReader::ConfigReader(const json& object, std::string path) : object_(object), path_(std::move(path)) {
  if (!object_.is_object()) throw ConfigError(path_, std::string("expected object, got ") + type_name(object_));
}

bool ConfigReader::has(const std::string& key) const { return object_.contains(key); }

const json& ConfigReader::get(const std::string& key, bool required) {
  static const json null_value;
  seen_.insert(key);
  auto it = object_.find(key);
  if (it == object_.end()) {
    if (required) throw ConfigError(child(key), "missing required field");
    return null_value;
  }
  return *it;
}

double ConfigReader::number(const std::string& key) {
  const auto& j = get(key, true);
  if (!j.is_number()) throw ConfigError(child(key), std::string("expected number, got ") + type_name(j));
  return j.get<double>();
}

double ConfigReader::number(const std::string& key, double fallback) { return has(key) ? number(key) : (seen_.insert(key), fallback); }

std::int64_t ConfigReader::integer(const std::string& key) {
  const auto& j = get(key, true);
  if (!j.is_number_integer()) throw ConfigError(child(key), std::string("expected integer, got ") + type_name(j));
  return j.get<std::int64_t>();
}

std::int64_t ConfigReader::integer(const std::string& key, std::int64_t fallback) {
  return has(key) ? integer(key) : (seen_.insert(key), fallback);
}

std::uint64_t ConfigReader::unsigned_integer(const std::string& key, std::uint64_t fallback) {
  if (!has(key)) {
    seen_.insert(key);
    return fallback;
  }
  const auto& j = get(key, true);
  if (!j.is_number_unsigned()) throw ConfigError(child(key), "expected non-negative integer");
  return j.get<std::uint64_t>();
}

bool ConfigReader::boolean(const std::string& key, bool fallback) {
  if (!has(key)) {
    seen_.insert(key);
    return fallback;
  }
  const auto& j = get(key, true);
  if (!j.is_boolean()) throw ConfigError(child(key), std::string("expected boolean, got ") + type_name(j));
  return j.get<bool>();
}

std::string ConfigReader::string(const std::string& key) {
  const auto& j = get(key, true);
  if (!j.is_string()) throw ConfigError(child(key), std::string("expected string, got ") + type_name(j));
  return j.get<std::string>();
}

std::string ConfigReader::string(const std::string& key, const std::string& fallback) {
  return has(key) ? string(key) : (seen_.insert(key), fallback);
}

std::vector<double> ConfigReader::numbers(const std::string& key) {
  const auto& j = get(key, true);
  if (!j.is_array()) throw ConfigError(child(key), std::string("expected array, got ") + type_name(j));
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw ConfigError(child(key) + "[" + std::to_string(i) + "]", std::string("expected number, got ") + type_name(j[i]));
    out.push_back(j[i].get<double>());
  }
  return out;
}

std::vector<double> ConfigReader::numbers(const std::string& key, std::vector<double> fallback) {
  return has(key) ? numbers(key) : (seen_.insert(key), std::move(fallback));
}

ConfigReader ConfigReader::section(const std::string& key) { return ConfigReader(get(key, true), child(key)); }

ConfigReader ConfigReader::optional_section(const std::string& key) {
  if (!has(key)) {
    seen_.insert(key);
    return ConfigReader(json::object(), child(key));
  }
  return section(key);
}

void ConfigReader::finish() const {
  for (const auto& [key, value] : object_.items())
    if (!seen_.count(key)) throw ConfigError(child(key), "unknown key");
}

json ReportRow::to_json() const {
  json j{{"name", name}, {"value", value}, {"comparator", comparator}, {"asserted", asserted}, {"pass", pass},
         {"provenance", provenance}, {"seconds", seconds}};
  if (comparator == "in")
    j["tolerance"] = json::array({lower, upper});
  else if (comparator != "report")
    j["tolerance"] = lower;
  if (!note.empty()) j["note"] = note;
  return j;
}

ReportRow reported(std::string name, double value, std::string provenance, std::string note) {
  ReportRow r;
  r.name = std::move(name);
  r.value = value;
  r.provenance = std::move(provenance);
  r.note = std::move(note);
  return r;
}

ReportRow asserted(std::string name, double value, std::string comparator, double bound, std::string provenance) {
  ReportRow r;
  r.name = std::move(name);
  r.value = value;
  r.comparator = std::move(comparator);
  r.lower = bound;
  r.asserted = true;
  r.pass = compare(value, r.comparator, bound, bound);
  r.provenance = std::move(provenance);
  return r;
}

ReportRow asserted_in(std::string name, double value, double lower, double upper, std::string provenance) {
  ReportRow r;
  r.name = std::move(name);
  r.value = value;
  r.comparator = "in";
  r.lower = lower;
  r.upper = upper;
  r.asserted = true;
  r.pass = compare(value, "in", lower, upper);
  r.provenance = std::move(provenance);
  return r;
}

void RunReport::add(ReportRow row) {
  if (find(row.name)) throw std::logic_error("duplicate report row '" + row.name + "'");
  rows.push_back(std::move(row));
}

void RunReport::stamp(std::size_t first, double seconds) {
  for (std::size_t i = first; i < rows.size(); ++i) rows[i].seconds = seconds;
}

const ReportRow* RunReport::find(const std::string& name) const {
  for (const auto& r : rows)
    if (r.name == name) return &r;
  return nullptr;
}

bool RunReport::ok() const {
  for (const auto& r : rows)
    if (r.asserted && !r.pass) return false;
  return true;
}

json RunReport::to_json() const {
  json j{{"run_id", run_id}, {"command", command}, {"version", version}, {"config_hash", config_hash},
         {"seed", seed},     {"ok", ok()},         {"rows", json::array()}, {"artifacts", artifacts}};
  for (const auto& r : rows) j["rows"].push_back(r.to_json());
  return j;
}

void RunContext::log(const std::string& message) const {
  if (!quiet) std::cerr << "[nsbayes] " << message << std::endl;
}

void RunContext::open() const {
  for (const char* sub : {"tables", "plots", "artifacts"}) fs::create_directories(dir / sub);
  io::write_json(dir / "manifest.json", manifest);
  log(manifest.at("command").get<std::string>() + " -> " + dir.string());
}

std::string fmt_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"forward", "operator-tests", "assimilate", "bvm", "coverage"};
  return c;
}

std::string version() { return NSBAYES_VERSION; }

std::string config_hash(const json& config) {
  const std::string text = config.dump();  // nlohmann::json keeps object keys sorted
  Fnv1a h;
  h.mix(text.data(), text.size());
  return hex64(h.value());
}

std::string run_id(const std::string& command, const json& config, std::uint64_t seed) {
  Fnv1a h;
  const std::string text = command + "\n" + config.dump() + "\n" + std::to_string(seed);
  h.mix(text.data(), text.size());
  return command + "-" + hex64(splitmix64(h.value())).substr(0, 12);
}

json load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("$", "cannot open config file " + path.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("$", std::string("invalid JSON: ") + e.what());
  }
}

namespace {

using CommandFn = void (*)(ConfigReader&, const RunContext&, RunReport&);

CommandFn lookup(const std::string& command) {
  if (command == "forward") return cmd_forward;
  if (command == "operator-tests") return cmd_operator_tests;
  if (command == "assimilate") return cmd_assimilate;
  if (command == "bvm") return cmd_bvm;
  if (command == "coverage") return cmd_coverage;
  throw std::invalid_argument("unknown command '" + command + "'");
}

void write_rows_csv(const fs::path& path, const RunReport& report) {
  io::CsvWriter csv(path, {"name", "value", "comparator", "lower", "upper", "asserted", "pass"});
  for (const auto& r : report.rows)
    csv.row(std::vector<std::string>{r.name, io::format_double(r.value), r.comparator, io::format_double(r.lower),
                                     io::format_double(r.upper), r.asserted ? "1" : "0", r.pass ? "1" : "0"});
}

}  // namespace

RunReport run_command(const std::string& command, const json& config, const RunOptions& options) {
  const CommandFn fn = lookup(command);
  ConfigReader top(config);
  std::uint64_t seed = top.unsigned_integer("seed", 0);
  if (options.seed_given) seed = options.seed;
  json body = config;
  body.erase("seed");

  RunReport report;
  report.command = command;
  report.version = version();
  report.config_hash = config_hash(body);
  report.seed = seed;
  report.run_id = run_id(command, body, seed);

  RunContext ctx;
  ctx.dir = options.out_root / report.run_id;
  ctx.seed = seed;
  ctx.workers = options.workers;
  ctx.resume = options.resume;
  ctx.quiet = options.quiet;
  if (options.workers > 0) kernels::omp::set_threads(options.workers);

  ctx.manifest = json{{"command", command}, {"config", body}, {"seed", seed}, {"version", report.version}};

  ConfigReader cfg(body);
  fn(cfg, ctx, report);

  write_rows_csv(ctx.table("report.csv"), report);
  report.artifacts.insert(report.artifacts.begin(), "tables/report.csv");
  io::write_json(ctx.dir / "report.json", report.to_json());
  return report;
}

RunReport resume_run(const fs::path& run_dir_or_manifest, RunOptions options, const std::string& expected_command) {
  const fs::path manifest =
      fs::is_directory(run_dir_or_manifest) ? run_dir_or_manifest / "manifest.json" : run_dir_or_manifest;
  if (!fs::exists(manifest)) throw ConfigError("$", "no manifest at " + manifest.string());
  const json m = io::read_json(manifest);
  const auto command = m.at("command").get<std::string>();
  if (!expected_command.empty() && command != expected_command)
    throw ConfigError("$", "manifest records command '" + command + "', not '" + expected_command + "'");
  json config = m.at("config");
  const std::uint64_t seed = m.at("seed").get<std::uint64_t>();
  if (options.seed_given && options.seed != seed) throw ConfigError("$.seed", "--seed differs from the resumed run");
  options.seed = seed;
  options.seed_given = true;
  options.resume = true;
  options.out_root = manifest.parent_path().parent_path();
  if (options.out_root.empty()) options.out_root = ".";
  return run_command(command, config, options);
}

}  // namespace nsbayes::harness
