// Acceptance criteria: one PASS/FAIL line each.
//
// Criteria 1-9 run live from configs/. Criteria 10-12 are long experiments:
// by default their persisted reports (results/{run-id}/report.json, located by
// the deterministic run id of the current config) are read back; with
// --scheduled they are run live.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nsbayes/harness.hpp"
#include "nsbayes/io.hpp"

#ifndef NSBAYES_CONFIG_DIR
#define NSBAYES_CONFIG_DIR "configs"
#endif
#ifndef NSBAYES_RESULTS_DIR
#define NSBAYES_RESULTS_DIR "results"
#endif

namespace hs = nsbayes::harness;
using hs::json;

namespace {

struct Row {
  std::string name;
  double value = 0.0;
  bool pass = false;
  double seconds = 0.0;
  std::string bound;
};

using Report = std::vector<Row>;

std::string bound_text(const json& r) {
  const auto op = r.at("comparator").get<std::string>();
  if (op == "in") {
    const auto t = r.at("tolerance");
    return "in [" + hs::fmt_number(t[0].get<double>()) + ", " + hs::fmt_number(t[1].get<double>()) + "]";
  }
  if (op == "report") return "";
  return op + " " + hs::fmt_number(r.at("tolerance").get<double>());
}

Report rows_of(const json& report) {
  Report out;
  for (const auto& r : report.at("rows"))
    out.push_back({r.at("name").get<std::string>(), r.at("value").get<double>(), r.at("pass").get<bool>(),
                   r.at("seconds").get<double>(), bound_text(r)});
  return out;
}

const Row* find(const Report& rep, const std::string& name) {
  for (const auto& r : rep)
    if (r.name == name) return &r;
  return nullptr;
}

struct Source {
  std::optional<Report> report;
  std::string origin;  // "live", "persisted <run-id>", or why it is missing
};

Source run_live(const std::string& command, const std::string& config_file, const hs::RunOptions& options) {
  const json config = hs::load_config(std::string(NSBAYES_CONFIG_DIR) + "/" + config_file);
  const auto report = hs::run_command(command, config, options);
  return {rows_of(report.to_json()), "live"};
}

Source persisted(const std::string& command, const std::string& config_file) {
  json config = hs::load_config(std::string(NSBAYES_CONFIG_DIR) + "/" + config_file);
  const std::uint64_t seed = config.value("seed", std::uint64_t(0));
  config.erase("seed");
  const auto id = hs::run_id(command, config, seed);
  const auto path = hs::fs::path(NSBAYES_RESULTS_DIR) / id / "report.json";
  if (!hs::fs::exists(path)) return {std::nullopt, "no persisted report " + id};
  return {rows_of(nsbayes::io::read_json(path)), "persisted " + id};
}

int failures = 0;

void line(int id, const std::string& title, const std::vector<std::pair<const Source*, std::string>>& needed,
          double limit_s, const std::string& extra = {}) {
  bool pass = true, missing = false;
  std::map<const Source*, double> per_source;  // rows of one run share its check time; runs add up
  std::string detail, origin;
  for (const auto& [src, name] : needed) {
    if (!src->report) {
      missing = true;
      if (origin.find(src->origin) == std::string::npos) origin += (origin.empty() ? "" : ", ") + src->origin;
      continue;
    }
    const Row* r = find(*src->report, name);
    if (!r) {
      missing = true;
      origin = "row " + name + " absent";
      continue;
    }
    pass = pass && r->pass;
    per_source[src] = std::max(per_source[src], r->seconds);
    detail += (detail.empty() ? "" : "; ") + name + " " + hs::fmt_number(r->value) + " " + r->bound;
    if (origin.find(src->origin) == std::string::npos) origin += (origin.empty() ? "" : ", ") + src->origin;
  }
  double seconds = 0.0;
  for (const auto& [src, s] : per_source) seconds += s;
  const bool in_time = seconds < limit_s;
  const char* verdict = missing ? "MISSING" : (pass && in_time ? "PASS" : "FAIL");
  if (!missing && !(pass && in_time)) ++failures;
  std::printf("%-7s %2d  %-36s %s%s | %.1f s (limit %.0f s) | %s\n", verdict, id, title.c_str(), detail.c_str(),
              extra.c_str(), seconds, limit_s, origin.c_str());
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  bool scheduled = false;
  std::string out = "acceptance_out";
  app.add_flag("--scheduled", scheduled, "run criteria 10-12 live instead of reading persisted reports");
  app.add_option("--out", out, "output root for live runs");
  CLI11_PARSE(app, argc, argv);

  hs::RunOptions options;
  options.out_root = out;
  options.quiet = true;

  const Source ops = run_live("operator-tests", "operator_tests.json", options);
  const Source fwd = run_live("forward", "forward_taylor_green.json", options);
  const Source conj = run_live("assimilate", "assimilate_conjugate.json", options);
  const Source prior = run_live("assimilate", "assimilate_prior.json", options);

  line(1, "bilinear identities", {{&ops, "B_skew_identity"}, {&ops, "B_enstrophy_identity"}}, 5);
  line(2, "heat-operator identity", {{&ops, "heat_LstarL_identity"}}, 1);
  line(3, "Taylor-Green forward accuracy", {{&fwd, "tg_rel_err"}}, 30);
  line(4, "linearisation quadratic remainder", {{&ops, "linearization_slope"}}, 120);
  line(5, "discrete adjoint test", {{&ops, "adjoint_test"}}, 10);
  line(6, "information operator SPD, heat spectrum",
       {{&ops, "gram_heat_min_eigenvalue"}, {&ops, "gram_heat_diag_defect"}, {&ops, "gram_min_eigenvalue"}}, 120);
  line(7, "Fredholm remainder smoothing", {{&ops, "fredholm_ratio_decreasing"}, {&ops, "fredholm_complete_bands"}}, 300);
  line(8, "conjugate-Gaussian MCMC oracle", {{&conj, "conjugate_mean_match"}}, 600);
  line(9, "pCN prior invariance", {{&prior, "prior_variance_match"}}, 300);

  const Source bvm = scheduled ? run_live("bvm", "bvm.json", options) : persisted("bvm", "bvm.json");
  const Source cov = scheduled ? run_live("coverage", "coverage.json", options) : persisted("coverage", "coverage.json");
  std::string slope;
  if (bvm.report)
    if (const Row* r = find(*bvm.report, "contraction_slope")) slope = "; contraction_slope " + hs::fmt_number(r->value);
  line(10, "contraction trend", {{&bvm, "contraction_monotone"}}, 7200, slope);
  line(11, "credible-band behaviour", {{&cov, "coverage"}, {&bvm, "sqrtN_RN_ratio"}}, 14400);
  line(12, "BvM proximity trend", {{&bvm, "w1_trend_monotone"}}, 14400);

  std::printf("%s: %d failing criteria\n", failures ? "FAILED" : "OK", failures);
  return failures ? 1 : 0;
}
