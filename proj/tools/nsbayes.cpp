// nsbayes: batch experiments for Bayesian data assimilation in periodic 2D Navier-Stokes.

#include <iostream>

#include "CLI11.hpp"
#include "nsbayes/harness.hpp"

namespace hs = nsbayes::harness;

int main(int argc, char** argv) {
  CLI::App app{"Bayesian data assimilation for periodic 2D Navier-Stokes"};
  app.set_version_flag("--version", hs::version());
  app.require_subcommand(1);

  std::string config_path, resume_path, out = "out";
  std::uint64_t seed = 0;
  int workers = 0;
  bool quiet = false;

  const std::vector<std::pair<std::string, std::string>> descriptions{
      {"forward", "solve the forward problem and tabulate norms"},
      {"operator-tests", "run the operator identity checks"},
      {"assimilate", "sample one posterior with pCN"},
      {"bvm", "posterior contraction, band radius and limit-process distance along an N ladder"},
      {"coverage", "credible band coverage over replicate data sets"}};
  for (const auto& [name, text] : descriptions) {
    auto* sub = app.add_subcommand(name, text);
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "master seed (overrides the config's seed)");
    sub->add_option("--workers", workers, "worker threads (default: OpenMP default)")->check(CLI::NonNegativeNumber);
    sub->add_option("--out", out, "output root")->capture_default_str();
    sub->add_option("--resume", resume_path, "run directory or manifest to resume");
    sub->add_flag("--quiet", quiet, "no progress output");
  }
  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  auto* sub = app.get_subcommands().front();
  hs::RunOptions options;
  options.out_root = out;
  options.seed = seed;
  options.seed_given = sub->count("--seed") > 0;
  options.workers = workers;
  options.quiet = quiet;

  try {
    hs::RunReport report;
    if (!resume_path.empty()) {
      if (!config_path.empty()) throw hs::ConfigError("$", "--config and --resume are exclusive");
      report = hs::resume_run(resume_path, options, command);
    } else {
      if (config_path.empty()) throw hs::ConfigError("$", "--config is required");
      report = hs::run_command(command, hs::load_config(config_path), options);
    }
    for (const auto& r : report.rows) {
      std::cout << (r.asserted ? (r.pass ? "PASS " : "FAIL ") : "     ") << r.name << " = " << r.value;
      if (r.comparator == "in")
        std::cout << "  (in [" << r.lower << ", " << r.upper << "])";
      else if (r.comparator != "report")
        std::cout << "  (" << r.comparator << " " << r.lower << ")";
      std::cout << "\n";
    }
    std::cout << "run " << report.run_id << (report.ok() ? " ok" : " FAILED") << "\n";
    return report.ok() ? 0 : 1;
  } catch (const hs::ConfigError& e) {
    std::cerr << "config error at " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
