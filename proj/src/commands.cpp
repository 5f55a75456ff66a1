#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <optional>

#include "nsbayes/bayes.hpp"
#include "nsbayes/checks.hpp"
#include "nsbayes/harness.hpp"
#include "nsbayes/io.hpp"
#include "nsbayes/svg.hpp"

namespace nsbayes::harness {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }


// Driver-level streams hang off stream 0; replicate r uses stream r + 1.
std::uint64_t driver_seed(std::uint64_t master, std::uint64_t task) { return derive_seed(derive_seed(master, 0), task); }
std::uint64_t replicate_seed(std::uint64_t master, std::size_t r, std::uint64_t task) {
  return derive_seed(derive_seed(master, r + 1), task);
}

std::size_t read_count(ConfigReader& c, const std::string& key, std::optional<std::size_t> fallback, std::size_t min) {
  const std::int64_t v = fallback ? c.integer(key, std::int64_t(*fallback)) : c.integer(key);
  if (v < std::int64_t(min)) throw ConfigError(c.child(key), "must be at least " + std::to_string(min));
  return std::size_t(v);
}

BasisPtr read_basis(ConfigReader& cfg) {
  auto b = cfg.section("basis");
  const bool by_radius = b.has("radius"), by_modes = b.has("modes");
  if (by_radius == by_modes) throw ConfigError(b.path(), "give exactly one of 'radius' or 'modes'");
  BasisPtr basis;
  try {
    basis = by_radius ? Basis::with_radius(int(b.integer("radius"))) : Basis::with_modes(read_count(b, "modes", std::nullopt, 1));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(b.path(), e.what());
  }
  b.finish();
  return basis;
}

TimeScheme read_scheme(ConfigReader& cfg, const std::string& fallback) {
  try {
    return scheme_from_string(cfg.string("scheme", fallback));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(cfg.child("scheme"), e.what());
  }
}

ForwardConfig read_forward(ConfigReader& cfg, const BasisPtr& basis) {
  ForwardConfig fc;
  fc.basis = basis;
  fc.nu = cfg.number("nu");
  fc.T = cfg.number("T");
  fc.dt = cfg.number("dt");
  fc.scheme = read_scheme(cfg, "imex-cn");
  fc.n = int(cfg.integer("grid", 0));
  fc.advection = cfg.boolean("advection", true);
  fc.blowup_ceiling = cfg.number("blowup_ceiling", fc.blowup_ceiling);
  try {
    fc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(cfg.path(), e.what());
  }
  return fc;
}

// Initial conditions and forcings named in configs.
struct FieldSpec {
  std::string kind = "zero";
  double amplitude = 1.0;
  double alpha = 3.0;
  double sd1 = 1.0;  // standard deviation of the lowest mode
  std::optional<std::uint64_t> seed;
  std::string path;

  DivFreeCoeffs build(const BasisPtr& basis, std::uint64_t fallback_seed) const {
    if (kind == "zero") return DivFreeCoeffs(basis);
    if (kind == "taylor-green") return taylor_green(basis, amplitude);
    if (kind == "prior-draw") {
      RandomSource rng(seed.value_or(fallback_seed));
      return sample_gaussian_series({alpha, sd1 * std::pow(basis->pair(0).lambda, alpha / 2.0), basis}, rng);
    }
    auto u = fs::path(path).extension() == ".json" ? io::load_coeffs_json(path) : io::load_coeffs_binary(path);
    if (u.basis().modes() != basis->modes()) throw ConfigError("$", "field file " + path + " uses a different basis");
    return DivFreeCoeffs(basis, {u.data().begin(), u.data().end()});
  }
};

FieldSpec read_field(ConfigReader c) {
  FieldSpec s;
  s.kind = c.string("kind", "zero");
  if (s.kind == "taylor-green") {
    s.amplitude = c.number("amplitude", 1.0);
  } else if (s.kind == "prior-draw") {
    s.alpha = c.number("alpha");
    s.sd1 = c.number("sd1");
    if (c.has("seed")) s.seed = c.unsigned_integer("seed", 0);
  } else if (s.kind == "file") {
    s.path = c.string("path");
  } else if (s.kind != "zero") {
    throw ConfigError(c.child("kind"), "unknown field kind '" + s.kind + "' (zero, taylor-green, prior-draw, file)");
  }
  c.finish();
  return s;
}

// Gaussian prior; rho either given directly or as the lowest-mode scale,
// optionally shrunk with the sample size as N^{-1/(2 alpha + 2)}.
struct PriorSettings {
  double alpha = 3.0;
  std::optional<double> rho;
  double rho_scale = 1.0;
  bool couple_to_N = true;

  GaussianPriorSpec at(const BasisPtr& basis, std::size_t N) const {
    if (rho) return {alpha, *rho, basis};
    double r = rho_scale * std::pow(basis->pair(0).lambda, alpha / 2.0);
    if (couple_to_N && N > 0) r *= std::pow(double(N), -1.0 / (2.0 * alpha + 2.0));
    return {alpha, r, basis};
  }
};

PriorSettings read_prior(ConfigReader c) {
  PriorSettings p;
  p.alpha = c.number("alpha");
  if (!(p.alpha > 0.0)) throw ConfigError(c.child("alpha"), "must be positive");
  if (c.has("rho") && c.has("rho_scale")) throw ConfigError(c.path(), "give at most one of 'rho' or 'rho_scale'");
  if (c.has("rho")) {
    p.rho = c.number("rho");
    if (!(*p.rho > 0.0)) throw ConfigError(c.child("rho"), "must be positive");
  } else {
    p.rho_scale = c.number("rho_scale", 1.0);
    p.couple_to_N = c.boolean("couple_to_N", true);
    if (!(p.rho_scale > 0.0)) throw ConfigError(c.child("rho_scale"), "must be positive");
  }
  c.finish();
  return p;
}

PcnOptions read_chain(ConfigReader c) {
  PcnOptions o;
  o.n_iter = read_count(c, "n_iter", std::nullopt, 1);
  o.beta = c.number("beta", o.beta);
  o.burn_in_fraction = c.number("burn_in_fraction", o.burn_in_fraction);
  o.max_retained = read_count(c, "max_retained", o.max_retained, 1);
  o.checkpoint_every = read_count(c, "checkpoint_every", o.checkpoint_every, 0);
  o.target_acceptance = c.number("target_acceptance", 0.0);
  o.adapt_window = read_count(c, "adapt_window", o.adapt_window, 1);
  if (!(o.beta > 0.0 && o.beta <= 1.0)) throw ConfigError(c.child("beta"), "must lie in (0, 1]");
  if (!(o.burn_in_fraction >= 0.0 && o.burn_in_fraction < 1.0))
    throw ConfigError(c.child("burn_in_fraction"), "must lie in [0, 1)");
  if (!(o.target_acceptance >= 0.0 && o.target_acceptance < 1.0))
    throw ConfigError(c.child("target_acceptance"), "must lie in [0, 1)");
  c.finish();
  return o;
}

ProbeGrid read_window(ConfigReader c, double T) {
  ProbeGrid g;
  g.t_min = c.number("t_min", 0.1 * T);
  g.t_max = c.number("t_max", T);
  g.nt = int(c.integer("nt", g.nt));
  g.nx = int(c.integer("nx", g.nx));
  if (!(g.t_min > 0.0 && g.t_min <= g.t_max && g.t_max <= T))
    throw ConfigError(c.path(), "window must satisfy 0 < t_min <= t_max <= T");
  if (g.nt < 1 || g.nx < 1) throw ConfigError(c.path(), "nt and nx must be at least 1");
  c.finish();
  return g;
}

/// Batch-means standard error of the mean of an autocorrelated series.
double batch_se(const Eigen::VectorXd& x, int batches = 50) {
  const Eigen::Index n = x.size() / batches;
  if (n < 1) return std::numeric_limits<double>::infinity();
  Eigen::VectorXd means(batches);
  for (int k = 0; k < batches; ++k) means[k] = x.segment(k * n, n).mean();
  const double m = means.mean();
  return std::sqrt((means.array() - m).square().sum() / (batches - 1) / batches);
}

double median(std::vector<double> v) {
  const auto mid = v.begin() + std::ptrdiff_t(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]) / double(x.size());
    my += std::log(y[i]) / double(x.size());
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

/// Runs body(i) for every task on the worker pool, rethrowing the first failure.
template <class F>
void parallel_tasks(std::size_t count, F&& body) {
  std::vector<std::exception_ptr> errors(count);
  kernels::for_each_index(kernels::Exec::parallel, count, [&](std::size_t i, int) {
    try {
      body(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

// ---------------------------------------------------------------- forward

void cmd_forward(ConfigReader& cfg, const RunContext& ctx, RunReport& report) {
  const auto basis = read_basis(cfg);
  const auto fc = read_forward(cfg, basis);
  const auto theta_spec = read_field(cfg.section("theta0"));
  const auto force_spec = read_field(cfg.optional_section("forcing"));
  const bool save = cfg.boolean("save_trajectory", true);
  cfg.finish();
  ctx.open();

  const auto theta = theta_spec.build(basis, driver_seed(ctx.seed, 1));
  const auto f = force_spec.build(basis, driver_seed(ctx.seed, 2));
  const auto t0 = Clock::now();
  const auto traj = solve_ns(theta, f, fc);
  const double solve_s = seconds_since(t0);
  ctx.log("forward solve " + fmt_number(solve_s) + " s, " + std::to_string(traj.size()) + " nodes");

  io::write_norms_csv(ctx.table("norms.csv"), traj, f);
  report.artifacts.push_back("tables/norms.csv");
  if (save) {
    io::save_trajectory(ctx.artifact("trajectory.bin"), traj);
    report.artifacts.push_back("artifacts/trajectory.bin");
    report.artifacts.push_back("artifacts/trajectory.json");
  }

  const auto residuals = energy_residuals(traj, f);
  svg::Series l2{"L2", {}, {}}, h1{"H1", {}, {}};
  double max_l2 = 0.0, max_h1 = 0.0;
  for (std::size_t m = 0; m < traj.size(); ++m) {
    const double a = traj.state(m).l2_norm(), b = sobolev_norm(traj.state(m), 1.0);
    l2.x.push_back(traj.times()[m]);
    l2.y.push_back(a);
    h1.x.push_back(traj.times()[m]);
    h1.y.push_back(b);
    max_l2 = std::max(max_l2, a);
    max_h1 = std::max(max_h1, b);
  }
  svg::LinePlot{"solution norms", "t", "norm", false, false, {l2, h1}, {}}.write(ctx.plot("norms.svg"));
  report.artifacts.push_back("plots/norms.svg");

  const std::size_t first = report.rows.size();
  const bool zero_data = theta.is_zero() && f.is_zero();
  const double max_res = residuals.empty() ? 0.0 : *std::max_element(residuals.begin(), residuals.end());
  const std::vector<std::pair<std::string, double>> norms{{"initial_l2_norm", theta.l2_norm()},
                                                          {"final_l2_norm", traj.final_state().l2_norm()},
                                                          {"final_h1_norm", sobolev_norm(traj.final_state(), 1.0)},
                                                          {"max_l2_norm", max_l2},
                                                          {"max_h1_norm", max_h1}};
  for (const auto& [name, v] : norms)
    report.add(zero_data ? asserted(name, v, "==", 0.0, "zero data stays zero")
                         : reported(name, v, "solution norm"));
  report.add(zero_data ? asserted("max_energy_residual", max_res, "==", 0.0, "zero data stays zero")
                       : reported("max_energy_residual", max_res, "discrete energy balance per step"));

  if (theta_spec.kind == "taylor-green" && f.is_zero()) {
    auto exact = theta;
    exact *= std::exp(-8.0 * std::numbers::pi * std::numbers::pi * fc.nu * fc.T);
    const double err = (traj.final_state() - exact).l2_norm() / exact.l2_norm();
    report.add(asserted("tg_rel_err", err, "<", 1e-6, "Taylor-Green vortex decays as exp(-8 pi^2 nu t)"));
  }
  report.stamp(first, solve_s);
}

// ---------------------------------------------------------------- operator-tests

void cmd_operator_tests(ConfigReader& cfg, const RunContext& ctx, RunReport& report) {
  struct Flow {
    int radius;
    double nu, T, dt;
  };
  auto flow = [](ConfigReader& c, Flow d) {
    d.radius = int(c.integer("radius", d.radius));
    d.nu = c.number("nu", d.nu);
    d.T = c.number("T", d.T);
    d.dt = c.number("dt", d.dt);
    if (d.radius < 1 || !(d.nu > 0) || !(d.T > 0) || !(d.dt > 0 && d.dt <= d.T))
      throw ConfigError(c.path(), "need radius >= 1, nu > 0, T > 0 and 0 < dt <= T");
    return d;
  };

  auto bil = cfg.optional_section("bilinear");
  const int bil_radius = int(read_count(bil, "radius", 10, 1)), bil_fields = int(read_count(bil, "fields", 20, 1));
  bil.finish();
  auto heat = cfg.optional_section("heat_identity");
  const int heat_radius = int(read_count(heat, "radius", 16, 1)), heat_fields = int(read_count(heat, "fields", 10, 1));
  const double heat_nu = heat.number("nu", 0.1), heat_T = heat.number("T", 0.5);
  if (!(heat_nu > 0) || !(heat_T > 0)) throw ConfigError(heat.path(), "need nu > 0 and T > 0");
  heat.finish();
  auto lin = cfg.optional_section("linearization");
  const Flow lin_f = flow(lin, {6, 0.05, 0.3, 1e-3});
  const auto eps = lin.numbers("eps", {1e-1, 1e-2, 1e-3});
  if (eps.size() < 2) throw ConfigError(lin.child("eps"), "need at least two values");
  lin.finish();
  auto adj = cfg.optional_section("adjoint");
  const Flow adj_f = flow(adj, {6, 0.1, 0.2, 1e-3});
  const int adj_samples = int(read_count(adj, "samples", 11, 2)), adj_pairs = int(read_count(adj, "pairs", 10, 1));
  adj.finish();
  auto gram = cfg.optional_section("heat_gram");
  const Flow gram_f = flow(gram, {8, 0.1, 0.5, 1e-4});
  gram.finish();
  auto fred = cfg.optional_section("fredholm");
  const Flow fred_f = flow(fred, {8, 0.1, 0.2, 5e-4});
  checks::BackgroundSpec bg;
  {
    auto b = fred.optional_section("background");
    bg.kind = b.string("kind", bg.kind);
    bg.amplitude = b.number("amplitude", bg.amplitude);
    bg.decay = b.number("decay", bg.decay);
    bg.seed = b.unsigned_integer("seed", bg.seed);
    if (bg.kind != "zero" && bg.kind != "taylor-green" && bg.kind != "smooth-random")
      throw ConfigError(b.child("kind"), "unknown background '" + bg.kind + "' (zero, taylor-green, smooth-random)");
    b.finish();
  }
  fred.finish();
  cfg.finish();
  ctx.open();

  auto timed = [&](const std::string& label, auto&& body) {
    const std::size_t first = report.rows.size();
    const auto t0 = Clock::now();
    body();
    const double s = seconds_since(t0);
    report.stamp(first, s);
    ctx.log(label + " " + fmt_number(s) + " s");
  };

  timed("bilinear identities", [&] {
    const auto r = checks::bilinear_identities(bil_radius, bil_fields, driver_seed(ctx.seed, 1));
    report.add(asserted("B_skew_identity", r.skew, "<=", 1e-10, "<B[u,v],v> = 0"));
    report.add(asserted("B_enstrophy_identity", r.enstrophy, "<=", 1e-10, "<B[v,v],Av> = 0 on the 2D torus"));
  });
  timed("heat identity", [&] {
    const double r = checks::heat_identity_residual(heat_radius, heat_nu, heat_T, heat_fields,
                                                    driver_seed(ctx.seed, 2));
    report.add(asserted("heat_LstarL_identity", r, "<=", 1e-13, "Delta L*L = (S_2T - Id) / (2 nu)"));
  });
  timed("linearization remainder", [&] {
    const auto r = checks::linearization_remainder(lin_f.radius, lin_f.nu, lin_f.T, lin_f.dt, eps,
                                                   driver_seed(ctx.seed, 3));
    io::CsvWriter csv(ctx.table("linearization_remainder.csv"), {"eps", "remainder"});
    for (std::size_t i = 0; i < r.eps.size(); ++i) csv.row(std::vector<double>{r.eps[i], r.remainder[i]});
    report.artifacts.push_back("tables/linearization_remainder.csv");
    svg::LinePlot{"linearisation remainder", "eps", "sup_t remainder", true, true,
                  {{"remainder", r.eps, r.remainder, true}}, {}}
        .write(ctx.plot("linearization_remainder.svg"));
    report.artifacts.push_back("plots/linearization_remainder.svg");
    report.add(asserted_in("linearization_slope", r.slope, 1.9, 2.1, "remainder of the linearisation is quadratic"));
  });
  timed("adjoint test", [&] {
    const double d = checks::adjoint_defect(adj_f.radius, adj_f.nu, adj_f.T, adj_f.dt, adj_samples, adj_pairs,
                                            driver_seed(ctx.seed, 4));
    report.add(asserted("adjoint_test", d, "<=", 1e-12, "<Ph, w> = <h, P^T w>"));
  });
  timed("heat gram", [&] {
    const auto r = checks::heat_gram(gram_f.radius, gram_f.nu, gram_f.T, gram_f.dt);
    io::write_eigen_csv(ctx.table("heat_gram_eigenvalues.csv"), r.gram.eigenvalues());
    report.artifacts.push_back("tables/heat_gram_eigenvalues.csv");
    report.add(asserted("gram_heat_min_eigenvalue", r.min_eigenvalue, ">", 0.0, "information operator is SPD"));
    report.add(asserted("gram_heat_diag_defect", r.diag_defect, "<=", 1e-6,
                        "zero background: G_jj = (1 - exp(-2 nu lambda_j T)) / (2 nu lambda_j T)"));
    report.add(reported("gram_heat_offdiag", r.offdiag, "zero background: G is diagonal"));
  });
  timed("fredholm bands", [&] {
    const auto r = checks::fredholm_bands(fred_f.radius, fred_f.nu, fred_f.T, fred_f.dt, bg);
    const auto ev = r.gram.eigenvalues();
    io::write_eigen_csv(ctx.table("gram_eigenvalues.csv"), ev);
    io::CsvWriter csv(ctx.table("fredholm_bands.csv"), {"band", "dim", "remainder_norm", "heat_norm", "ratio", "complete"});
    svg::BarPlot bars{"remainder to heat ratio per dyadic band", "ratio", {}, {}, {}};
    for (const auto& d : r.bands) {
      csv.row(std::vector<double>{double(d.band), double(d.dim), d.remainder_norm, d.heat_norm, d.ratio(),
                                  d.complete ? 1.0 : 0.0});
      bars.labels.push_back("band " + std::to_string(d.band) + (d.complete ? "" : " (partial)"));
      bars.values.push_back(d.ratio());
      report.add(reported("fredholm_band" + std::to_string(d.band) + "_ratio", d.ratio(),
                          "|K| / |L*L| on 2^m <= |k| < 2^(m+1)", d.complete ? "" : "partial band at the truncation edge"));
    }
    bars.write(ctx.plot("fredholm_bands.svg"));
    std::vector<double> rank(std::size_t(ev.size())), vals(ev.data(), ev.data() + ev.size());
    for (std::size_t i = 0; i < rank.size(); ++i) rank[i] = double(i + 1);
    svg::LinePlot{"information operator spectrum", "rank", "eigenvalue", false, true, {{"eigenvalues", rank, vals, true}}, {}}
        .write(ctx.plot("gram_eigenvalues.svg"));
    for (const char* a : {"tables/gram_eigenvalues.csv", "tables/fredholm_bands.csv", "plots/fredholm_bands.svg",
                          "plots/gram_eigenvalues.svg"})
      report.artifacts.push_back(a);
    report.add(asserted("gram_min_eigenvalue", r.min_eigenvalue, ">", 0.0, "information operator is SPD"));
    report.add(asserted("fredholm_complete_bands", double(r.complete_bands), ">=", 3.0,
                        "band diagnostic covers at least three complete bands"));
    report.add(asserted("fredholm_ratio_decreasing", r.decreasing ? 1.0 : 0.0, "==", 1.0,
                        "remainder K is smoothing relative to L*L"));
  });
}

// ---------------------------------------------------------------- assimilate

void cmd_assimilate(ConfigReader& cfg, const RunContext& ctx, RunReport& report) {
  const auto basis = read_basis(cfg);
  const auto fc = read_forward(cfg, basis);
  const auto truth_spec = read_field(cfg.section("truth"));
  const auto force_spec = read_field(cfg.optional_section("forcing"));
  const auto prior_cfg = read_prior(cfg.section("prior"));
  auto obs = cfg.section("observations");
  const auto N = read_count(obs, "N", std::nullopt, 0);
  const double noise_sd = obs.number("noise_sd", 1.0);
  if (!(noise_sd >= 0.0)) throw ConfigError(obs.child("noise_sd"), "must be non-negative");
  obs.finish();
  auto options = read_chain(cfg.section("chain"));
  cfg.finish();
  ctx.open();

  const auto theta0 = truth_spec.build(basis, driver_seed(ctx.seed, 1));
  const auto f = force_spec.build(basis, driver_seed(ctx.seed, 2));
  const auto prior = prior_cfg.at(basis, N);
  RandomSource rng(replicate_seed(ctx.seed, 0, 1));
  ObservationSet data;
  data.T = fc.T;
  data.noise_sd = noise_sd;
  if (N > 0) data = generate_data(theta0, f, fc, N, noise_sd, rng, ctx.seed);
  io::save_observations(ctx.artifact("observations.csv"), data);
  report.artifacts.push_back("artifacts/observations.csv");

  options.checkpoint_path = ctx.artifact("chain.ckpt").string();
  options.resume = ctx.resume;
  const auto t0 = Clock::now();
  const auto chain = pcn_chain(data, prior, f, fc, options, rng);
  const double chain_s = seconds_since(t0);
  ctx.log("chain " + fmt_number(chain_s) + " s, acceptance " + fmt_number(chain.acceptance_rate_after_burn_in()));
  io::save_chain(ctx.artifact("chain.bin"), ctx.artifact("chain_manifest.json"), chain);
  for (const char* a : {"artifacts/chain.ckpt", "artifacts/chain.bin", "artifacts/chain_manifest.json"})
    report.artifacts.push_back(a);

  svg::Series trace{"log-likelihood", {}, {}};
  for (std::size_t i = 0; i < chain.loglik_trace.size(); i += std::max<std::size_t>(1, chain.loglik_trace.size() / 2000)) {
    trace.x.push_back(double(i + 1));
    trace.y.push_back(chain.loglik_trace[i]);
  }
  svg::LinePlot{"pCN trace", "iteration", "log-likelihood", false, false, {trace}, {}}.write(ctx.plot("trace.svg"));
  report.artifacts.push_back("plots/trace.svg");

  const std::size_t first = report.rows.size();
  const double acc = chain.acceptance_rate_after_burn_in();
  report.add(reported("acceptance_rate", acc, "pCN acceptance after burn-in"));
  report.add(reported("final_beta", chain.beta, "pCN step size after burn-in"));
  report.add(reported("retained_draws", double(chain.draws.size()), "chain length after burn-in and thinning"));
  const auto mean = posterior_mean(chain);
  report.add(reported("posterior_mean_l2_error", (mean - theta0).l2_norm(), "distance of the posterior mean to the truth"));

  const Eigen::MatrixXd X = chain.real_draws();
  const Eigen::Index J = X.cols();
  Eigen::VectorXd ref_mean = Eigen::VectorXd::Zero(J), ref_var(J);
  std::string reference = "prior";
  if (N == 0) {
    for (Eigen::Index j = 0; j < J; ++j) ref_var[j] = std::pow(prior.sd(std::size_t(j) / 2), 2);
  } else if (!fc.advection && f.is_zero()) {
    ObservationModel model(data, fc);
    const auto post = conjugate_posterior(linear_observation_matrix(model, fc), model.y(), noise_sd, prior);
    ref_mean = post.mean;
    ref_var = post.covariance.diagonal();
    reference = "conjugate";
  } else {
    reference.clear();
  }

  if (!reference.empty()) {
    io::CsvWriter csv(ctx.table("mode_summary.csv"),
                      {"coordinate", "chain_mean", "mean_se", "reference_mean", "chain_var", "var_se", "reference_var"});
    int mean_ok = 0, var_ok = 0;
    for (Eigen::Index j = 0; j < J; ++j) {
      const Eigen::VectorXd col = X.col(j);
      const Eigen::VectorXd sq = (col.array() - ref_mean[j]).square().matrix();
      const double se_m = batch_se(col), se_v = batch_se(sq);
      mean_ok += std::abs(col.mean() - ref_mean[j]) <= 3.0 * se_m;
      var_ok += std::abs(sq.mean() - ref_var[j]) <= 3.0 * se_v;
      csv.row(std::vector<double>{double(j), col.mean(), se_m, ref_mean[j], sq.mean(), se_v, ref_var[j]});
    }
    report.artifacts.push_back("tables/mode_summary.csv");
    const double fm = double(mean_ok) / double(J), fv = double(var_ok) / double(J);
    if (reference == "conjugate") {
      report.add(asserted("conjugate_mean_match", fm, ">=", 0.95,
                          "chain mean within 3 batch-means SE of the conjugate posterior mean (fraction of coordinates)"));
      report.add(asserted("conjugate_variance_match", fv, ">=", 0.95,
                          "chain variance within 3 batch-means SE of the conjugate posterior variance (fraction of coordinates)"));
      report.add(asserted("acceptance_in_open_unit_interval", (acc > 0.0 && acc < 1.0) ? 1.0 : 0.0, "==", 1.0,
                          "nondegenerate pCN acceptance"));
    } else {
      report.add(asserted("prior_variance_match", fv, ">=", 1.0,
                          "N = 0: every coordinate's variance within 3 batch-means SE of rho^2 lambda^-alpha"));
      report.add(reported("prior_mean_match", fm, "N = 0: coordinates with mean within 3 batch-means SE of 0"));
      report.add(asserted("prior_acceptance_rate", chain.acceptance_rate(), "==", 1.0,
                          "N = 0: pCN proposal is prior-reversible"));
    }
  } else {
    report.add(asserted("acceptance_in_open_unit_interval", (acc > 0.0 && acc < 1.0) ? 1.0 : 0.0, "==", 1.0,
                        "nondegenerate pCN acceptance"));
  }
  report.stamp(first, chain_s);
}

// ---------------------------------------------------------------- bvm / coverage

namespace {

struct LadderSetup {
  BasisPtr basis;
  ForwardConfig fc;
  FieldSpec truth;
  FieldSpec forcing;
  PriorSettings prior;
  double noise_sd = 1.0;
  std::vector<std::size_t> ladder;
  std::size_t replicates = 1;
  PcnOptions chain;
  ProbeGrid window;
  double level = 0.9;
  std::size_t limit_samples = 2000;
  std::size_t slices = 64;
};

LadderSetup read_ladder(ConfigReader& cfg, bool with_limit) {
  LadderSetup s;
  s.basis = read_basis(cfg);
  s.fc = read_forward(cfg, s.basis);
  s.truth = read_field(cfg.section("truth"));
  s.forcing = read_field(cfg.optional_section("forcing"));
  s.prior = read_prior(cfg.section("prior"));
  s.noise_sd = cfg.number("noise_sd", 1.0);
  if (!(s.noise_sd > 0.0)) throw ConfigError(cfg.child("noise_sd"), "must be positive");
  if (with_limit) {
    for (double n : cfg.numbers("ladder")) {
      if (!(n >= 1.0) || n != std::floor(n)) throw ConfigError(cfg.child("ladder"), "entries must be positive integers");
      s.ladder.push_back(std::size_t(n));
    }
    if (s.ladder.size() < 2) throw ConfigError(cfg.child("ladder"), "need at least two sample sizes");
    if (!std::is_sorted(s.ladder.begin(), s.ladder.end()))
      throw ConfigError(cfg.child("ladder"), "sample sizes must be increasing");
  } else {
    s.ladder = {read_count(cfg, "N", std::nullopt, 1)};
  }
  s.replicates = read_count(cfg, "replicates", std::nullopt, 1);
  s.chain = read_chain(cfg.section("chain"));
  s.window = read_window(cfg.optional_section("window"), s.fc.T);
  s.level = cfg.number("level", 0.9);
  if (!(s.level > 0.0 && s.level < 1.0)) throw ConfigError(cfg.child("level"), "must lie in (0, 1)");
  if (with_limit) {
    s.limit_samples = read_count(cfg, "limit_samples", 2000, 2);
    s.slices = read_count(cfg, "slices", 64, 1);
  }
  cfg.finish();
  return s;
}

struct TaskResult {
  std::size_t N = 0, replicate = 0;
  double median_error = 0.0;
  double mean_error = 0.0;
  double sqrtN_radius = 0.0;
  bool covered = false;
  double w1 = 0.0;
  double acceptance = 0.0;
  double beta = 0.0;
  double seconds = 0.0;
  bool cached = false;  // loaded from a previous session's task file
};

json task_to_json(const TaskResult& t) {
  return {{"N", t.N},         {"replicate", t.replicate},   {"median_error", t.median_error},
          {"mean_error", t.mean_error}, {"sqrtN_radius", t.sqrtN_radius}, {"covered", t.covered},
          {"w1", t.w1},       {"acceptance", t.acceptance}, {"beta", t.beta},
          {"seconds", t.seconds}};
}

TaskResult task_from_json(const json& j) {
  TaskResult t;
  t.N = j.at("N").get<std::size_t>();
  t.replicate = j.at("replicate").get<std::size_t>();
  t.median_error = j.at("median_error").get<double>();
  t.mean_error = j.at("mean_error").get<double>();
  t.sqrtN_radius = j.at("sqrtN_radius").get<double>();
  t.covered = j.at("covered").get<bool>();
  t.w1 = j.at("w1").get<double>();
  t.acceptance = j.at("acceptance").get<double>();
  t.beta = j.at("beta").get<double>();
  t.seconds = j.at("seconds").get<double>();
  return t;
}

std::vector<TaskResult> run_ladder(const LadderSetup& s, const RunContext& ctx, bool with_limit) {
  const auto theta0 = s.truth.build(s.basis, driver_seed(ctx.seed, 1));
  const auto f = s.forcing.build(s.basis, driver_seed(ctx.seed, 2));
  const auto truth = std::make_shared<const Trajectory>(solve_ns(theta0, f, s.fc));
  const ProbeEvaluator probes(s.window, s.basis);
  const Eigen::VectorXd truth_probe = probes.values(*truth);
  io::save_coeffs_json(ctx.artifact("truth.json"), theta0);

  Eigen::MatrixXd limit;
  if (with_limit) {
    const auto t0 = Clock::now();
    LinearFlowConfig lc;
    lc.nu = s.fc.nu;
    lc.dt = s.fc.dt;
    lc.scheme = s.fc.scheme;
    lc.background = truth;
    const auto spec = LimitGaussianSpec::from_gram(assemble_gram_streaming(lc));
    const auto Q = linear_probe_map(lc, probes);
    RandomSource lr(driver_seed(ctx.seed, 3));
    limit = limit_process_probes(spec, Q, s.limit_samples, lr);
    io::save_limit_factor(ctx.artifact("limit_factor.bin"), spec);
    ctx.log("limit process " + fmt_number(seconds_since(t0)) + " s");
  }

  const fs::path ckpt_dir = ctx.artifact("checkpoints"), task_dir = ctx.artifact("tasks");
  fs::create_directories(ckpt_dir);
  fs::create_directories(task_dir);
  std::vector<TaskResult> results(s.ladder.size() * s.replicates);
  std::mutex log_mutex;
  parallel_tasks(results.size(), [&](std::size_t task) {
    const std::size_t i = task / s.replicates, r = task % s.replicates;
    const std::size_t N = s.ladder[i];
    const std::string stem = "N" + std::to_string(N) + "_r" + std::to_string(r);
    const fs::path done = task_dir / (stem + ".json");
    if (ctx.resume && fs::exists(done)) {
      results[task] = task_from_json(io::read_json(done));
      results[task].cached = true;
      return;
    }
    const auto t0 = Clock::now();
    RandomSource rng(replicate_seed(ctx.seed, r, i + 1));
    const auto data = generate_data(*truth, N, s.noise_sd, rng, replicate_seed(ctx.seed, r, i + 1));
    PcnOptions o = s.chain;
    o.probes = &probes;
    o.checkpoint_path = (ckpt_dir / (stem + ".ckpt")).string();
    o.resume = ctx.resume;
    const auto chain = pcn_chain(data, s.prior.at(s.basis, N), f, s.fc, o, rng);
    const auto band = credible_band(chain, f, s.fc, s.level, probes);

    TaskResult& out = results[task];
    out.N = N;
    out.replicate = r;
    std::vector<double> err;
    for (const auto& d : chain.draws) err.push_back((d - theta0).l2_norm());
    out.median_error = median(err);
    out.mean_error = (posterior_mean(chain) - theta0).l2_norm();
    out.sqrtN_radius = std::sqrt(double(N)) * band.radius;
    out.covered = band.contains(truth_probe);
    out.acceptance = chain.acceptance_rate_after_burn_in();
    out.beta = chain.beta;
    if (with_limit) {
      Eigen::MatrixXd dev = chain.probe_values.rowwise() - band.center_probes.transpose();
      dev *= std::sqrt(double(N));
      RandomSource sr(driver_seed(ctx.seed, 4));
      out.w1 = wasserstein1_sliced(dev, limit, s.slices, sr);
    }
    out.seconds = seconds_since(t0);
    io::write_json(done, task_to_json(out));
    fs::remove(o.checkpoint_path);
    std::lock_guard lock(log_mutex);
    ctx.log("N " + std::to_string(N) + " replicate " + std::to_string(r) + ": median error " + fmt_number(out.median_error) +
            ", sqrtN R " + fmt_number(out.sqrtN_radius) + (with_limit ? ", W1 " + fmt_number(out.w1) : "") + ", " +
            fmt_number(out.seconds) + " s");
  });

  if (fs::is_empty(ckpt_dir)) fs::remove(ckpt_dir);

  io::CsvWriter csv(ctx.table("replicates.csv"), {"N", "replicate", "median_error", "mean_error", "sqrtN_radius",
                                                  "covered", "w1", "acceptance", "beta"});
  for (const auto& t : results)
    csv.row(std::vector<double>{double(t.N), double(t.replicate), t.median_error, t.mean_error, t.sqrtN_radius,
                                t.covered ? 1.0 : 0.0, t.w1, t.acceptance, t.beta});
  return results;
}

// Wall time of this session plus the recorded compute time of tasks finished in earlier sessions.
double ladder_seconds(const std::vector<TaskResult>& results, double session_s) {
  for (const auto& t : results)
    if (t.cached) session_s += t.seconds;
  return session_s;
}

}  // namespace

void cmd_bvm(ConfigReader& cfg, const RunContext& ctx, RunReport& report) {
  const auto s = read_ladder(cfg, true);
  ctx.open();
  const auto t0 = Clock::now();
  const auto results = run_ladder(s, ctx, true);
  const double total_s = ladder_seconds(results, seconds_since(t0));
  for (const char* a : {"artifacts/truth.json", "artifacts/limit_factor.bin", "tables/replicates.csv",
                        "tables/ladder.csv", "plots/contraction.svg", "plots/w1.svg", "plots/band_radius.svg"})
    report.artifacts.push_back(a);

  const std::size_t first = report.rows.size();
  const double R = double(s.replicates);
  std::vector<double> Ns, med, rad, w1, cover;
  for (std::size_t i = 0; i < s.ladder.size(); ++i) {
    double m = 0, q = 0, w = 0, c = 0;
    for (std::size_t r = 0; r < s.replicates; ++r) {
      const auto& t = results[i * s.replicates + r];
      m += t.median_error / R;
      q += t.sqrtN_radius / R;
      w += t.w1 / R;
      c += (t.covered ? 1.0 : 0.0) / R;
    }
    Ns.push_back(double(s.ladder[i]));
    med.push_back(m);
    rad.push_back(q);
    w1.push_back(w);
    cover.push_back(c);
  }
  io::CsvWriter csv(ctx.table("ladder.csv"), {"N", "median_error", "sqrtN_radius", "w1", "coverage", "rate"});

  // Reference rate delta_N^{b/(b+1)}, delta_N = N^{-alpha/(2 alpha + 2)}, with smoothness b = alpha - 1.
  const double a = s.prior.alpha, b = a - 1.0;
  std::vector<double> rate;
  for (double n : Ns) rate.push_back(std::pow(std::pow(n, -a / (2 * a + 2)), b / (b + 1)));
  for (std::size_t i = 0; i < Ns.size(); ++i) {
    csv.row(std::vector<double>{Ns[i], med[i], rad[i], w1[i], cover[i], rate[i]});
    const std::string tag = "_N" + std::to_string(s.ladder[i]);
    report.add(reported("median_error" + tag, med[i], "replicate-averaged posterior median of |theta - theta0|"));
    report.add(reported("sqrtN_RN" + tag, rad[i], "replicate-averaged sqrt(N) times credible band radius"));
    report.add(reported("w1" + tag, w1[i], "sliced W1 of sqrt(N)-rescaled pushforward deviations to the limit process"));
    report.add(reported("coverage" + tag, cover[i], "fraction of replicates whose band contains the truth"));
  }
  report.add(asserted("contraction_monotone", strictly_decreasing(med) ? 1.0 : 0.0, "==", 1.0,
                      "posterior contracts around theta0 as N grows"));
  const double slope = loglog_slope(rate, med);
  report.add(reported("contraction_slope", slope, "log-log slope of the median error against the reference rate",
                      "reference rate delta_N^(b/(b+1)) with delta_N = N^(-alpha/(2 alpha + 2)) and b = alpha - 1 = " +
                          fmt_number(b) + "; a slope near 1 means the rate is attained"));
  const double rmax = *std::max_element(rad.begin(), rad.end()), rmin = *std::min_element(rad.begin(), rad.end());
  report.add(asserted("sqrtN_RN_ratio", rmax / rmin, "<", 2.0, "sqrt(N) R_N settles to a constant"));
  report.add(asserted("w1_trend_monotone", strictly_decreasing(w1) ? 1.0 : 0.0, "==", 1.0,
                      "posterior pushforward approaches the limit process"));
  report.stamp(first, total_s);

  std::vector<double> fit;
  for (std::size_t i = 0; i < Ns.size(); ++i) fit.push_back(med[0] * std::pow(rate[i] / rate[0], slope));
  svg::LinePlot{"posterior contraction", "N", "median |theta - theta0|", true, true,
                {{"median error", Ns, med, true}, {"fit against reference rate", Ns, fit, false}}, {}}
      .write(ctx.plot("contraction.svg"));
  svg::LinePlot{"distance to the limit process", "N", "sliced W1", true, false, {{"W1", Ns, w1, true}}, {}}
      .write(ctx.plot("w1.svg"));
  svg::LinePlot{"band radius", "N", "sqrt(N) R_N", true, false, {{"sqrt(N) R_N", Ns, rad, true}}, {}}
      .write(ctx.plot("band_radius.svg"));
}

void cmd_coverage(ConfigReader& cfg, const RunContext& ctx, RunReport& report) {
  const auto s = read_ladder(cfg, false);
  ctx.open();
  const auto t0 = Clock::now();
  const auto results = run_ladder(s, ctx, false);
  const double total_s = ladder_seconds(results, seconds_since(t0));
  for (const char* a : {"artifacts/truth.json", "tables/replicates.csv", "plots/coverage.svg"})
    report.artifacts.push_back(a);

  const std::size_t first = report.rows.size();
  double covered = 0, rad = 0, acc = 0;
  for (const auto& t : results) {
    covered += t.covered ? 1.0 : 0.0;
    rad += t.sqrtN_radius / double(results.size());
    acc += t.acceptance / double(results.size());
  }
  const double coverage = covered / double(results.size());
  report.add(asserted_in("coverage", coverage, std::max(0.0, s.level - 0.12), std::min(1.0, s.level + 0.12),
                         "frequentist coverage of the credible band near its level"));
  report.add(reported("sqrtN_RN_mean", rad, "replicate-averaged sqrt(N) times credible band radius"));
  report.add(reported("acceptance_mean", acc, "replicate-averaged pCN acceptance after burn-in"));
  report.stamp(first, total_s);
  svg::BarPlot{"credible band coverage", "fraction", {"empirical coverage"}, {coverage}, {s.level}}.write(
      ctx.plot("coverage.svg"));
}

}  // namespace nsbayes::harness
