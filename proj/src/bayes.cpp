#include "nsbayes/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace nsbayes {

std::uint64_t ObservationSet::hash() const {
  Fnv1a h;
  h.mix_value(noise_sd);
  h.mix_value(T);
  for (const auto& r : records) {
    h.mix_value(r.t);
    h.mix_value(r.omega.x1);
    h.mix_value(r.omega.x2);
    h.mix_value(r.y[0]);
    h.mix_value(r.y[1]);
  }
  return h.value();
}

ObservationSet generate_data(const Trajectory& truth, std::size_t N, double noise_sd, RandomSource& rng,
                             std::uint64_t seed_tag) {
  if (N < 1) throw std::invalid_argument("generate_data: N must be >= 1");
  if (noise_sd < 0.0) throw std::invalid_argument("generate_data: noise_sd must be >= 0");
  ObservationSet data;
  data.noise_sd = noise_sd;
  data.T = truth.end();
  data.seed = seed_tag;
  data.records.reserve(N);
  DivFreeCoeffs state;
  for (std::size_t i = 0; i < N; ++i) {
    ObservationRecord r;
    r.t = data.T * rng.uniform();
    r.omega = {rng.uniform(), rng.uniform()};
    truth.at(r.t, state);
    const Vec2 u = evaluate_at(state, r.omega);
    const double e1 = rng.gaussian();
    const double e2 = rng.gaussian();
    r.y = {u[0] + noise_sd * e1, u[1] + noise_sd * e2};
    data.records.push_back(r);
  }
  return data;
}

ObservationSet generate_data(const DivFreeCoeffs& theta0, const DivFreeCoeffs& f, const ForwardConfig& config,
                             std::size_t N, double noise_sd, RandomSource& rng, std::uint64_t seed_tag) {
  return generate_data(solve_ns(theta0, f, config), N, noise_sd, rng, seed_tag);
}

Eigen::Matrix<double, 2, Eigen::Dynamic> evaluation_block(const Basis& basis, Point2 x) {
  Eigen::Matrix<double, 2, Eigen::Dynamic> E(2, Eigen::Index(basis.real_dim()));
  for (std::size_t p = 0; p < basis.pairs(); ++p) {
    const auto& m = basis.pair(p);
    const double phase = kTwoPi * (m.k1 * x.x1 + m.k2 * x.x2);
    const double c = std::numbers::sqrt2 * std::cos(phase);
    const double s = -std::numbers::sqrt2 * std::sin(phase);
    for (int d = 0; d < 2; ++d) {
      E(d, Eigen::Index(2 * p)) = c * m.c[d];
      E(d, Eigen::Index(2 * p + 1)) = s * m.c[d];
    }
  }
  return E;
}

namespace {

Eigen::MatrixXd state_matrix(const Trajectory& traj) {
  const auto J = Eigen::Index(traj.basis()->real_dim());
  Eigen::MatrixXd X(J, Eigen::Index(traj.size()));
  for (std::size_t m = 0; m < traj.size(); ++m) traj.state(m).to_real(X.col(Eigen::Index(m)));
  return X;
}

}  // namespace

ObservationModel::ObservationModel(const ObservationSet& data, const ForwardConfig& config, kernels::Exec exec)
    : noise_sd_(data.noise_sd), nodes_(config.steps() + 1), exec_(exec) {
  config.validate();
  const Basis& basis = *config.basis;
  const std::size_t N = data.size();
  const std::size_t M = config.steps();
  rows_.E.resize(Eigen::Index(2 * N), Eigen::Index(basis.real_dim()));
  rows_.node.resize(N);
  rows_.weight.resize(N);
  y_.resize(Eigen::Index(2 * N));
  for (std::size_t i = 0; i < N; ++i) {
    const auto& r = data.records[i];
    if (r.t < 0.0 || r.t > config.T * (1.0 + 1e-12))
      throw std::invalid_argument("ObservationModel: observation time outside [0, T]");
    rows_.E.middleRows(Eigen::Index(2 * i), 2) = evaluation_block(basis, r.omega);
    const double s = std::clamp(r.t / config.T * double(M), 0.0, double(M));
    std::size_t m = std::min<std::size_t>(std::size_t(std::floor(s)), M - 1);
    double w = s - double(m);
    if (w <= 0.0) w = 0.0;
    rows_.node[i] = m;
    rows_.weight[i] = w;
    y_[Eigen::Index(2 * i)] = r.y[0];
    y_[Eigen::Index(2 * i + 1)] = r.y[1];
  }
}

Eigen::VectorXd ObservationModel::predict(const Trajectory& traj) const {
  if (traj.size() != nodes_) throw std::invalid_argument("ObservationModel: trajectory is on a different time grid");
  Eigen::VectorXd out(y_.size());
  if (y_.size() == 0) return out;
  kernels::observe(exec_, rows_, state_matrix(traj), out);
  return out;
}

double ObservationModel::log_likelihood(const Trajectory& traj) const {
  if (y_.size() == 0) return 0.0;
  const double r2 = (y_ - predict(traj)).squaredNorm();
  const double scale = noise_sd_ > 0.0 ? noise_sd_ * noise_sd_ : 1.0;
  return -0.5 * r2 / scale;
}

double log_likelihood(const DivFreeCoeffs& theta, const ObservationSet& data, const DivFreeCoeffs& f,
                      const ForwardConfig& config) {
  ObservationModel model(data, config);
  return model.log_likelihood(solve_ns(theta, f, config));
}

Eigen::MatrixXd linear_observation_matrix(const ObservationModel& model, const ForwardConfig& config) {
  if (config.advection)
    throw std::invalid_argument("linear_observation_matrix: requires the linear surrogate (advection = false)");
  const BasisPtr& basis = config.basis;
  const std::size_t J = basis->real_dim();
  const DivFreeCoeffs zero(basis);
  Eigen::MatrixXd G(model.y().size(), Eigen::Index(J));
  for (std::size_t j = 0; j < J; ++j)
    G.col(Eigen::Index(j)) = model.predict(solve_ns(DivFreeCoeffs::unit(basis, j), zero, config));
  return G;
}

ConjugateGaussian conjugate_posterior(const Eigen::MatrixXd& G, const Eigen::VectorXd& y, double noise_sd,
                                      const GaussianPriorSpec& prior) {
  const auto J = G.cols();
  const double s2 = noise_sd > 0.0 ? noise_sd * noise_sd : 1.0;
  Eigen::MatrixXd H = G.transpose() * G / s2;
  for (Eigen::Index i = 0; i < J; ++i) {
    const double sd = prior.sd(std::size_t(i) / 2);
    H(i, i) += 1.0 / (sd * sd);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) throw std::runtime_error("conjugate_posterior: precision not SPD");
  ConjugateGaussian out;
  out.covariance = llt.solve(Eigen::MatrixXd::Identity(J, J));
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  out.mean = llt.solve(G.transpose() * y / s2);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> ProbeGrid::times() const {
  std::vector<double> t(std::size_t(std::max(nt, 1)));
  for (int m = 0; m < nt; ++m) t[std::size_t(m)] = nt == 1 ? t_min : t_min + (t_max - t_min) * m / (nt - 1);
  return t;
}

std::vector<Point2> ProbeGrid::points() const {
  std::vector<Point2> p;
  p.reserve(std::size_t(nx) * nx);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < nx; ++j) p.push_back({double(i) / nx, double(j) / nx});
  return p;
}

ProbeEvaluator::ProbeEvaluator(ProbeGrid grid, const BasisPtr& basis) : grid_(grid), times_(grid.times()) {
  if (grid.nt < 1 || grid.nx < 1 || !(grid.t_min <= grid.t_max))
    throw std::invalid_argument("ProbeGrid: need nt, nx >= 1 and t_min <= t_max");
  const auto pts = grid.points();
  E_.resize(Eigen::Index(2 * pts.size()), Eigen::Index(basis->real_dim()));
  for (std::size_t i = 0; i < pts.size(); ++i) E_.middleRows(Eigen::Index(2 * i), 2) = evaluation_block(*basis, pts[i]);
}

Eigen::VectorXd ProbeEvaluator::values(const Trajectory& traj) const {
  if (grid_.t_min < traj.start() - 1e-12 || grid_.t_max > traj.end() + 1e-12)
    throw std::invalid_argument("ProbeEvaluator: window outside trajectory support");
  Eigen::VectorXd out(static_cast<Eigen::Index>(size()));
  const auto block = E_.rows();
  DivFreeCoeffs state;
  Eigen::VectorXd x;
  for (std::size_t m = 0; m < times_.size(); ++m) {
    traj.at(times_[m], state);
    x = state.to_real();
    out.segment(Eigen::Index(m) * block, block).noalias() = E_ * x;
  }
  return out;
}

Eigen::MatrixXd ProbeEvaluator::linear_map(const std::vector<Eigen::MatrixXd>& states_at_times) const {
  if (states_at_times.size() != times_.size()) throw std::invalid_argument("ProbeEvaluator: one state per probe time");
  const auto block = E_.rows();
  Eigen::MatrixXd Q(Eigen::Index(size()), states_at_times.front().cols());
  for (std::size_t m = 0; m < times_.size(); ++m)
    Q.middleRows(Eigen::Index(m) * block, block).noalias() = E_ * states_at_times[m];
  return Q;
}

// ---------------------------------------------------------------------------

double PosteriorChain::acceptance_rate() const {
  if (accepted.empty()) return 0.0;
  return double(std::count(accepted.begin(), accepted.end(), 1)) / double(accepted.size());
}

double PosteriorChain::acceptance_rate_after_burn_in() const {
  if (accepted.size() <= burn_in) return 0.0;
  return double(std::count(accepted.begin() + std::ptrdiff_t(burn_in), accepted.end(), 1)) /
         double(accepted.size() - burn_in);
}

Eigen::MatrixXd PosteriorChain::real_draws() const {
  Eigen::MatrixXd X(Eigen::Index(draws.size()), Eigen::Index(basis ? basis->real_dim() : 0));
  for (std::size_t i = 0; i < draws.size(); ++i) X.row(Eigen::Index(i)) = draws[i].to_real().transpose();
  return X;
}

namespace {

constexpr std::uint64_t kCheckpointMagic = 0x4e53424b50434e31ULL;  // "NSBKPCN1"

struct ChainState {
  std::size_t iteration = 0;
  double beta = 0.0;
  Eigen::VectorXd theta;
  double loglik = 0.0;
  Eigen::VectorXd probe;
  std::string rng_state;
};

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("pcn checkpoint: truncated file");
  return v;
}
void put_vec(std::ostream& os, const Eigen::VectorXd& v) {
  put<std::uint64_t>(os, std::uint64_t(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * sizeof(double)));
}
Eigen::VectorXd get_vec(std::istream& is) {
  Eigen::VectorXd v(Eigen::Index(get<std::uint64_t>(is)));
  is.read(reinterpret_cast<char*>(v.data()), std::streamsize(v.size() * sizeof(double)));
  if (!is) throw std::runtime_error("pcn checkpoint: truncated file");
  return v;
}

void write_checkpoint(const std::string& path, const PosteriorChain& chain, const ChainState& st, double beta0) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("pcn checkpoint: cannot write " + tmp);
    put(os, kCheckpointMagic);
    put<std::uint64_t>(os, chain.n_iter);
    put<std::uint64_t>(os, chain.data_hash);
    put(os, beta0);
    put<std::uint64_t>(os, st.iteration);
    put(os, st.beta);
    put_vec(os, st.theta);
    put(os, st.loglik);
    put_vec(os, st.probe);
    put<std::uint64_t>(os, st.rng_state.size());
    os.write(st.rng_state.data(), std::streamsize(st.rng_state.size()));
    put<std::uint64_t>(os, chain.accepted.size());
    os.write(reinterpret_cast<const char*>(chain.accepted.data()), std::streamsize(chain.accepted.size()));
    put_vec(os, Eigen::Map<const Eigen::VectorXd>(chain.loglik_trace.data(), Eigen::Index(chain.loglik_trace.size())));
    put<std::uint64_t>(os, chain.draws.size());
    for (const auto& d : chain.draws) put_vec(os, d.to_real());
    put<std::uint64_t>(os, std::uint64_t(chain.probe_values.rows()));
    put<std::uint64_t>(os, std::uint64_t(chain.probe_values.cols()));
    os.write(reinterpret_cast<const char*>(chain.probe_values.data()),
             std::streamsize(chain.probe_values.size() * sizeof(double)));
    if (!os) throw std::runtime_error("pcn checkpoint: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

void read_checkpoint(const std::string& path, PosteriorChain& chain, ChainState& st, double beta0) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("pcn checkpoint: cannot read " + path);
  if (get<std::uint64_t>(is) != kCheckpointMagic) throw std::runtime_error("pcn checkpoint: bad magic in " + path);
  if (get<std::uint64_t>(is) != chain.n_iter || get<std::uint64_t>(is) != chain.data_hash ||
      get<double>(is) != beta0)
    throw std::runtime_error("pcn checkpoint: " + path + " belongs to a different chain configuration");
  st.iteration = get<std::uint64_t>(is);
  st.beta = get<double>(is);
  st.theta = get_vec(is);
  st.loglik = get<double>(is);
  st.probe = get_vec(is);
  st.rng_state.resize(get<std::uint64_t>(is));
  is.read(st.rng_state.data(), std::streamsize(st.rng_state.size()));
  chain.accepted.resize(get<std::uint64_t>(is));
  is.read(reinterpret_cast<char*>(chain.accepted.data()), std::streamsize(chain.accepted.size()));
  const Eigen::VectorXd trace = get_vec(is);
  chain.loglik_trace.assign(trace.data(), trace.data() + trace.size());
  const auto nd = get<std::uint64_t>(is);
  chain.draws.clear();
  for (std::uint64_t i = 0; i < nd; ++i) chain.draws.push_back(DivFreeCoeffs::from_real(chain.basis, get_vec(is)));
  const auto rows = get<std::uint64_t>(is);
  const auto cols = get<std::uint64_t>(is);
  chain.probe_values.resize(Eigen::Index(rows), Eigen::Index(cols));
  is.read(reinterpret_cast<char*>(chain.probe_values.data()),
          std::streamsize(chain.probe_values.size() * sizeof(double)));
  if (!is) throw std::runtime_error("pcn checkpoint: truncated file " + path);
}

}  // namespace

PosteriorChain pcn_chain(const ObservationSet& data, const GaussianPriorSpec& prior, const DivFreeCoeffs& f,
                         const ForwardConfig& config, const PcnOptions& options, RandomSource& rng) {
  if (!(options.beta > 0.0 && options.beta <= 1.0)) throw std::invalid_argument("pcn_chain: beta must lie in (0, 1]");
  if (options.n_iter < 1) throw std::invalid_argument("pcn_chain: n_iter must be >= 1");
  if (options.max_retained < 1) throw std::invalid_argument("pcn_chain: max_retained must be >= 1");
  config.validate();

  PosteriorChain chain;
  chain.basis = config.basis;
  chain.beta = options.beta;
  chain.n_iter = options.n_iter;
  chain.prior = prior;
  chain.data_hash = data.hash();
  chain.burn_in = std::size_t(std::floor(options.burn_in_fraction * double(options.n_iter)));
  const std::size_t post = options.n_iter - chain.burn_in;
  chain.thin = std::max<std::size_t>(1, (post + options.max_retained - 1) / options.max_retained);

  const bool has_data = data.size() > 0;
  const bool want_probes = options.probes != nullptr;
  std::optional<ObservationModel> model;
  if (has_data) model.emplace(data, config);

  auto evaluate = [&](const DivFreeCoeffs& theta, double& ll, Eigen::VectorXd& probe) {
    if (!has_data && !want_probes) {
      ll = 0.0;
      return;
    }
    try {
      const Trajectory traj = solve_ns(theta, f, config);
      ll = has_data ? model->log_likelihood(traj) : 0.0;
      if (want_probes) probe = options.probes->values(traj);
    } catch (const SolverError&) {
      ll = -std::numeric_limits<double>::infinity();
    }
  };

  ChainState st;
  const bool resuming = options.resume && !options.checkpoint_path.empty() &&
                        std::filesystem::exists(options.checkpoint_path);
  if (resuming) {
    read_checkpoint(options.checkpoint_path, chain, st, options.beta);
    rng.restore_state(st.rng_state);
  } else {
    st.beta = options.beta;
    st.theta = sample_gaussian_series(prior, rng).to_real();
    evaluate(DivFreeCoeffs::from_real(chain.basis, st.theta), st.loglik, st.probe);
    if (want_probes) chain.probe_values.resize(0, Eigen::Index(options.probes->size()));
  }

  const bool adapt = options.target_acceptance > 0.0 && options.adapt_window > 0;
  std::vector<Eigen::VectorXd> new_probes;
  auto flush_probes = [&] {
    if (new_probes.empty()) return;
    const auto old = chain.probe_values.rows();
    chain.probe_values.conservativeResize(old + Eigen::Index(new_probes.size()), Eigen::NoChange);
    for (std::size_t i = 0; i < new_probes.size(); ++i) chain.probe_values.row(old + Eigen::Index(i)) = new_probes[i];
    new_probes.clear();
  };

  std::size_t done_this_call = 0;
  Eigen::VectorXd proposal_probe;
  while (st.iteration < options.n_iter) {
    const Eigen::VectorXd xi = sample_gaussian_series(prior, rng).to_real();
    const Eigen::VectorXd proposal = std::sqrt(1.0 - st.beta * st.beta) * st.theta + st.beta * xi;
    double ll = 0.0;
    evaluate(DivFreeCoeffs::from_real(chain.basis, proposal), ll, proposal_probe);
    const double u = rng.uniform();
    const bool accept = std::log(u) < ll - st.loglik;
    if (accept) {
      st.theta = proposal;
      st.loglik = ll;
      if (want_probes) st.probe = proposal_probe;
    }
    chain.accepted.push_back(accept ? 1 : 0);
    chain.loglik_trace.push_back(st.loglik);
    ++st.iteration;
    ++done_this_call;
    if (adapt && st.iteration <= chain.burn_in && st.iteration % options.adapt_window == 0) {
      const auto from = chain.accepted.end() - std::ptrdiff_t(options.adapt_window);
      const double rate = double(std::count(from, chain.accepted.end(), 1)) / double(options.adapt_window);
      st.beta = std::clamp(st.beta * std::exp(rate - options.target_acceptance), 1e-4, 1.0);
    }
    if (st.iteration > chain.burn_in && (st.iteration - chain.burn_in) % chain.thin == 0) {
      chain.draws.push_back(DivFreeCoeffs::from_real(chain.basis, st.theta));
      if (want_probes) new_probes.push_back(st.probe);
    }
    const bool stopping = options.stop_after && done_this_call >= options.stop_after;
    if (!options.checkpoint_path.empty() &&
        (stopping || (options.checkpoint_every && st.iteration % options.checkpoint_every == 0))) {
      flush_probes();
      st.rng_state = rng.save_state();
      write_checkpoint(options.checkpoint_path, chain, st, options.beta);
    }
    if (stopping) break;
  }
  flush_probes();
  chain.beta = st.beta;
  chain.complete = st.iteration == options.n_iter;
  return chain;
}

DivFreeCoeffs posterior_mean(const PosteriorChain& chain) {
  if (chain.draws.empty()) throw std::invalid_argument("posterior_mean: chain has no retained draws");
  DivFreeCoeffs mean(chain.basis);
  for (const auto& d : chain.draws) mean += d;
  mean *= 1.0 / double(chain.draws.size());
  return mean;
}

Trajectory pushforward_mean(const PosteriorChain& chain, const DivFreeCoeffs& f, const ForwardConfig& config) {
  return solve_ns(posterior_mean(chain), f, config);
}

Trajectory filtering_mean(const PosteriorChain& chain, const DivFreeCoeffs& f, const ForwardConfig& config) {
  if (chain.draws.empty()) throw std::invalid_argument("filtering_mean: chain has no retained draws");
  std::vector<DivFreeCoeffs> acc;
  std::vector<double> times;
  for (const auto& d : chain.draws) {
    const Trajectory traj = solve_ns(d, f, config);
    if (acc.empty()) {
      acc = traj.states();
      times = traj.times();
    } else {
      for (std::size_t m = 0; m < acc.size(); ++m) acc[m] += traj.state(m);
    }
  }
  for (auto& s : acc) s *= 1.0 / double(chain.draws.size());
  return Trajectory(config, std::move(times), std::move(acc));
}

// ---------------------------------------------------------------------------

bool CredibleBand::contains(const Eigen::VectorXd& probes) const {
  return (probes - center_probes).lpNorm<Eigen::Infinity>() <= radius;
}

double CredibleBand::fraction_inside() const {
  if (distances.empty()) return 0.0;
  return double(std::count_if(distances.begin(), distances.end(), [&](double d) { return d <= radius; })) /
         double(distances.size());
}

double band_quantile(std::vector<double> distances, double level) {
  if (distances.empty()) throw std::invalid_argument("band_quantile: no distances");
  if (!(level > 0.0 && level <= 1.0)) throw std::invalid_argument("band_quantile: level must lie in (0, 1]");
  std::sort(distances.begin(), distances.end());
  const double n = double(distances.size());
  auto k = std::size_t(std::ceil(level * n - 1e-9));
  k = std::clamp<std::size_t>(k, 1, distances.size());
  return distances[k - 1];
}

CredibleBand credible_band(const PosteriorChain& chain, const DivFreeCoeffs& f, const ForwardConfig& config,
                           double level, const ProbeEvaluator& probes) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("credible_band: level must lie in (0, 1)");
  const auto& g = probes.grid();
  if (!(g.t_min > 0.0) || g.t_max > config.T * (1.0 + 1e-12))
    throw std::invalid_argument("credible_band: window must lie within (0, T]");
  CredibleBand band;
  band.level = level;
  band.grid = g;
  band.center = pushforward_mean(chain, f, config);
  band.center_probes = probes.values(band.center);
  const bool stored = chain.probe_values.rows() == Eigen::Index(chain.draws.size()) &&
                      chain.probe_values.cols() == Eigen::Index(probes.size());
  band.distances.reserve(chain.draws.size());
  for (std::size_t i = 0; i < chain.draws.size(); ++i) {
    const Eigen::VectorXd v = stored ? Eigen::VectorXd(chain.probe_values.row(Eigen::Index(i)).transpose())
                                     : probes.values(solve_ns(chain.draws[i], f, config));
    band.distances.push_back((v - band.center_probes).lpNorm<Eigen::Infinity>());
  }
  band.radius = band_quantile(band.distances, level);
  return band;
}

// ---------------------------------------------------------------------------

double wasserstein1_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein1: empty sample set");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t na = a.size(), nb = b.size();
  // Quantile functions are step functions with jumps at i/na and j/nb.
  std::size_t i = 0, j = 0;
  double q = 0.0, acc = 0.0;
  while (i < na && j < nb) {
    const std::size_t lhs = (i + 1) * nb;
    const std::size_t rhs = (j + 1) * na;
    const double next = lhs <= rhs ? double(i + 1) / double(na) : double(j + 1) / double(nb);
    acc += (next - q) * std::abs(a[i] - b[j]);
    q = next;
    if (lhs <= rhs) ++i;
    if (rhs <= lhs) ++j;
  }
  return acc;
}

double wasserstein1_sliced(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, std::size_t n_slices,
                           RandomSource& rng, kernels::Exec exec) {
  if (A.rows() == 0 || B.rows() == 0) throw std::invalid_argument("wasserstein1_sliced: empty sample set");
  if (A.cols() != B.cols()) throw std::invalid_argument("wasserstein1_sliced: probe dimensions differ");
  if (n_slices < 1) throw std::invalid_argument("wasserstein1_sliced: need at least one slice");
  Eigen::VectorXd dir(A.cols()), pa(A.rows()), pb(B.rows());
  double best = 0.0;
  for (std::size_t s = 0; s < n_slices; ++s) {
    double nrm = 0.0;
    do {
      for (Eigen::Index k = 0; k < dir.size(); ++k) dir[k] = rng.gaussian();
      nrm = dir.norm();
    } while (nrm == 0.0);
    dir /= nrm;
    kernels::project_samples(exec, A, dir, pa);
    kernels::project_samples(exec, B, dir, pb);
    best = std::max(best, wasserstein1_1d(std::vector<double>(pa.data(), pa.data() + pa.size()),
                                          std::vector<double>(pb.data(), pb.data() + pb.size())));
  }
  return best;
}

Eigen::MatrixXd limit_process_probes(const LimitGaussianSpec& spec, const Eigen::MatrixXd& probe_map,
                                     std::size_t count, RandomSource& rng) {
  if (probe_map.cols() != spec.factor.rows()) throw std::invalid_argument("limit_process_probes: dimension mismatch");
  const Eigen::MatrixXd QF = probe_map * spec.factor.triangularView<Eigen::Lower>();
  Eigen::MatrixXd Z(QF.cols(), Eigen::Index(count));
  for (Eigen::Index c = 0; c < Z.cols(); ++c)
    for (Eigen::Index r = 0; r < Z.rows(); ++r) Z(r, c) = rng.gaussian();
  return (QF * Z).transpose();
}

Eigen::MatrixXd linear_probe_map(const LinearFlowConfig& config, const ProbeEvaluator& probes, kernels::Exec exec) {
  config.validate();
  const BasisPtr& basis = config.basis();
  const std::size_t J = basis->real_dim();
  const auto times = probes.grid().times();
  if (times.front() < 0.0 || times.back() > config.horizon() + 1e-12)
    throw std::invalid_argument("linear_probe_map: probe window outside [0, T]");
  std::vector<DivFreeCoeffs> columns;
  columns.reserve(J);
  for (std::size_t j = 0; j < J; ++j) columns.push_back(DivFreeCoeffs::unit(basis, j));
  LinearFlowBatch batch(config, std::move(columns), nullptr, nullptr, exec);

  const double tol = 1e-12 * std::max(1.0, config.horizon());
  std::vector<Eigen::MatrixXd> at(times.size());
  Eigen::MatrixXd prev = batch.real_states();
  double tp = batch.current_time();
  std::size_t k = 0;
  while (k < times.size() && times[k] <= tp + tol) at[k++] = prev;
  while (k < times.size() && batch.step_index() < batch.steps()) {
    batch.advance();
    Eigen::MatrixXd cur = batch.real_states();
    const double tc = batch.current_time();
    while (k < times.size() && times[k] <= tc + tol) {
      const double w = std::clamp((times[k] - tp) / (tc - tp), 0.0, 1.0);
      at[k++] = (1.0 - w) * prev + w * cur;
    }
    prev = std::move(cur);
    tp = tc;
  }
  if (k < times.size()) throw std::invalid_argument("linear_probe_map: probe time beyond horizon");
  return probes.linear_map(at);
}

}  // namespace nsbayes
