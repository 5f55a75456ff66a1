#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nsbayes/information.hpp"
#include "nsbayes/kernels.hpp"
#include "nsbayes/linear_flows.hpp"
#include "nsbayes/navier_stokes.hpp"
#include "nsbayes/rng.hpp"
#include "nsbayes/spectral.hpp"

namespace nsbayes {

struct ObservationRecord {
  double t = 0.0;
  Point2 omega;
  Vec2 y{};
};

/// Noisy space-time point observations Y_i = u(t_i, omega_i) + noise_sd * eps_i.
struct ObservationSet {
  std::vector<ObservationRecord> records;
  double noise_sd = 1.0;
  double T = 1.0;
  std::uint64_t seed = 0;

  std::size_t size() const { return records.size(); }
  std::uint64_t hash() const;
};

/// Uniform design on [0,T] x [0,1)^2 observed along an already computed trajectory.
ObservationSet generate_data(const Trajectory& truth, std::size_t N, double noise_sd, RandomSource& rng,
                             std::uint64_t seed_tag = 0);
ObservationSet generate_data(const DivFreeCoeffs& theta0, const DivFreeCoeffs& f, const ForwardConfig& config,
                             std::size_t N, double noise_sd, RandomSource& rng, std::uint64_t seed_tag = 0);

/// 2 x J real-coordinate evaluation block at a point: u(x) = E xi.
Eigen::Matrix<double, 2, Eigen::Dynamic> evaluation_block(const Basis& basis, Point2 x);

/// Observation functionals of a data set on the solver time grid of `config`.
class ObservationModel {
public:
  ObservationModel(const ObservationSet& data, const ForwardConfig& config,
                   kernels::Exec exec = kernels::Exec::serial);

  const kernels::ObservationRows& rows() const { return rows_; }
  const Eigen::VectorXd& y() const { return y_; }
  double noise_sd() const { return noise_sd_; }

  /// Model values u(t_i, omega_i) stacked as (2N).
  Eigen::VectorXd predict(const Trajectory& traj) const;
  /// -1/2 sum |Y_i - u(t_i, omega_i)|^2 / noise_sd^2 (noise_sd = 0 leaves residuals unscaled).
  double log_likelihood(const Trajectory& traj) const;

private:
  kernels::ObservationRows rows_;
  Eigen::VectorXd y_;
  double noise_sd_;
  std::size_t nodes_;
  kernels::Exec exec_;
};

/// Runs the forward solver once and returns the Gaussian log-likelihood.
double log_likelihood(const DivFreeCoeffs& theta, const ObservationSet& data, const DivFreeCoeffs& f,
                      const ForwardConfig& config);

/// Matrix of the (linear) observation map theta -> (u_theta(t_i, omega_i))_i for
/// a model without advection and f = 0, one forward solve per basis direction.
Eigen::MatrixXd linear_observation_matrix(const ObservationModel& model, const ForwardConfig& config);

struct ConjugateGaussian {
  Eigen::VectorXd mean;  // real coordinates
  Eigen::MatrixXd covariance;
};

/// Closed-form posterior for y = G theta + noise, theta ~ prior.
ConjugateGaussian conjugate_posterior(const Eigen::MatrixXd& G, const Eigen::VectorXd& y, double noise_sd,
                                      const GaussianPriorSpec& prior);

/// Sup-norm probe nodes: nx x nx spatial points times nt times over [t_min, t_max].
struct ProbeGrid {
  double t_min = 0.0;
  double t_max = 1.0;
  int nt = 9;
  int nx = 17;

  std::vector<double> times() const;
  std::vector<Point2> points() const;
  std::size_t size() const { return std::size_t(nt) * nx * nx * 2; }
};

/// Evaluates trajectories on a probe grid; rows of E are (point, component).
class ProbeEvaluator {
public:
  ProbeEvaluator(ProbeGrid grid, const BasisPtr& basis);

  const ProbeGrid& grid() const { return grid_; }
  std::size_t size() const { return grid_.size(); }
  /// Probe values ordered (time, point, component).
  Eigen::VectorXd values(const Trajectory& traj) const;
  /// Values of a linear map theta -> U_theta given as per-time real state matrices (J x J).
  Eigen::MatrixXd linear_map(const std::vector<Eigen::MatrixXd>& states_at_times) const;

private:
  ProbeGrid grid_;
  std::vector<double> times_;
  Eigen::MatrixXd E_;  // (2 nx^2) x J
};

struct PcnOptions {
  std::size_t n_iter = 10000;
  double beta = 0.2;
  double burn_in_fraction = 0.2;
  std::size_t max_retained = 2000;
  std::size_t checkpoint_every = 500;
  std::string checkpoint_path;  // empty: no checkpoints
  bool resume = false;          // continue from checkpoint_path if it exists
  /// Stop after this many iterations in this call (checkpoint written first); 0 = run to the end.
  std::size_t stop_after = 0;
  const ProbeEvaluator* probes = nullptr;  // record pushforward probe values of retained draws
  /// During burn-in, rescale beta every adapt_window steps towards this acceptance rate; 0 = fixed beta.
  double target_acceptance = 0.0;
  std::size_t adapt_window = 50;
};

struct PosteriorChain {
  BasisPtr basis;
  std::vector<DivFreeCoeffs> draws;        // retained, in order
  std::vector<std::uint8_t> accepted;      // per iteration
  std::vector<double> loglik_trace;        // current log-likelihood per iteration
  Eigen::MatrixXd probe_values;            // retained x probes (when requested)
  double beta = 0.0;  // step size in force after burn-in
  std::size_t n_iter = 0;
  std::size_t burn_in = 0;
  std::size_t thin = 1;
  GaussianPriorSpec prior;
  std::uint64_t data_hash = 0;
  bool complete = false;

  double acceptance_rate() const;              // over all iterations
  double acceptance_rate_after_burn_in() const;
  Eigen::MatrixXd real_draws() const;          // retained x J
};

/// Preconditioned Crank-Nicolson sampler; proposal sqrt(1 - beta^2) theta + beta xi, xi ~ prior.
PosteriorChain pcn_chain(const ObservationSet& data, const GaussianPriorSpec& prior, const DivFreeCoeffs& f,
                         const ForwardConfig& config, const PcnOptions& options, RandomSource& rng);

DivFreeCoeffs posterior_mean(const PosteriorChain& chain);
/// Forward solution at the posterior mean.
Trajectory pushforward_mean(const PosteriorChain& chain, const DivFreeCoeffs& f, const ForwardConfig& config);
/// Average of the forward solutions of the retained draws.
Trajectory filtering_mean(const PosteriorChain& chain, const DivFreeCoeffs& f, const ForwardConfig& config);

struct CredibleBand {
  Trajectory center;
  Eigen::VectorXd center_probes;
  double radius = 0.0;
  double level = 0.9;
  ProbeGrid grid;
  std::vector<double> distances;  // per retained draw

  bool contains(const Eigen::VectorXd& probes) const;
  double fraction_inside() const;
};

/// Empirical level-quantile of sup distances (the ceil(level n)-th order statistic).
double band_quantile(std::vector<double> distances, double level);

/// Band around the pushforward mean; uses chain.probe_values when present.
CredibleBand credible_band(const PosteriorChain& chain, const DivFreeCoeffs& f, const ForwardConfig& config,
                           double level, const ProbeEvaluator& probes);

/// Exact 1D Wasserstein-1 between two empirical measures.
double wasserstein1_1d(std::vector<double> a, std::vector<double> b);

/// Max over random unit directions of the 1D W1 of the projected samples (rows are samples).
double wasserstein1_sliced(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, std::size_t n_slices,
                           RandomSource& rng, kernels::Exec exec = kernels::Exec::serial);

/// Probe values of `count` limit-process draws: rows = Q factor z with Q the probe map of U.
Eigen::MatrixXd limit_process_probes(const LimitGaussianSpec& spec, const Eigen::MatrixXd& probe_map,
                                     std::size_t count, RandomSource& rng);

/// Probe map of the linearised flow: (probes x J) matrix with column j the probe values of U[e_j].
Eigen::MatrixXd linear_probe_map(const LinearFlowConfig& config, const ProbeEvaluator& probes,
                                 kernels::Exec exec = kernels::Exec::parallel);

}  // namespace nsbayes
