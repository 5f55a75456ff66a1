#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <vector>

#include "nsbayes/kernels.hpp"
#include "nsbayes/navier_stokes.hpp"
#include "nsbayes/spectral.hpp"

namespace nsbayes {

/// Heat semigroup S_t: multiplies each coefficient by exp(-nu lambda t).
DivFreeCoeffs heat_evolve(const DivFreeCoeffs& h, double t, double nu);

/// Per-mode symbol of L*L: int_0^T exp(-2 nu lambda t) dt = (1 - exp(-2 nu lambda T)) / (2 nu lambda).
double heat_gram_symbol(double lambda, double T, double nu);

/// L*L for the heat flow L on [0, T]; diagonal in the basis.
DivFreeCoeffs L_star_L(const DivFreeCoeffs& h, double T, double nu);

/// Laplacian (multiplies by -lambda).
DivFreeCoeffs laplacian(const DivFreeCoeffs& u);

/// Identically zero background on [0, T] (two nodes), for heat-flow runs.
std::shared_ptr<const Trajectory> zero_trajectory(const BasisPtr& basis, double T);

/// Settings for dU/dt + nu A U + B[u1(t), U] + B[U, u2(t)] = g(t) along frozen backgrounds.
struct LinearFlowConfig {
  double nu = 0.1;
  double dt = 1e-2;
  int n = 0;  // 0: default dealiased grid
  TimeScheme scheme = TimeScheme::etd_rk2;
  std::shared_ptr<const Trajectory> background;  // u1; also u2 unless overridden
  double blowup_ceiling = 1e6;

  void validate() const;
  double horizon() const { return background->end(); }
  std::size_t steps() const;
  int grid() const;
  const BasisPtr& basis() const { return background->basis(); }
  /// Forward-config view used to tag the output trajectories.
  ForwardConfig as_forward() const;
};

/// Several linearised solves advanced in lockstep on one time grid.
///
/// Background fields are synthesised once per time level and shared by all
/// columns; the per-column updates run through kernels::for_each_index.
class LinearFlowBatch {
public:
  LinearFlowBatch(const LinearFlowConfig& config, std::vector<DivFreeCoeffs> initial,
                  const Trajectory* source = nullptr, const Trajectory* background2 = nullptr,
                  kernels::Exec exec = kernels::Exec::parallel);
  ~LinearFlowBatch();
  LinearFlowBatch(const LinearFlowBatch&) = delete;
  LinearFlowBatch& operator=(const LinearFlowBatch&) = delete;

  std::size_t steps() const { return steps_; }
  std::size_t step_index() const { return step_; }
  double time(std::size_t m) const;
  double current_time() const { return time(step_); }
  const std::vector<DivFreeCoeffs>& states() const { return states_; }

  /// Advance every column from t_m to t_{m+1}.
  void advance();
  /// Real coordinates of all columns (J x columns).
  Eigen::MatrixXd real_states() const;

private:
  struct Frame;
  struct Worker;
  std::shared_ptr<Frame> frame_at(double t);
  DivFreeCoeffs explicit_term(const DivFreeCoeffs& U, const Frame& frame, Worker& w) const;

  LinearFlowConfig config_;
  const Trajectory* source_;
  const Trajectory* background2_;
  kernels::Exec exec_;
  std::size_t steps_;
  double h_;
  std::size_t step_ = 0;
  bool zero_background_;
  std::vector<DivFreeCoeffs> states_;
  std::vector<DivFreeCoeffs> previous_;  // AB2 history
  std::vector<std::unique_ptr<Worker>> workers_;
  std::unique_ptr<Worker> frame_worker_;
  std::shared_ptr<Frame> cached_;
};

/// Linearised flow U with U(0) = xi; optional source g and second background u2.
Trajectory linearize_solve(const LinearFlowConfig& config, const DivFreeCoeffs& xi, const Trajectory* source = nullptr,
                           const Trajectory* background2 = nullptr);

/// Trapezoid weights of a (possibly non-uniform) increasing time grid.
std::vector<double> trapezoid_weights(const std::vector<double>& times);

/// Node times of the linear solver grid of `config`.
std::vector<double> solver_times(const LinearFlowConfig& config);

/// Dense representation of the score operator restricted to the truncated basis.
///
/// Column j is the trajectory of the j-th real basis direction, sampled at
/// sample_times and stacked with sqrt(trapezoid weight) so that
/// (P x) . (P y) approximates the L2([0,T], L2) pairing.
struct PropagatorMatrix {
  BasisPtr basis;
  std::vector<double> sample_times;
  std::vector<double> weights;
  Eigen::MatrixXd entries;  // (samples * J) x J
  std::uint64_t background_hash = 0;

  std::size_t dim() const { return basis->real_dim(); }
  Eigen::VectorXd apply(const DivFreeCoeffs& h) const;
};

struct AssemblyOptions {
  std::size_t max_dim = 1024;  // resource guard on J
  kernels::Exec exec = kernels::Exec::parallel;
};

/// Assembles P by one linearised solve per real basis direction.
/// sample_times must be nodes of the solver grid.
PropagatorMatrix assemble_propagator(const LinearFlowConfig& config, const std::vector<double>& sample_times,
                                     const AssemblyOptions& options = {});

/// Transpose action P^T w, returned as a field.
DivFreeCoeffs adjoint_apply(const PropagatorMatrix& P, const Eigen::VectorXd& w);

}  // namespace nsbayes
