#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "nsbayes/kernels.hpp"
#include "nsbayes/linear_flows.hpp"
#include "nsbayes/rng.hpp"
#include "nsbayes/spectral.hpp"

namespace nsbayes {

class NotPositiveDefinite : public std::runtime_error {
public:
  NotPositiveDefinite(const std::string& what, double smallest)
      : std::runtime_error(what), smallest_eigenvalue(smallest) {}
  double smallest_eigenvalue;
};

class ConvergenceError : public std::runtime_error {
public:
  ConvergenceError(const std::string& what, double residual) : std::runtime_error(what), residual(residual) {}
  double residual;
};

/// Matrix of the information operator (1/T) I* I on the real-parametrised basis.
struct OperatorGram {
  BasisPtr basis;
  Eigen::MatrixXd G;
  double T = 0.0;
  double nu = 0.0;
  std::uint64_t background_hash = 0;

  std::size_t dim() const { return std::size_t(G.rows()); }
  DivFreeCoeffs apply(const DivFreeCoeffs& h) const;
  Eigen::VectorXd eigenvalues() const;  // ascending
};

/// G = P^T P / T, symmetrised; throws NotPositiveDefinite if min eigenvalue <= 0.
OperatorGram assemble_gram(const PropagatorMatrix& P, double T, double nu);

/// Same quadratic form accumulated on the fly over every solver node
/// (trapezoid weights), without storing the propagator.
OperatorGram assemble_gram_streaming(const LinearFlowConfig& config,
                                     kernels::Exec exec = kernels::Exec::parallel);

/// K = T G - diag(L*L symbol): the Fredholm remainder.
Eigen::MatrixXd compact_remainder(const OperatorGram& gram);
Eigen::MatrixXd compact_remainder(const PropagatorMatrix& P, double T, double nu);

/// Operator norms of K and L*L restricted to dyadic bands 2^m <= |k| < 2^{m+1}.
struct BandDiagnostic {
  int band = 0;
  std::size_t dim = 0;
  double remainder_norm = 0.0;
  double heat_norm = 0.0;
  bool complete = false;  // every lattice point of the band lies inside the truncation
  double ratio() const { return remainder_norm / heat_norm; }
};
std::vector<BandDiagnostic> band_diagnostics(const Eigen::MatrixXd& K, const Basis& basis, double T, double nu);

struct InvertOptions {
  enum class Method { automatic, cg, dense };
  double tol = 1e-10;
  std::size_t max_iter = 0;  // 0: 10 * dim + 100
  Method method = Method::automatic;  // dense for dim <= 256, CG beyond
};

struct CgReport {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

/// Conjugate gradients on an SPD matrix; throws ConvergenceError past max_iter.
Eigen::VectorXd conjugate_gradient(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double tol,
                                   std::size_t max_iter, CgReport* report = nullptr);

/// Solves gram x = h.
DivFreeCoeffs invert_info_op(const OperatorGram& gram, const DivFreeCoeffs& h, const InvertOptions& options = {});

/// Truncated limit Gaussian N(0, G^{-1}) with lower-triangular factor F F^T = G^{-1}.
struct LimitGaussianSpec {
  OperatorGram gram;
  Eigen::MatrixXd factor;

  static LimitGaussianSpec from_gram(OperatorGram gram);
  Eigen::MatrixXd covariance() const { return factor * factor.transpose(); }
};

DivFreeCoeffs sample_limit_initial(const LimitGaussianSpec& spec, RandomSource& rng);

/// Draws the initial condition and evolves it along the background of `config`;
/// returns the states with t_min <= t <= t_max.
Trajectory sample_limit_process(const LimitGaussianSpec& spec, const LinearFlowConfig& config, double t_min,
                                double t_max, RandomSource& rng);

}  // namespace nsbayes
