#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "nsbayes/fft.hpp"
#include "nsbayes/spectral.hpp"

namespace nsbayes {

/// Raised when a time march leaves the admissible range (blow-up guard).
class SolverError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class TimeScheme { imex_cn, etd_rk2 };

std::string to_string(TimeScheme s);
TimeScheme scheme_from_string(const std::string& s);

/// Forward solver settings for du/dt + nu A u + B[u,u] = f on [0, T].
struct ForwardConfig {
  double nu = 0.1;
  double T = 1.0;
  double dt = 1e-2;
  BasisPtr basis;
  int n = 0;  // dealiased grid; 0 picks a default from the basis
  TimeScheme scheme = TimeScheme::imex_cn;
  bool advection = true;  // false freezes B to zero (linear surrogate model)
  double blowup_ceiling = 1e6;

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
  std::size_t steps() const;
  int grid() const;
};

/// Smallest 2^a 3^b 5^c >= the dealiasing bound of `basis`.
int default_grid(const Basis& basis);

/// Solution states on the uniform grid t_m = m dt, m = 0..M.
class Trajectory {
public:
  Trajectory() = default;
  Trajectory(ForwardConfig config, std::vector<double> times, std::vector<DivFreeCoeffs> states);

  const ForwardConfig& config() const { return config_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<DivFreeCoeffs>& states() const { return states_; }
  std::size_t size() const { return states_.size(); }
  const DivFreeCoeffs& state(std::size_t m) const { return states_[m]; }
  const DivFreeCoeffs& final_state() const { return states_.back(); }
  double start() const { return times_.front(); }
  double end() const { return times_.back(); }
  const BasisPtr& basis() const { return states_.front().basis_ptr(); }

  /// Linear interpolation in time between stored nodes; t must lie in [start, end].
  DivFreeCoeffs at(double t) const;
  void at(double t, DivFreeCoeffs& out) const;
  bool is_zero() const { return zero_; }
  /// FNV-1a hash of times and coefficients.
  std::uint64_t hash() const;

private:
  ForwardConfig config_;
  std::vector<double> times_;
  std::vector<DivFreeCoeffs> states_;
  bool zero_ = true;
};

/// Pseudospectral evaluation of advection terms on a dealiased grid.
///
/// Products are formed on the n x n grid (n >= 3 kmax + 1 so quadratic terms
/// do not alias into retained modes) and truncated back to the basis.
/// Owns FFT buffers; one workspace per thread.
class AdvectionWorkspace {
public:
  AdvectionWorkspace(BasisPtr basis, int n);

  int n() const { return fft_.n(); }
  const BasisPtr& basis() const { return basis_; }

  /// (u . grad) v truncated to the retained lattice, without projection.
  VectorSpectrum advect(const DivFreeCoeffs& u, const DivFreeCoeffs& v);
  /// B[u, v] = P[(u . grad) v].
  DivFreeCoeffs bilinear(const DivFreeCoeffs& u, const DivFreeCoeffs& v);

  /// Physical velocity components of u.
  void velocity(const DivFreeCoeffs& u, double* u1, double* u2);
  /// grad[m][i] = d_m v_i on the grid (four arrays of n*n).
  void gradient(const DivFreeCoeffs& v, double* d1v1, double* d2v1, double* d1v2, double* d2v2);
  /// Forward transform of a grid vector field, truncation and Leray projection.
  DivFreeCoeffs project(const double* w1, const double* w2);
  VectorSpectrum analyse(const double* w1, const double* w2);

private:
  void synthesize(const DivFreeCoeffs& u, int comp, int deriv, double* out);

  BasisPtr basis_;
  GridTransform fft_;
  std::vector<double> scratch_;
};

DivFreeCoeffs bilinear_B(const DivFreeCoeffs& u, const DivFreeCoeffs& v, int n);
/// (u . grad) u without the Leray projection.
VectorSpectrum advection_functional(const DivFreeCoeffs& u, int n);
/// Scalar vorticity -d2 u1 + d1 u2.
ScalarSpectrum vorticity(const DivFreeCoeffs& u);

/// Time march of the projected Navier-Stokes system; u(0) = theta exactly.
Trajectory solve_ns(const DivFreeCoeffs& theta, const DivFreeCoeffs& f, const ForwardConfig& config);

/// Discrete energy balance defect per step, evaluated at the step midpoint:
/// (|u+|^2 - |u|^2)/(2 dt) - (<f, ubar> - nu |ubar|^2_{H1}), ubar = (u + u+)/2.
std::vector<double> energy_residuals(const Trajectory& traj, const DivFreeCoeffs& f);

/// Taylor-Green vortex (-cos 2pi x1 sin 2pi x2, sin 2pi x1 cos 2pi x2) scaled by amplitude.
DivFreeCoeffs taylor_green(const BasisPtr& basis, double amplitude = 1.0);

}  // namespace nsbayes
