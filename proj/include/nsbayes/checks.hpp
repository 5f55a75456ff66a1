#pragma once

// Module-level identity checks shared by the operator-tests command and the
// acceptance binary. Each returns raw measurements; thresholds live with the caller.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "nsbayes/information.hpp"
#include "nsbayes/linear_flows.hpp"
#include "nsbayes/navier_stokes.hpp"

namespace nsbayes::checks {

/// Field with i.i.d. N(0, 1) real coordinates scaled by (lambda / lambda_1)^{-decay/2}.
DivFreeCoeffs decaying_field(const BasisPtr& basis, RandomSource& rng, double decay);

struct BilinearResult {
  double skew = 0.0;       // max |<B[u,v],v>| / (|u| |v|_H1 |v|)
  double enstrophy = 0.0;  // max |<B[v,v],Av>| / (|v|_H1^2 |v|_H2)
};
BilinearResult bilinear_identities(int radius, int fields, std::uint64_t seed);

/// Max per-mode residual of Delta L*L h + h/(2 nu) - S_2T h/(2 nu), relative to |h_j| / nu.
double heat_identity_residual(int radius, double nu, double T, int fields, std::uint64_t seed);

/// Relative L2 error of the Taylor-Green vortex after time T.
double taylor_green_error(int radius, double nu, double T, double dt, TimeScheme scheme);

struct RemainderResult {
  std::vector<double> eps;
  std::vector<double> remainder;  // sup_t |u(theta + eps h) - u(theta) - eps U[h]|
  double slope = 0.0;             // log-log slope between the first and last eps
};
RemainderResult linearization_remainder(int radius, double nu, double T, double dt, const std::vector<double>& eps,
                                        std::uint64_t seed);

/// max over random pairs of |<Ph, w> - <h, P^T w>| / (|Ph| |w|).
double adjoint_defect(int radius, double nu, double T, double dt, int samples, int pairs, std::uint64_t seed);

struct HeatGramResult {
  double diag_defect = 0.0;  // max |G_jj - (1 - e^{-2 nu lambda T}) / (2 nu lambda T)|
  double offdiag = 0.0;
  double min_eigenvalue = 0.0;
  OperatorGram gram;
};
HeatGramResult heat_gram(int radius, double nu, double T, double dt);

/// Background of the named kind ("zero", "taylor-green", "smooth-random") on the solver grid.
struct BackgroundSpec {
  std::string kind = "smooth-random";
  double amplitude = 1.0;  // TG amplitude, or L2 norm of the smooth random field
  double decay = 4.0;
  std::uint64_t seed = 1;
};
std::shared_ptr<const Trajectory> make_background(const BasisPtr& basis, const BackgroundSpec& spec, double nu,
                                                  double T, double dt);

struct FredholmResult {
  std::vector<BandDiagnostic> bands;
  double min_eigenvalue = 0.0;
  bool decreasing = false;  // ratio strictly decreasing over the complete bands
  std::size_t complete_bands = 0;
  OperatorGram gram;
};
FredholmResult fredholm_bands(int radius, double nu, double T, double dt, const BackgroundSpec& background);

}  // namespace nsbayes::checks
