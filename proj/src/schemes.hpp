#pragma once

// Per-mode update formulas shared by the nonlinear and linearised marches.
// The stiff term -nu A is diagonal with symbol -nu lambda_k; explicit terms are
// passed in already assembled.

#include <cmath>

#include "nsbayes/spectral.hpp"

namespace nsbayes::detail {

inline double phi1(double z) {
  if (std::abs(z) < 1e-1) {
    return 1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0 + z * z * z * z / 120.0 +
           z * z * z * z * z / 720.0 + z * z * z * z * z * z / 5040.0;
  }
  return std::expm1(z) / z;
}

inline double phi2(double z) {
  if (std::abs(z) < 1e-1) {
    return 0.5 + z / 6.0 + z * z / 24.0 + z * z * z / 120.0 + z * z * z * z / 720.0 +
           z * z * z * z * z / 5040.0 + z * z * z * z * z * z / 40320.0;
  }
  return (std::expm1(z) - z) / (z * z);
}

/// Crank-Nicolson on the diffusion with explicit forcing `rhs`:
/// (a+ - a)/h = -nu lambda (a+ + a)/2 + rhs.
inline void cn_update(DivFreeCoeffs& u, const DivFreeCoeffs& rhs, double h, double nu) {
  for (std::size_t p = 0; p < u.pairs(); ++p) {
    const double z = nu * u.basis().pair(p).lambda * h;
    u[p] = ((1.0 - 0.5 * z) * u[p] + h * rhs[p]) / (1.0 + 0.5 * z);
  }
}

/// CN with the AB2 combination 3/2 now - 1/2 prev.
inline void cn_ab2_update(DivFreeCoeffs& u, const DivFreeCoeffs& now, const DivFreeCoeffs& prev, double h,
                          double nu) {
  for (std::size_t p = 0; p < u.pairs(); ++p) {
    const double z = nu * u.basis().pair(p).lambda * h;
    u[p] = ((1.0 - 0.5 * z) * u[p] + h * (1.5 * now[p] - 0.5 * prev[p])) / (1.0 + 0.5 * z);
  }
}

/// ETD-RK2 predictor: a = e^{Lh} u + h phi1(Lh) N(u).
inline DivFreeCoeffs etd_predict(const DivFreeCoeffs& u, const DivFreeCoeffs& nu_term, double h, double nu) {
  DivFreeCoeffs a = u;
  for (std::size_t p = 0; p < u.pairs(); ++p) {
    const double z = -nu * u.basis().pair(p).lambda * h;
    a[p] = std::exp(z) * u[p] + h * phi1(z) * nu_term[p];
  }
  return a;
}

/// ETD-RK2 corrector: u+ = a + h phi2(Lh) (N(a) - N(u)).
inline void etd_correct(DivFreeCoeffs& a, const DivFreeCoeffs& n_a, const DivFreeCoeffs& n_u, double h,
                        double nu) {
  for (std::size_t p = 0; p < a.pairs(); ++p) {
    const double z = -nu * a.basis().pair(p).lambda * h;
    a[p] += h * phi2(z) * (n_a[p] - n_u[p]);
  }
}

/// Number of substeps in the first-step bootstrap of CN-AB2.
inline constexpr int kBootstrapSubsteps = 10;

}  // namespace nsbayes::detail
