#pragma once

#include <cmath>
#include <vector>

#include "nsbayes/spectral.hpp"

namespace nsbayes::testing {

/// Random field with i.i.d. N(0, 1) real coordinates damped by lambda^{-decay/2}.
inline DivFreeCoeffs random_field(const BasisPtr& basis, RandomSource& rng, double decay = 0.0) {
  DivFreeCoeffs u(basis);
  for (std::size_t p = 0; p < u.pairs(); ++p) {
    const double s = std::pow(basis->pair(p).lambda / basis->pair(0).lambda, -decay / 2.0);
    u[p] = s * cplx(rng.gaussian(), rng.gaussian());
  }
  return u;
}

/// Batch-means standard error of the mean of an autocorrelated series.
template <class V>
double batch_se(const V& x, int batches = 50) {
  const auto n = x.size() / batches;
  double mean = 0.0;
  std::vector<double> b(std::size_t(batches), 0.0);
  for (int k = 0; k < batches; ++k) {
    for (decltype(x.size()) i = 0; i < n; ++i) b[std::size_t(k)] += x[k * n + i];
    b[std::size_t(k)] /= double(n);
    mean += b[std::size_t(k)] / batches;
  }
  double v = 0.0;
  for (double m : b) v += (m - mean) * (m - mean);
  return std::sqrt(v / (batches - 1) / batches);
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace nsbayes::testing
