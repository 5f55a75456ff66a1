#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "nsbayes/rng.hpp"

namespace nsbayes {

using cplx = std::complex<double>;
using Vec2 = std::array<double, 2>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Raised when a grid is too coarse for the retained modes.
class AliasingError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

struct Point2 {
  double x1 = 0.0;
  double x2 = 0.0;
};

/// One lattice point of Z^2 \ {0} with its rank and Laplacian eigenvalue.
struct WaveIndex {
  std::size_t rank = 0;  // 1-based
  int k1 = 0;
  int k2 = 0;
  double lambda = 0.0;  // (2 pi |k|)^2
};

/// First J lattice points ordered by |k|, ties broken lexicographically on (k1, k2).
std::vector<WaveIndex> enumerate_lattice(std::size_t J);

/// Eigenvalue of -Laplacian for wave vector k.
inline double laplacian_eigenvalue(int k1, int k2) {
  return kTwoPi * kTwoPi * static_cast<double>(k1 * k1 + k2 * k2);
}

/// A conjugate pair {k, -k}, stored through its representative k
/// (k1 > 0, or k1 == 0 and k2 > 0).
struct PairMode {
  int k1 = 0;
  int k2 = 0;
  double norm = 0.0;    // |k|
  double lambda = 0.0;  // (2 pi |k|)^2
  Vec2 c{};             // (-k2, k1) / |k|
};

/// Truncated divergence-free basis {e_j = c_j exp(2 pi i k_j . x)} on the unit torus.
///
/// The retained lattice set must be closed under k -> -k so that real fields
/// are representable; each pair is stored once. The real dimension of the
/// truncated space equals the number of lattice points J.
class Basis {
public:
  /// First J lattice points; throws std::invalid_argument if that set is not
  /// closed under negation (see closed_truncation()).
  static std::shared_ptr<const Basis> with_modes(std::size_t J);
  /// All lattice points with 1 <= |k| <= radius.
  static std::shared_ptr<const Basis> with_radius(int radius);
  /// Smallest J' >= J for which the first J' lattice points are negation-closed.
  static std::size_t closed_truncation(std::size_t J);

  std::size_t modes() const { return 2 * pairs_.size(); }
  std::size_t pairs() const { return pairs_.size(); }
  std::size_t real_dim() const { return modes(); }
  int max_component() const { return max_component_; }

  const PairMode& pair(std::size_t p) const { return pairs_[p]; }
  std::span<const PairMode> all_pairs() const { return pairs_; }

  /// Pair index of k or -k; returns false if k is not retained.
  bool locate(int k1, int k2, std::size_t& pair, bool& negated) const;

  /// Smallest grid resolution that represents every retained mode unaliased.
  int min_grid() const { return 2 * max_component_ + 1; }
  /// Smallest grid resolution for alias-free quadratic products.
  int min_dealiased_grid() const { return 3 * max_component_ + 1; }

private:
  explicit Basis(std::size_t J);

  std::vector<PairMode> pairs_;
  int max_component_ = 0;
  std::vector<int> lookup_;  // signed (pair+1), 0 when absent
};

using BasisPtr = std::shared_ptr<const Basis>;

/// Real, divergence-free, mean-zero field in the truncated basis.
///
/// Stores the complex coefficient a_k of e_k for each representative k.
/// Since c_{-k} = -c_k, realness forces a_{-k} = -conj(a_k); the vector Fourier
/// coefficients a_k c_k then satisfy the usual conjugacy. Real coordinates are
/// (sqrt2 Re a_k, sqrt2 Im a_k) per pair; in them the L2 pairing is Euclidean.
class DivFreeCoeffs {
public:
  DivFreeCoeffs() = default;
  explicit DivFreeCoeffs(BasisPtr basis);
  DivFreeCoeffs(BasisPtr basis, std::vector<cplx> coeffs);

  static DivFreeCoeffs from_real(BasisPtr basis, const Eigen::Ref<const Eigen::VectorXd>& xi);
  Eigen::VectorXd to_real() const;
  void to_real(Eigen::Ref<Eigen::VectorXd> out) const;

  /// Single unit real coordinate direction (an L2-normalised real basis field).
  static DivFreeCoeffs unit(BasisPtr basis, std::size_t real_index);

  const Basis& basis() const { return *basis_; }
  const BasisPtr& basis_ptr() const { return basis_; }
  std::size_t modes() const { return basis_ ? basis_->modes() : 0; }
  std::size_t pairs() const { return coeffs_.size(); }

  cplx& operator[](std::size_t p) { return coeffs_[p]; }
  const cplx& operator[](std::size_t p) const { return coeffs_[p]; }
  std::span<cplx> data() { return coeffs_; }
  std::span<const cplx> data() const { return coeffs_; }

  /// Coefficient of e_k for any retained k (including non-representatives).
  cplx coefficient(int k1, int k2) const;

  double dot(const DivFreeCoeffs& other) const;
  double l2_norm() const;
  bool is_zero() const;

  DivFreeCoeffs& operator+=(const DivFreeCoeffs& o);
  DivFreeCoeffs& operator-=(const DivFreeCoeffs& o);
  DivFreeCoeffs& operator*=(double s);
  /// this += s * o
  DivFreeCoeffs& axpy(double s, const DivFreeCoeffs& o);

  friend DivFreeCoeffs operator+(DivFreeCoeffs a, const DivFreeCoeffs& b) { return a += b; }
  friend DivFreeCoeffs operator-(DivFreeCoeffs a, const DivFreeCoeffs& b) { return a -= b; }
  friend DivFreeCoeffs operator*(double s, DivFreeCoeffs a) { return a *= s; }

private:
  void check_same(const DivFreeCoeffs& o) const;

  BasisPtr basis_;
  std::vector<cplx> coeffs_;
};

/// Per-mode complex 2-vector Fourier coefficients of a real (not necessarily
/// divergence-free) field on the retained lattice, stored at representatives.
struct VectorSpectrum {
  BasisPtr basis;
  std::vector<std::array<cplx, 2>> values;

  explicit VectorSpectrum(BasisPtr b) : basis(std::move(b)), values(basis->pairs()) {}
};

/// Scalar field Fourier coefficients at representatives (value at -k is the conjugate).
struct ScalarSpectrum {
  BasisPtr basis;
  std::vector<cplx> values;

  explicit ScalarSpectrum(BasisPtr b) : basis(std::move(b)), values(basis->pairs()) {}
  double l2_norm() const;
  /// || grad f ||_{L2}
  double gradient_norm() const;
};

/// Physical-space field on the uniform n x n grid (row-major, i along x1).
struct GridField {
  int n = 0;
  std::vector<double> u1;
  std::vector<double> u2;

  GridField() = default;
  explicit GridField(int n_) : n(n_), u1(std::size_t(n_) * n_), u2(std::size_t(n_) * n_) {}
  Point2 node(int i, int j) const { return {double(i) / n, double(j) / n}; }
};

/// Leray projection: keeps the component of each vector coefficient along c_k.
DivFreeCoeffs leray_project(const VectorSpectrum& u);
/// Vector coefficients a_k c_k of a divergence-free field.
VectorSpectrum to_vector_spectrum(const DivFreeCoeffs& u);

/// Homogeneous Sobolev norm sqrt(sum_k lambda_k^a |a_k|^2) over all retained k.
double sobolev_norm(const DivFreeCoeffs& u, double a);
/// (-Laplacian)^s applied spectrally.
DivFreeCoeffs fractional_laplacian(const DivFreeCoeffs& u, double s);

/// Gaussian series prior N(0, rho^2 A^{-alpha}) truncated to a basis.
struct GaussianPriorSpec {
  double alpha = 3.0;
  double rho = 1.0;
  BasisPtr basis;

  /// Standard deviation of each real coordinate of pair p.
  double sd(std::size_t p) const;
  /// Expected squared L2 norm: rho^2 sum_j lambda_j^-alpha over retained lattice points.
  double expected_l2_squared() const;
};

DivFreeCoeffs sample_gaussian_series(const GaussianPriorSpec& spec, RandomSource& rng);

/// Pointwise evaluation by direct summation over retained modes.
std::vector<Vec2> evaluate_at(const DivFreeCoeffs& u, std::span<const Point2> points);
Vec2 evaluate_at(const DivFreeCoeffs& u, Point2 x);

/// Synthesis on an n x n grid; throws AliasingError if n < basis.min_grid().
GridField to_grid(const DivFreeCoeffs& u, int n);
/// Analysis of a grid field onto the retained lattice.
VectorSpectrum from_grid(const GridField& g, const BasisPtr& basis);

}  // namespace nsbayes
