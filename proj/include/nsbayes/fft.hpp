#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace nsbayes {

/// Real 2D FFT pair on an n x n periodic grid (FFTW r2c / c2r).
///
/// Grid node (i, j) sits at x = (i/n, j/n), stored row-major at i*n + j.
/// The half spectrum has n x (n/2 + 1) entries; entry (m1, m2) holds the
/// wave vector (m1 mod n, m2) with 0 <= m2 <= n/2. Transforms are
/// unnormalised: to_spectral() followed by to_physical() scales by n*n.
///
/// Each instance owns its buffers and plans; one instance per worker.
class GridTransform {
public:
  explicit GridTransform(int n);
  ~GridTransform();
  GridTransform(const GridTransform&) = delete;
  GridTransform& operator=(const GridTransform&) = delete;
  GridTransform(GridTransform&& other) noexcept;
  GridTransform& operator=(GridTransform&& other) noexcept;

  int n() const { return n_; }
  std::size_t half_size() const { return static_cast<std::size_t>(n_) * (n_ / 2 + 1); }
  std::size_t grid_size() const { return static_cast<std::size_t>(n_) * n_; }

  std::span<std::complex<double>> spectrum();
  std::span<double> physical();

  /// physical() -> spectrum(); the physical buffer is preserved.
  void to_spectral();
  /// spectrum() -> physical(); the spectrum buffer is destroyed.
  void to_physical();

  /// Half-spectrum slot of wave vector k. Sets `conjugate` when the slot
  /// stores the value at -k (k2 < 0).
  std::size_t slot(int k1, int k2, bool& conjugate) const;

private:
  void release();

  int n_ = 0;
  double* real_ = nullptr;
  std::complex<double>* complex_ = nullptr;
  void* forward_ = nullptr;
  void* backward_ = nullptr;
};

}  // namespace nsbayes
