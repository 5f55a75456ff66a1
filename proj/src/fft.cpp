#include "nsbayes/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <stdexcept>
#include <utility>

namespace nsbayes {

namespace {
// FFTW planning is not thread-safe; execution on distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

GridTransform::GridTransform(int n) : n_(n) {
  if (n < 2) throw std::invalid_argument("GridTransform: resolution must be >= 2");
  real_ = fftw_alloc_real(grid_size());
  complex_ = reinterpret_cast<std::complex<double>*>(fftw_alloc_complex(half_size()));
  if (!real_ || !complex_) {
    release();
    throw std::bad_alloc();
  }
  std::lock_guard lock(planner_mutex());
  auto* c = reinterpret_cast<fftw_complex*>(complex_);
  forward_ = fftw_plan_dft_r2c_2d(n, n, real_, c, FFTW_ESTIMATE);
  backward_ = fftw_plan_dft_c2r_2d(n, n, c, real_, FFTW_ESTIMATE);
}

GridTransform::~GridTransform() { release(); }

GridTransform::GridTransform(GridTransform&& other) noexcept
    : n_(other.n_),
      real_(std::exchange(other.real_, nullptr)),
      complex_(std::exchange(other.complex_, nullptr)),
      forward_(std::exchange(other.forward_, nullptr)),
      backward_(std::exchange(other.backward_, nullptr)) {}

GridTransform& GridTransform::operator=(GridTransform&& other) noexcept {
  if (this != &other) {
    release();
    n_ = other.n_;
    real_ = std::exchange(other.real_, nullptr);
    complex_ = std::exchange(other.complex_, nullptr);
    forward_ = std::exchange(other.forward_, nullptr);
    backward_ = std::exchange(other.backward_, nullptr);
  }
  return *this;
}

void GridTransform::release() {
  {
    std::lock_guard lock(planner_mutex());
    if (forward_) fftw_destroy_plan(static_cast<fftw_plan>(forward_));
    if (backward_) fftw_destroy_plan(static_cast<fftw_plan>(backward_));
  }
  forward_ = backward_ = nullptr;
  if (real_) fftw_free(real_);
  if (complex_) fftw_free(complex_);
  real_ = nullptr;
  complex_ = nullptr;
}

std::span<std::complex<double>> GridTransform::spectrum() { return {complex_, half_size()}; }
std::span<double> GridTransform::physical() { return {real_, grid_size()}; }

void GridTransform::to_spectral() { fftw_execute(static_cast<fftw_plan>(forward_)); }
void GridTransform::to_physical() { fftw_execute(static_cast<fftw_plan>(backward_)); }

std::size_t GridTransform::slot(int k1, int k2, bool& conjugate) const {
  conjugate = k2 < 0;
  if (conjugate) {
    k1 = -k1;
    k2 = -k2;
  }
  const int m1 = ((k1 % n_) + n_) % n_;
  return static_cast<std::size_t>(m1) * (n_ / 2 + 1) + static_cast<std::size_t>(k2);
}

}  // namespace nsbayes
