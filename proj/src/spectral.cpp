#include "nsbayes/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <utility>

#include "nsbayes/fft.hpp"

namespace nsbayes {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;

bool lattice_less(int a1, int a2, int b1, int b2) {
  const int na = a1 * a1 + a2 * a2;
  const int nb = b1 * b1 + b2 * b2;
  if (na != nb) return na < nb;
  if (a1 != b1) return a1 < b1;
  return a2 < b2;
}

bool is_representative(int k1, int k2) { return k1 > 0 || (k1 == 0 && k2 > 0); }

bool negation_closed(const std::vector<WaveIndex>& pts) {
  std::set<std::pair<int, int>> s;
  for (const auto& w : pts) s.emplace(w.k1, w.k2);
  return std::all_of(pts.begin(), pts.end(),
                     [&](const WaveIndex& w) { return s.count({-w.k1, -w.k2}) > 0; });
}

}  // namespace

std::vector<WaveIndex> enumerate_lattice(std::size_t J) {
  if (J == 0) throw std::invalid_argument("enumerate_lattice: J must be >= 1");
  int radius = static_cast<int>(std::ceil(std::sqrt(double(J) / std::numbers::pi))) + 2;
  std::vector<std::pair<int, int>> pts;
  for (;;) {
    pts.clear();
    for (int k1 = -radius; k1 <= radius; ++k1)
      for (int k2 = -radius; k2 <= radius; ++k2) {
        const int r2 = k1 * k1 + k2 * k2;
        if (r2 > 0 && r2 <= radius * radius) pts.emplace_back(k1, k2);
      }
    if (pts.size() >= J) break;
    radius *= 2;
  }
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return lattice_less(a.first, a.second, b.first, b.second);
  });
  std::vector<WaveIndex> out(J);
  for (std::size_t j = 0; j < J; ++j) {
    out[j] = {j + 1, pts[j].first, pts[j].second, laplacian_eigenvalue(pts[j].first, pts[j].second)};
  }
  return out;
}

Basis::Basis(std::size_t J) {
  const auto lattice = enumerate_lattice(J);
  if (!negation_closed(lattice))
    throw std::invalid_argument("Basis: first " + std::to_string(J) +
                                " lattice points are not closed under k -> -k; use " +
                                std::to_string(closed_truncation(J)));
  for (const auto& w : lattice) {
    max_component_ = std::max({max_component_, std::abs(w.k1), std::abs(w.k2)});
    if (!is_representative(w.k1, w.k2)) continue;
    PairMode m;
    m.k1 = w.k1;
    m.k2 = w.k2;
    m.norm = std::sqrt(double(w.k1 * w.k1 + w.k2 * w.k2));
    m.lambda = w.lambda;
    m.c = {-w.k2 / m.norm, w.k1 / m.norm};
    pairs_.push_back(m);
  }
  const int side = 2 * max_component_ + 1;
  lookup_.assign(std::size_t(side) * side, 0);
  for (std::size_t p = 0; p < pairs_.size(); ++p) {
    const auto& m = pairs_[p];
    lookup_[std::size_t(m.k1 + max_component_) * side + (m.k2 + max_component_)] = int(p) + 1;
    lookup_[std::size_t(-m.k1 + max_component_) * side + (-m.k2 + max_component_)] = -(int(p) + 1);
  }
}

std::shared_ptr<const Basis> Basis::with_modes(std::size_t J) {
  return std::shared_ptr<const Basis>(new Basis(J));
}

std::shared_ptr<const Basis> Basis::with_radius(int radius) {
  if (radius < 1) throw std::invalid_argument("Basis::with_radius: radius must be >= 1");
  std::size_t count = 0;
  for (int k1 = -radius; k1 <= radius; ++k1)
    for (int k2 = -radius; k2 <= radius; ++k2) {
      const int r2 = k1 * k1 + k2 * k2;
      if (r2 > 0 && r2 <= radius * radius) ++count;
    }
  return with_modes(count);
}

std::size_t Basis::closed_truncation(std::size_t J) {
  const auto lattice = enumerate_lattice(J + 64);
  std::set<std::pair<int, int>> taken;
  std::size_t unmatched = 0;
  for (std::size_t j = 0; j < lattice.size(); ++j) {
    const auto& w = lattice[j];
    taken.emplace(w.k1, w.k2);
    if (taken.count({-w.k1, -w.k2}))
      --unmatched;
    else
      ++unmatched;
    if (j + 1 >= J && unmatched == 0) return j + 1;
  }
  return closed_truncation(J + 64);
}

bool Basis::locate(int k1, int k2, std::size_t& pair, bool& negated) const {
  if (std::abs(k1) > max_component_ || std::abs(k2) > max_component_) return false;
  const int side = 2 * max_component_ + 1;
  const int v = lookup_[std::size_t(k1 + max_component_) * side + (k2 + max_component_)];
  if (v == 0) return false;
  negated = v < 0;
  pair = std::size_t(std::abs(v) - 1);
  return true;
}

// ---------------------------------------------------------------------------

DivFreeCoeffs::DivFreeCoeffs(BasisPtr basis) : basis_(std::move(basis)), coeffs_(basis_->pairs()) {}

DivFreeCoeffs::DivFreeCoeffs(BasisPtr basis, std::vector<cplx> coeffs)
    : basis_(std::move(basis)), coeffs_(std::move(coeffs)) {
  if (coeffs_.size() != basis_->pairs())
    throw std::invalid_argument("DivFreeCoeffs: coefficient count does not match basis");
}

DivFreeCoeffs DivFreeCoeffs::from_real(BasisPtr basis, const Eigen::Ref<const Eigen::VectorXd>& xi) {
  if (std::size_t(xi.size()) != basis->real_dim())
    throw std::invalid_argument("DivFreeCoeffs::from_real: dimension mismatch");
  DivFreeCoeffs u(std::move(basis));
  for (std::size_t p = 0; p < u.pairs(); ++p) u.coeffs_[p] = cplx(xi[2 * p], xi[2 * p + 1]) / kSqrt2;
  return u;
}

Eigen::VectorXd DivFreeCoeffs::to_real() const {
  Eigen::VectorXd xi(modes());
  to_real(xi);
  return xi;
}

void DivFreeCoeffs::to_real(Eigen::Ref<Eigen::VectorXd> out) const {
  for (std::size_t p = 0; p < coeffs_.size(); ++p) {
    out[2 * p] = kSqrt2 * coeffs_[p].real();
    out[2 * p + 1] = kSqrt2 * coeffs_[p].imag();
  }
}

DivFreeCoeffs DivFreeCoeffs::unit(BasisPtr basis, std::size_t real_index) {
  DivFreeCoeffs u(std::move(basis));
  const double v = 1.0 / kSqrt2;
  u.coeffs_.at(real_index / 2) = (real_index % 2 == 0) ? cplx(v, 0.0) : cplx(0.0, v);
  return u;
}

cplx DivFreeCoeffs::coefficient(int k1, int k2) const {
  std::size_t p;
  bool neg;
  if (!basis_->locate(k1, k2, p, neg)) return {};
  return neg ? -std::conj(coeffs_[p]) : coeffs_[p];
}

void DivFreeCoeffs::check_same(const DivFreeCoeffs& o) const {
  if (pairs() != o.pairs()) throw std::invalid_argument("DivFreeCoeffs: truncation mismatch");
}

double DivFreeCoeffs::dot(const DivFreeCoeffs& o) const {
  check_same(o);
  double s = 0.0;
  for (std::size_t p = 0; p < coeffs_.size(); ++p) s += (std::conj(coeffs_[p]) * o.coeffs_[p]).real();
  return 2.0 * s;
}

double DivFreeCoeffs::l2_norm() const { return std::sqrt(dot(*this)); }

bool DivFreeCoeffs::is_zero() const {
  return std::all_of(coeffs_.begin(), coeffs_.end(), [](cplx c) { return c == cplx{}; });
}

DivFreeCoeffs& DivFreeCoeffs::operator+=(const DivFreeCoeffs& o) {
  check_same(o);
  for (std::size_t p = 0; p < coeffs_.size(); ++p) coeffs_[p] += o.coeffs_[p];
  return *this;
}

DivFreeCoeffs& DivFreeCoeffs::operator-=(const DivFreeCoeffs& o) {
  check_same(o);
  for (std::size_t p = 0; p < coeffs_.size(); ++p) coeffs_[p] -= o.coeffs_[p];
  return *this;
}

DivFreeCoeffs& DivFreeCoeffs::operator*=(double s) {
  for (auto& c : coeffs_) c *= s;
  return *this;
}

DivFreeCoeffs& DivFreeCoeffs::axpy(double s, const DivFreeCoeffs& o) {
  check_same(o);
  for (std::size_t p = 0; p < coeffs_.size(); ++p) coeffs_[p] += s * o.coeffs_[p];
  return *this;
}

double ScalarSpectrum::l2_norm() const {
  double s = 0.0;
  for (const auto& v : values) s += std::norm(v);
  return std::sqrt(2.0 * s);
}

double ScalarSpectrum::gradient_norm() const {
  double s = 0.0;
  for (std::size_t p = 0; p < values.size(); ++p) s += basis->pair(p).lambda * std::norm(values[p]);
  return std::sqrt(2.0 * s);
}

// ---------------------------------------------------------------------------

DivFreeCoeffs leray_project(const VectorSpectrum& u) {
  DivFreeCoeffs out(u.basis);
  for (std::size_t p = 0; p < out.pairs(); ++p) {
    const auto& c = u.basis->pair(p).c;
    out[p] = c[0] * u.values[p][0] + c[1] * u.values[p][1];
  }
  return out;
}

VectorSpectrum to_vector_spectrum(const DivFreeCoeffs& u) {
  VectorSpectrum out(u.basis_ptr());
  for (std::size_t p = 0; p < u.pairs(); ++p) {
    const auto& c = u.basis().pair(p).c;
    out.values[p] = {c[0] * u[p], c[1] * u[p]};
  }
  return out;
}

double sobolev_norm(const DivFreeCoeffs& u, double a) {
  double s = 0.0;
  for (std::size_t p = 0; p < u.pairs(); ++p) s += std::pow(u.basis().pair(p).lambda, a) * std::norm(u[p]);
  return std::sqrt(2.0 * s);
}

DivFreeCoeffs fractional_laplacian(const DivFreeCoeffs& u, double s) {
  DivFreeCoeffs out = u;
  for (std::size_t p = 0; p < u.pairs(); ++p) out[p] *= std::pow(u.basis().pair(p).lambda, s);
  return out;
}

double GaussianPriorSpec::sd(std::size_t p) const {
  return rho * std::pow(basis->pair(p).lambda, -alpha / 2.0);
}

double GaussianPriorSpec::expected_l2_squared() const {
  double s = 0.0;
  for (std::size_t p = 0; p < basis->pairs(); ++p) s += 2.0 * std::pow(basis->pair(p).lambda, -alpha);
  return rho * rho * s;
}

DivFreeCoeffs sample_gaussian_series(const GaussianPriorSpec& spec, RandomSource& rng) {
  DivFreeCoeffs u(spec.basis);
  for (std::size_t p = 0; p < u.pairs(); ++p) {
    const double re = rng.gaussian();
    const double im = rng.gaussian();
    u[p] = spec.sd(p) * cplx(re, im) / kSqrt2;
  }
  return u;
}

Vec2 evaluate_at(const DivFreeCoeffs& u, Point2 x) {
  Vec2 v{0.0, 0.0};
  for (std::size_t p = 0; p < u.pairs(); ++p) {
    const auto& m = u.basis().pair(p);
    const double phase = kTwoPi * (m.k1 * x.x1 + m.k2 * x.x2);
    const double s = 2.0 * (u[p].real() * std::cos(phase) - u[p].imag() * std::sin(phase));
    v[0] += s * m.c[0];
    v[1] += s * m.c[1];
  }
  return v;
}

std::vector<Vec2> evaluate_at(const DivFreeCoeffs& u, std::span<const Point2> points) {
  std::vector<Vec2> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = evaluate_at(u, points[i]);
  return out;
}

GridField to_grid(const DivFreeCoeffs& u, int n) {
  if (n < u.basis().min_grid())
    throw AliasingError("to_grid: resolution " + std::to_string(n) + " aliases modes up to " +
                        std::to_string(u.basis().max_component()) + " (need >= " +
                        std::to_string(u.basis().min_grid()) + ")");
  GridTransform fft(n);
  GridField g(n);
  for (int comp = 0; comp < 2; ++comp) {
    auto spec = fft.spectrum();
    std::fill(spec.begin(), spec.end(), cplx{});
    for (std::size_t p = 0; p < u.pairs(); ++p) {
      const auto& m = u.basis().pair(p);
      const cplx v = u[p] * m.c[comp];
      bool conj;
      std::size_t s = fft.slot(m.k1, m.k2, conj);
      spec[s] = conj ? std::conj(v) : v;
      if (m.k2 == 0) {
        s = fft.slot(-m.k1, 0, conj);
        spec[s] = std::conj(v);
      }
    }
    fft.to_physical();
    auto phys = fft.physical();
    std::copy(phys.begin(), phys.end(), comp == 0 ? g.u1.begin() : g.u2.begin());
  }
  return g;
}

VectorSpectrum from_grid(const GridField& g, const BasisPtr& basis) {
  if (g.n < basis->min_grid())
    throw AliasingError("from_grid: resolution " + std::to_string(g.n) + " too small for truncation");
  GridTransform fft(g.n);
  VectorSpectrum out(basis);
  const double scale = 1.0 / (double(g.n) * g.n);
  for (int comp = 0; comp < 2; ++comp) {
    const auto& src = comp == 0 ? g.u1 : g.u2;
    std::copy(src.begin(), src.end(), fft.physical().begin());
    fft.to_spectral();
    auto spec = fft.spectrum();
    for (std::size_t p = 0; p < basis->pairs(); ++p) {
      const auto& m = basis->pair(p);
      bool conj;
      const std::size_t s = fft.slot(m.k1, m.k2, conj);
      out.values[p][comp] = (conj ? std::conj(spec[s]) : spec[s]) * scale;
    }
  }
  return out;
}

}  // namespace nsbayes
