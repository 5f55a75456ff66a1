#include "nsbayes/navier_stokes.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "schemes.hpp"

namespace nsbayes {

std::string to_string(TimeScheme s) { return s == TimeScheme::imex_cn ? "imex-cn" : "etd-rk2"; }

TimeScheme scheme_from_string(const std::string& s) {
  if (s == "imex-cn") return TimeScheme::imex_cn;
  if (s == "etd-rk2") return TimeScheme::etd_rk2;
  throw std::invalid_argument("unknown time scheme '" + s + "' (expected imex-cn or etd-rk2)");
}

int default_grid(const Basis& basis) {
  const int lo = basis.min_dealiased_grid();
  for (int n = std::max(lo, 4);; ++n) {
    int m = n;
    for (int f : {2, 3, 5})
      while (m % f == 0) m /= f;
    if (m == 1) return n;
  }
}

void ForwardConfig::validate() const {
  if (!basis) throw std::invalid_argument("ForwardConfig: basis not set");
  if (!(nu > 0.0)) throw std::invalid_argument("ForwardConfig: nu must be > 0");
  if (!(T > 0.0)) throw std::invalid_argument("ForwardConfig: T must be > 0");
  if (!(dt > 0.0)) throw std::invalid_argument("ForwardConfig: dt must be > 0");
  const double m = std::round(T / dt);
  if (m < 1.0 || std::abs(m * dt - T) > 1e-12 * std::max(1.0, T))
    throw std::invalid_argument("ForwardConfig: dt does not divide T");
  if (n != 0 && n < basis->min_dealiased_grid())
    throw AliasingError("ForwardConfig: grid " + std::to_string(n) + " below dealiasing bound " +
                        std::to_string(basis->min_dealiased_grid()));
}

std::size_t ForwardConfig::steps() const { return static_cast<std::size_t>(std::llround(T / dt)); }

int ForwardConfig::grid() const { return n != 0 ? n : default_grid(*basis); }

// ---------------------------------------------------------------------------

Trajectory::Trajectory(ForwardConfig config, std::vector<double> times, std::vector<DivFreeCoeffs> states)
    : config_(std::move(config)), times_(std::move(times)), states_(std::move(states)) {
  if (times_.size() != states_.size() || times_.empty())
    throw std::invalid_argument("Trajectory: times and states must be non-empty and of equal length");
  zero_ = std::all_of(states_.begin(), states_.end(), [](const DivFreeCoeffs& s) { return s.is_zero(); });
}

void Trajectory::at(double t, DivFreeCoeffs& out) const {
  const double tol = 1e-12 * std::max(1.0, std::abs(end()));
  if (t < start() - tol || t > end() + tol)
    throw std::out_of_range("Trajectory::at: time outside stored window");
  t = std::clamp(t, start(), end());
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  std::size_t hi = std::min<std::size_t>(it - times_.begin(), times_.size() - 1);
  std::size_t lo = hi == 0 ? 0 : hi - 1;
  if (std::abs(times_[lo] - t) <= tol) {
    out = states_[lo];
    return;
  }
  if (std::abs(times_[hi] - t) <= tol || lo == hi) {
    out = states_[hi];
    return;
  }
  const double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
  out = states_[lo];
  out *= (1.0 - w);
  out.axpy(w, states_[hi]);
}

DivFreeCoeffs Trajectory::at(double t) const {
  DivFreeCoeffs out;
  at(t, out);
  return out;
}

std::uint64_t Trajectory::hash() const {
  Fnv1a h;
  for (std::size_t m = 0; m < size(); ++m) {
    h.mix_value(times_[m]);
    const auto d = states_[m].data();
    h.mix(d.data(), d.size_bytes());
  }
  return h.value();
}

// ---------------------------------------------------------------------------

AdvectionWorkspace::AdvectionWorkspace(BasisPtr basis, int n) : basis_(std::move(basis)), fft_([&] {
  if (n < basis_->min_dealiased_grid())
    throw AliasingError("AdvectionWorkspace: grid " + std::to_string(n) +
                        " aliases quadratic products (need >= " +
                        std::to_string(basis_->min_dealiased_grid()) + ")");
  return n;
}()) {
  scratch_.resize(8 * fft_.grid_size());
}

void AdvectionWorkspace::synthesize(const DivFreeCoeffs& u, int comp, int deriv, double* out) {
  auto spec = fft_.spectrum();
  std::fill(spec.begin(), spec.end(), cplx{});
  for (std::size_t p = 0; p < u.pairs(); ++p) {
    const auto& m = basis_->pair(p);
    cplx v = u[p] * m.c[comp];
    if (deriv == 1) v *= cplx(0.0, kTwoPi * m.k1);
    if (deriv == 2) v *= cplx(0.0, kTwoPi * m.k2);
    bool conj;
    std::size_t s = fft_.slot(m.k1, m.k2, conj);
    spec[s] = conj ? std::conj(v) : v;
    if (m.k2 == 0) {
      s = fft_.slot(-m.k1, 0, conj);
      spec[s] = std::conj(v);
    }
  }
  fft_.to_physical();
  auto phys = fft_.physical();
  std::copy(phys.begin(), phys.end(), out);
}

void AdvectionWorkspace::velocity(const DivFreeCoeffs& u, double* u1, double* u2) {
  synthesize(u, 0, 0, u1);
  synthesize(u, 1, 0, u2);
}

void AdvectionWorkspace::gradient(const DivFreeCoeffs& v, double* d1v1, double* d2v1, double* d1v2,
                                  double* d2v2) {
  synthesize(v, 0, 1, d1v1);
  synthesize(v, 0, 2, d2v1);
  synthesize(v, 1, 1, d1v2);
  synthesize(v, 1, 2, d2v2);
}

VectorSpectrum AdvectionWorkspace::analyse(const double* w1, const double* w2) {
  VectorSpectrum out(basis_);
  const std::size_t N = fft_.grid_size();
  const double scale = 1.0 / double(N);
  for (int comp = 0; comp < 2; ++comp) {
    const double* src = comp == 0 ? w1 : w2;
    std::copy(src, src + N, fft_.physical().begin());
    fft_.to_spectral();
    auto spec = fft_.spectrum();
    for (std::size_t p = 0; p < basis_->pairs(); ++p) {
      const auto& m = basis_->pair(p);
      bool conj;
      const std::size_t s = fft_.slot(m.k1, m.k2, conj);
      out.values[p][comp] = (conj ? std::conj(spec[s]) : spec[s]) * scale;
    }
  }
  return out;
}

DivFreeCoeffs AdvectionWorkspace::project(const double* w1, const double* w2) {
  return leray_project(analyse(w1, w2));
}

VectorSpectrum AdvectionWorkspace::advect(const DivFreeCoeffs& u, const DivFreeCoeffs& v) {
  const std::size_t N = fft_.grid_size();
  double* u1 = scratch_.data();
  double* u2 = u1 + N;
  double* d1v1 = u2 + N;
  double* d2v1 = d1v1 + N;
  double* d1v2 = d2v1 + N;
  double* d2v2 = d1v2 + N;
  double* w1 = d2v2 + N;
  double* w2 = w1 + N;
  velocity(u, u1, u2);
  gradient(v, d1v1, d2v1, d1v2, d2v2);
  for (std::size_t i = 0; i < N; ++i) {
    w1[i] = u1[i] * d1v1[i] + u2[i] * d2v1[i];
    w2[i] = u1[i] * d1v2[i] + u2[i] * d2v2[i];
  }
  return analyse(w1, w2);
}

DivFreeCoeffs AdvectionWorkspace::bilinear(const DivFreeCoeffs& u, const DivFreeCoeffs& v) {
  return leray_project(advect(u, v));
}

DivFreeCoeffs bilinear_B(const DivFreeCoeffs& u, const DivFreeCoeffs& v, int n) {
  AdvectionWorkspace ws(u.basis_ptr(), n);
  return ws.bilinear(u, v);
}

VectorSpectrum advection_functional(const DivFreeCoeffs& u, int n) {
  AdvectionWorkspace ws(u.basis_ptr(), n);
  return ws.advect(u, u);
}

ScalarSpectrum vorticity(const DivFreeCoeffs& u) {
  ScalarSpectrum w(u.basis_ptr());
  for (std::size_t p = 0; p < u.pairs(); ++p) w.values[p] = cplx(0.0, kTwoPi * u.basis().pair(p).norm) * u[p];
  return w;
}

// ---------------------------------------------------------------------------

Trajectory solve_ns(const DivFreeCoeffs& theta, const DivFreeCoeffs& f, const ForwardConfig& config) {
  config.validate();
  if (theta.pairs() != config.basis->pairs() || f.pairs() != config.basis->pairs())
    throw std::invalid_argument("solve_ns: theta/f truncation does not match config");
  const std::size_t M = config.steps();
  const double h = config.T / double(M);
  const double nu = config.nu;

  AdvectionWorkspace ws(config.basis, config.grid());
  auto explicit_term = [&](const DivFreeCoeffs& u) {
    DivFreeCoeffs e = f;
    if (config.advection) e -= ws.bilinear(u, u);
    return e;
  };

  std::vector<double> times(M + 1);
  for (std::size_t m = 0; m <= M; ++m) times[m] = config.T * double(m) / double(M);
  std::vector<DivFreeCoeffs> states;
  states.reserve(M + 1);
  states.push_back(theta);

  auto guard = [&](const DivFreeCoeffs& u, std::size_t m) {
    const double norm = u.l2_norm();
    if (!(norm <= config.blowup_ceiling)) {
      std::ostringstream os;
      os << "solve_ns: L2 norm " << norm << " exceeds ceiling " << config.blowup_ceiling << " at t = "
         << times[m];
      throw SolverError(os.str());
    }
  };

  DivFreeCoeffs u = theta;
  if (config.scheme == TimeScheme::imex_cn) {
    DivFreeCoeffs n_prev = explicit_term(u);
    const double sub = h / detail::kBootstrapSubsteps;
    for (int i = 0; i < detail::kBootstrapSubsteps; ++i) {
      if (i == 0)
        detail::cn_update(u, n_prev, sub, nu);
      else
        detail::cn_update(u, explicit_term(u), sub, nu);
    }
    guard(u, 1);
    states.push_back(u);
    for (std::size_t m = 1; m < M; ++m) {
      DivFreeCoeffs n_now = explicit_term(u);
      detail::cn_ab2_update(u, n_now, n_prev, h, nu);
      n_prev = std::move(n_now);
      guard(u, m + 1);
      states.push_back(u);
    }
  } else {
    for (std::size_t m = 0; m < M; ++m) {
      const DivFreeCoeffs n_u = explicit_term(u);
      DivFreeCoeffs a = detail::etd_predict(u, n_u, h, nu);
      const DivFreeCoeffs n_a = explicit_term(a);
      detail::etd_correct(a, n_a, n_u, h, nu);
      u = std::move(a);
      guard(u, m + 1);
      states.push_back(u);
    }
  }
  return Trajectory(config, std::move(times), std::move(states));
}

std::vector<double> energy_residuals(const Trajectory& traj, const DivFreeCoeffs& f) {
  const double nu = traj.config().nu;
  std::vector<double> out;
  out.reserve(traj.size() - 1);
  for (std::size_t m = 0; m + 1 < traj.size(); ++m) {
    const auto& a = traj.state(m);
    const auto& b = traj.state(m + 1);
    const double h = traj.times()[m + 1] - traj.times()[m];
    DivFreeCoeffs mid = a;
    mid += b;
    mid *= 0.5;
    const double lhs = (b.dot(b) - a.dot(a)) / (2.0 * h);
    const double h1 = sobolev_norm(mid, 1.0);
    out.push_back(lhs - (f.dot(mid) - nu * h1 * h1));
  }
  return out;
}

DivFreeCoeffs taylor_green(const BasisPtr& basis, double amplitude) {
  DivFreeCoeffs u(basis);
  const cplx a(0.0, -amplitude * std::numbers::sqrt2 / 4.0);
  std::size_t p;
  bool neg;
  for (auto [k1, k2] : {std::pair{1, 1}, std::pair{1, -1}}) {
    if (!basis->locate(k1, k2, p, neg)) throw std::invalid_argument("taylor_green: basis lacks |k| = sqrt2 modes");
    u[p] = neg ? -std::conj(a) : a;
  }
  return u;
}

}  // namespace nsbayes
