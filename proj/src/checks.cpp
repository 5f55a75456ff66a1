#include "nsbayes/checks.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace nsbayes::checks {

DivFreeCoeffs decaying_field(const BasisPtr& basis, RandomSource& rng, double decay) {
  DivFreeCoeffs u(basis);
  const double l1 = basis->pair(0).lambda;
  for (std::size_t p = 0; p < u.pairs(); ++p) {
    const double s = std::pow(basis->pair(p).lambda / l1, -decay / 2.0);
    u[p] = s * cplx(rng.gaussian(), rng.gaussian());
  }
  return u;
}

BilinearResult bilinear_identities(int radius, int fields, std::uint64_t seed) {
  const auto b = Basis::with_radius(radius);
  AdvectionWorkspace ws(b, default_grid(*b));
  RandomSource rng(seed);
  BilinearResult r;
  for (int i = 0; i < fields; ++i) {
    const auto u = decaying_field(b, rng, 1.0);
    const auto v = decaying_field(b, rng, 1.0);
    const double h1 = sobolev_norm(v, 1.0);
    r.skew = std::max(r.skew, std::abs(ws.bilinear(u, v).dot(v)) / (u.l2_norm() * h1 * v.l2_norm()));
    const double e = ws.bilinear(v, v).dot(fractional_laplacian(v, 1.0));
    r.enstrophy = std::max(r.enstrophy, std::abs(e) / (h1 * h1 * sobolev_norm(v, 2.0)));
  }
  return r;
}

double heat_identity_residual(int radius, double nu, double T, int fields, std::uint64_t seed) {
  const auto b = Basis::with_radius(radius);
  RandomSource rng(seed);
  double worst = 0.0;
  for (int i = 0; i < fields; ++i) {
    const auto h = decaying_field(b, rng, 0.0);
    auto r = laplacian(L_star_L(h, T, nu));
    r.axpy(1.0 / (2.0 * nu), h);
    r.axpy(-1.0 / (2.0 * nu), heat_evolve(h, 2.0 * T, nu));
    for (std::size_t p = 0; p < r.pairs(); ++p)
      worst = std::max(worst, std::abs(r[p]) / std::max(1.0, std::abs(h[p]) / nu));
  }
  return worst;
}

double taylor_green_error(int radius, double nu, double T, double dt, TimeScheme scheme) {
  const auto b = Basis::with_radius(radius);
  ForwardConfig cfg;
  cfg.basis = b;
  cfg.nu = nu;
  cfg.T = T;
  cfg.dt = dt;
  cfg.scheme = scheme;
  const auto tg = taylor_green(b);
  const auto traj = solve_ns(tg, DivFreeCoeffs(b), cfg);
  auto exact = tg;
  exact *= std::exp(-8.0 * std::numbers::pi * std::numbers::pi * nu * T);
  return (traj.final_state() - exact).l2_norm() / exact.l2_norm();
}

RemainderResult linearization_remainder(int radius, double nu, double T, double dt, const std::vector<double>& eps,
                                        std::uint64_t seed) {
  if (eps.size() < 2) throw std::invalid_argument("linearization_remainder: need at least two eps values");
  const auto b = Basis::with_radius(radius);
  RandomSource rng(seed);
  const auto theta = decaying_field(b, rng, 2.0);
  const auto h = decaying_field(b, rng, 2.0);
  ForwardConfig fc;
  fc.basis = b;
  fc.nu = nu;
  fc.T = T;
  fc.dt = dt;
  const DivFreeCoeffs zero(b);
  const auto base = std::make_shared<const Trajectory>(solve_ns(theta, zero, fc));
  LinearFlowConfig lc;
  lc.nu = nu;
  lc.dt = dt;
  lc.scheme = TimeScheme::imex_cn;
  lc.background = base;
  const auto U = linearize_solve(lc, h);
  RemainderResult out;
  out.eps = eps;
  for (double e : eps) {
    auto th = theta;
    th.axpy(e, h);
    const auto pert = solve_ns(th, zero, fc);
    double r = 0.0;
    for (std::size_t m = 0; m < U.size(); ++m) {
      auto d = pert.state(m) - base->state(m);
      d.axpy(-e, U.state(m));
      r = std::max(r, d.l2_norm());
    }
    out.remainder.push_back(r);
  }
  out.slope = std::log(out.remainder.front() / out.remainder.back()) / std::log(eps.front() / eps.back());
  return out;
}

double adjoint_defect(int radius, double nu, double T, double dt, int samples, int pairs, std::uint64_t seed) {
  const auto b = Basis::with_radius(radius);
  RandomSource rng(seed);
  LinearFlowConfig lc;
  lc.nu = nu;
  lc.dt = dt;
  lc.background = make_background(b, {"smooth-random", 1.0, 2.0, seed}, nu, T, dt);
  std::vector<double> times;
  const std::size_t M = lc.steps();
  for (int s = 0; s < samples; ++s) times.push_back(lc.background->times()[M * std::size_t(s) / std::size_t(samples - 1)]);
  const auto P = assemble_propagator(lc, times);
  double worst = 0.0;
  for (int i = 0; i < pairs; ++i) {
    const auto h = decaying_field(b, rng, 0.0);
    Eigen::VectorXd w(P.entries.rows());
    for (Eigen::Index k = 0; k < w.size(); ++k) w[k] = rng.gaussian();
    const Eigen::VectorXd Ph = P.apply(h);
    worst = std::max(worst, std::abs(Ph.dot(w) - h.dot(adjoint_apply(P, w))) / (Ph.norm() * w.norm()));
  }
  return worst;
}

HeatGramResult heat_gram(int radius, double nu, double T, double dt) {
  const auto b = Basis::with_radius(radius);
  LinearFlowConfig lc;
  lc.nu = nu;
  lc.dt = dt;
  lc.background = zero_trajectory(b, T);
  HeatGramResult r;
  r.gram = assemble_gram_streaming(lc);
  const auto& G = r.gram.G;
  for (Eigen::Index i = 0; i < G.rows(); ++i)
    for (Eigen::Index j = 0; j < G.cols(); ++j) {
      if (i == j) {
        const double z = 2.0 * nu * b->pair(std::size_t(i) / 2).lambda * T;
        r.diag_defect = std::max(r.diag_defect, std::abs(G(i, i) + std::expm1(-z) / z));
      } else {
        r.offdiag = std::max(r.offdiag, std::abs(G(i, j)));
      }
    }
  r.min_eigenvalue = r.gram.eigenvalues()[0];
  return r;
}

std::shared_ptr<const Trajectory> make_background(const BasisPtr& basis, const BackgroundSpec& spec, double nu,
                                                  double T, double dt) {
  if (spec.kind == "zero") return zero_trajectory(basis, T);
  DivFreeCoeffs theta(basis);
  if (spec.kind == "taylor-green") {
    theta = taylor_green(basis, spec.amplitude);
  } else if (spec.kind == "smooth-random") {
    RandomSource rng(spec.seed);
    theta = decaying_field(basis, rng, spec.decay);
    theta *= spec.amplitude / theta.l2_norm();
  } else {
    throw std::invalid_argument("unknown background kind '" + spec.kind + "'");
  }
  ForwardConfig fc;
  fc.basis = basis;
  fc.nu = nu;
  fc.T = T;
  fc.dt = dt;
  return std::make_shared<const Trajectory>(solve_ns(theta, DivFreeCoeffs(basis), fc));
}

FredholmResult fredholm_bands(int radius, double nu, double T, double dt, const BackgroundSpec& background) {
  const auto b = Basis::with_radius(radius);
  LinearFlowConfig lc;
  lc.nu = nu;
  lc.dt = dt;
  lc.background = make_background(b, background, nu, T, dt);
  FredholmResult r;
  r.gram = assemble_gram_streaming(lc);
  r.min_eigenvalue = r.gram.eigenvalues()[0];
  r.bands = band_diagnostics(compact_remainder(r.gram), *b, T, nu);
  r.decreasing = true;
  double prev = 0.0;
  for (const auto& d : r.bands) {
    if (!d.complete) continue;
    if (r.complete_bands > 0 && !(d.ratio() < prev)) r.decreasing = false;
    prev = d.ratio();
    ++r.complete_bands;
  }
  return r;
}

}  // namespace nsbayes::checks
