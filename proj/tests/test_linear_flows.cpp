#include "doctest.h"
#include "helpers.hpp"

#include <numbers>

#include "nsbayes/linear_flows.hpp"

using namespace nsbayes;
using nsbayes::testing::random_field;

namespace {

std::shared_ptr<const Trajectory> forward(const DivFreeCoeffs& theta, double nu, double T, double dt) {
  ForwardConfig cfg;
  cfg.basis = theta.basis_ptr();
  cfg.nu = nu;
  cfg.T = T;
  cfg.dt = dt;
  return std::make_shared<const Trajectory>(solve_ns(theta, DivFreeCoeffs(theta.basis_ptr()), cfg));
}

double sup_diff(const Trajectory& a, const Trajectory& b) {
  double s = 0.0;
  for (std::size_t m = 0; m < a.size(); ++m) s = std::max(s, (a.state(m) - b.state(m)).l2_norm());
  return s;
}

}  // namespace

TEST_CASE("heat semigroup") {
  const auto b = Basis::with_radius(6);
  RandomSource rng(1);
  const auto h = random_field(b, rng);
  const auto phi = random_field(b, rng);
  const double nu = 0.1;
  CHECK((heat_evolve(h, 0.0, nu) - h).l2_norm() == 0.0);
  const auto e = DivFreeCoeffs::unit(b, 9);
  const double lam = b->pair(4).lambda;
  CHECK((heat_evolve(e, 0.3, nu) - std::exp(-nu * lam * 0.3) * e).l2_norm() < 1e-16);
  CHECK((heat_evolve(heat_evolve(h, 0.02, nu), 0.05, nu) - heat_evolve(h, 0.07, nu)).l2_norm() <= 1e-13 * h.l2_norm());
  CHECK(std::abs(heat_evolve(h, 0.04, nu).dot(phi) - h.dot(heat_evolve(phi, 0.04, nu))) <=
        1e-13 * h.l2_norm() * phi.l2_norm());

  // Rough input: coefficients growing like lambda^{1/4}.
  auto rough = random_field(b, rng, -0.5);
  const double t = 0.01;
  double bound = 0.0;
  for (const auto& m : b->all_pairs()) bound = std::max(bound, m.lambda * m.lambda * std::exp(-nu * m.lambda * t));
  const double h4 = sobolev_norm(heat_evolve(rough, t, nu), 4.0);
  CHECK(std::isfinite(h4));
  CHECK(h4 <= bound * rough.l2_norm() * (1 + 1e-12));
}

TEST_CASE("heat operator identity") {
  const auto b = Basis::with_radius(8);
  RandomSource rng(2);
  const double nu = 0.1, T = 0.5;
  CHECK(L_star_L(DivFreeCoeffs(b), T, nu).is_zero());
  for (std::size_t r = 0; r < 8; ++r) {
    const auto e = DivFreeCoeffs::unit(b, r);
    const double lam = b->pair(r / 2).lambda;
    const double expect = (1.0 - std::exp(-2.0 * nu * lam * T)) / (2.0 * nu * lam);
    CHECK((L_star_L(e, T, nu) - expect * e).l2_norm() <= 1e-15 * expect);
  }
  for (int trial = 0; trial < 10; ++trial) {
    const auto h = random_field(b, rng);
    auto r = laplacian(L_star_L(h, T, nu));
    r.axpy(1.0 / (2.0 * nu), h);
    r.axpy(-1.0 / (2.0 * nu), heat_evolve(h, 2.0 * T, nu));
    for (std::size_t p = 0; p < r.pairs(); ++p) CHECK(std::abs(r[p]) <= 1e-13 * std::max(1.0, std::abs(h[p]) / nu));
  }
}

TEST_CASE("linearised flow with zero background is the heat flow") {
  const auto b = Basis::with_radius(6);
  RandomSource rng(3);
  const auto xi = random_field(b, rng);
  for (auto scheme : {TimeScheme::etd_rk2, TimeScheme::imex_cn}) {
    LinearFlowConfig cfg;
    cfg.nu = 0.1;
    cfg.dt = 1e-3;
    cfg.scheme = scheme;
    cfg.background = zero_trajectory(b, 0.2);
    const auto U = linearize_solve(cfg, xi);
    CHECK(U.size() == 201);
    CHECK((U.state(0) - xi).l2_norm() == 0.0);
    double worst = 0.0;
    for (std::size_t m = 0; m < U.size(); ++m)
      worst = std::max(worst, (U.state(m) - heat_evolve(xi, U.times()[m], cfg.nu)).l2_norm());
    if (scheme == TimeScheme::etd_rk2)
      CHECK(worst <= 1e-10 * xi.l2_norm());
    else
      CHECK(worst <= 1e-3 * xi.l2_norm());  // Crank-Nicolson damping of stiff modes
  }
}

TEST_CASE("linearisation remainder is quadratic") {
  const auto b = Basis::with_radius(6);
  RandomSource rng(4);
  const double nu = 0.05, T = 0.3, dt = 1e-3;
  const auto theta = random_field(b, rng, 2.0);
  const auto h = random_field(b, rng, 2.0);
  const auto base = forward(theta, nu, T, dt);
  LinearFlowConfig cfg;
  cfg.nu = nu;
  cfg.dt = dt;
  cfg.scheme = TimeScheme::imex_cn;
  cfg.background = base;
  const auto U = linearize_solve(cfg, h);
  std::vector<double> eps{1e-1, 1e-2, 1e-3}, rem;
  for (double e : eps) {
    auto th = theta;
    th.axpy(e, h);
    const auto pert = forward(th, nu, T, dt);
    double r = 0.0;
    for (std::size_t m = 0; m < U.size(); ++m) {
      auto d = pert->state(m) - base->state(m);
      d.axpy(-e, U.state(m));
      r = std::max(r, d.l2_norm());
    }
    rem.push_back(r);
  }
  const double slope = std::log(rem[0] / rem[2]) / std::log(eps[0] / eps[2]);
  MESSAGE("remainder slope " << slope);
  CHECK(slope == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("linearised flow stability, smoothing and energy bounds") {
  const auto b = Basis::with_radius(6);
  RandomSource rng(5);
  const double nu = 0.05, T = 0.3;
  const auto bg = forward(random_field(b, rng, 3.0), nu, T, 1e-3);
  LinearFlowConfig cfg;
  cfg.nu = nu;
  cfg.dt = 1e-3;
  cfg.background = bg;
  const auto w = trapezoid_weights(solver_times(cfg));

  auto energy = [&](const Trajectory& U) {
    double s = 0.0;
    for (std::size_t m = 0; m < U.size(); ++m) s += w[m] * std::pow(U.state(m).l2_norm(), 2);
    return s;
  };
  const auto ref = random_field(b, rng);
  const double C = std::pow(sobolev_norm(ref, -1.0), 2) / energy(linearize_solve(cfg, ref));
  for (int trial = 0; trial < 8; ++trial) {
    const auto xi = random_field(b, rng, double(trial % 3) - 1.0);
    const auto U = linearize_solve(cfg, xi);
    CHECK(std::pow(sobolev_norm(xi, -1.0), 2) <= 2.0 * C * energy(U));
    double sup = 0.0, dissip = 0.0;
    for (std::size_t m = 0; m < U.size(); ++m) {
      sup = std::max(sup, U.state(m).l2_norm());
      dissip += w[m] * std::pow(sobolev_norm(U.state(m), 1.0), 2);
    }
    CHECK(sup * sup + nu * dissip <= 4.0 * xi.l2_norm() * xi.l2_norm());
  }

  auto rough = random_field(b, rng, -0.5);
  const auto U = linearize_solve(cfg, rough);
  double prev = 1e300;
  for (double tmin : {0.05, 0.1, 0.2}) {
    double sup = 0.0;
    for (std::size_t m = 0; m < U.size(); ++m)
      if (U.times()[m] >= tmin - 1e-12) sup = std::max(sup, sobolev_norm(U.state(m), 2.0));
    CHECK(std::isfinite(sup));
    CHECK(sup < prev);
    prev = sup;
  }
}

TEST_CASE("difference of two solutions solves the two-background equation") {
  const auto b = Basis::with_radius(5);
  RandomSource rng(6);
  const double nu = 0.05, T = 0.2;
  const auto th1 = random_field(b, rng, 2.0);
  const auto th2 = random_field(b, rng, 2.0);
  std::vector<double> err;
  for (double dt : {2e-3, 1e-3, 5e-4}) {
    const auto u1 = forward(th1, nu, T, dt);
    const auto u2 = forward(th2, nu, T, dt);
    LinearFlowConfig cfg;
    cfg.nu = nu;
    cfg.dt = dt;
    cfg.scheme = TimeScheme::imex_cn;
    cfg.background = u1;
    const auto U = linearize_solve(cfg, th1 - th2, nullptr, u2.get());
    double e = 0.0;
    for (std::size_t m = 0; m < U.size(); ++m)
      e = std::max(e, (U.state(m) - (u1->state(m) - u2->state(m))).l2_norm());
    err.push_back(e);
  }
  MESSAGE("difference residuals " << err[0] << " " << err[1] << " " << err[2]);
  CHECK(err[2] < err[1]);
  CHECK(std::log2(err[1] / err[2]) > 1.7);
}

TEST_CASE("source term") {
  const auto b = Basis::with_radius(4);
  RandomSource rng(7);
  const double nu = 0.1, T = 0.2;
  // Constant source g on a zero background: U(t) = S_t xi + (1 - e^{-nu lambda t}) / (nu lambda) g.
  const auto g = random_field(b, rng);
  ForwardConfig fc;
  fc.basis = b;
  fc.T = T;
  fc.dt = T;
  const Trajectory src(fc, {0.0, T}, {g, g});
  LinearFlowConfig cfg;
  cfg.nu = nu;
  cfg.dt = 1e-3;
  cfg.background = zero_trajectory(b, T);
  const auto xi = random_field(b, rng);
  const auto U = linearize_solve(cfg, xi, &src);
  auto expect = heat_evolve(xi, T, nu);
  for (std::size_t p = 0; p < b->pairs(); ++p) {
    const double z = nu * b->pair(p).lambda;
    expect[p] += -std::expm1(-z * T) / z * g[p];
  }
  CHECK((U.final_state() - expect).l2_norm() <= 1e-8 * expect.l2_norm());
}

TEST_CASE("propagator assembly and discrete adjoint") {
  const auto b = Basis::with_radius(4);
  RandomSource rng(8);
  const double nu = 0.1, T = 0.2;
  LinearFlowConfig cfg;
  cfg.nu = nu;
  cfg.dt = 2e-3;
  cfg.background = zero_trajectory(b, T);
  const auto times = solver_times(cfg);
  const auto P0 = assemble_propagator(cfg, times);
  const auto J = Eigen::Index(b->real_dim());
  CHECK(P0.entries.rows() == Eigen::Index(times.size()) * J);
  double off = 0.0, diag = 0.0;
  for (std::size_t m = 0; m < times.size(); ++m)
    for (Eigen::Index i = 0; i < J; ++i)
      for (Eigen::Index j = 0; j < J; ++j) {
        const double v = P0.entries(Eigen::Index(m) * J + i, j);
        if (i != j) {
          off = std::max(off, std::abs(v));
        } else {
          const double lam = b->pair(std::size_t(i) / 2).lambda;
          diag = std::max(diag, std::abs(v - std::exp(-nu * lam * times[m]) * std::sqrt(P0.weights[m])));
        }
      }
  CHECK(off == 0.0);
  CHECK(diag < 1e-10);

  // Heat-case adjoint: per-mode quadrature of int e^{-nu lambda t} w_j(t) dt for w_j(t) = cos(3t).
  Eigen::VectorXd w(P0.entries.rows());
  for (std::size_t m = 0; m < times.size(); ++m)
    for (Eigen::Index i = 0; i < J; ++i) w[Eigen::Index(m) * J + i] = std::sqrt(P0.weights[m]) * std::cos(3.0 * times[m]);
  const auto adj = adjoint_apply(P0, w).to_real();
  for (Eigen::Index i = 0; i < J; ++i) {
    const double a = nu * b->pair(std::size_t(i) / 2).lambda;
    // int_0^T e^{-a t} cos(3 t) dt in closed form
    const double exact = (a - std::exp(-a * T) * (a * std::cos(3 * T) - 3 * std::sin(3 * T))) / (a * a + 9);
    CHECK(adj[i] == doctest::Approx(exact).epsilon(2e-3));
  }

  const auto bg = forward(random_field(b, rng, 2.0), nu, T, 2e-3);
  cfg.background = bg;
  const std::vector<double> samples{0.0, 0.04, 0.1, 0.16, 0.2};
  const auto P = assemble_propagator(cfg, samples);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto h = random_field(b, rng);
    Eigen::VectorXd v(P.entries.rows());
    for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = rng.gaussian();
    const double lhs = P.apply(h).dot(v);
    const double rhs = h.dot(adjoint_apply(P, v));
    worst = std::max(worst, std::abs(lhs - rhs) / (P.apply(h).norm() * v.norm()));
  }
  CHECK(worst <= 1e-12);

  const auto xi = random_field(b, rng);
  const auto U = linearize_solve(cfg, xi);
  const auto Pxi = P.apply(xi);
  double d = 0.0;
  for (std::size_t m = 0; m < samples.size(); ++m) {
    const Eigen::VectorXd direct = std::sqrt(P.weights[m]) * U.at(samples[m]).to_real();
    d = std::max(d, (Pxi.segment(Eigen::Index(m) * J, J) - direct).norm());
  }
  CHECK(d <= 1e-10 * xi.l2_norm());

  const auto gram_h = adjoint_apply(P, P.apply(xi));
  const Eigen::VectorXd direct = P.entries.transpose() * (P.entries * xi.to_real());
  CHECK((gram_h.to_real() - direct).norm() <= 1e-12 * direct.norm());

  CHECK_THROWS_AS(assemble_propagator(cfg, {0.0011}), std::invalid_argument);
  AssemblyOptions small;
  small.max_dim = 4;
  CHECK_THROWS_AS(assemble_propagator(cfg, samples, small), std::length_error);
  CHECK_THROWS_AS(adjoint_apply(P, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("column norms follow trapezoid refinement") {
  const auto b = Basis::with_radius(3);
  RandomSource rng(9);
  const double nu = 0.05, T = 0.2;
  const auto bg = forward(random_field(b, rng, 2.0), nu, T, 1e-3);
  LinearFlowConfig cfg;
  cfg.nu = nu;
  cfg.dt = 1e-3;
  cfg.background = bg;
  auto norms = [&](double spacing) {
    std::vector<double> t;
    for (int m = 0; m <= int(std::lround(T / spacing)); ++m) t.push_back(m * spacing);
    const auto P = assemble_propagator(cfg, t);
    return Eigen::VectorXd(P.entries.colwise().squaredNorm().transpose());
  };
  const auto coarse = norms(0.04), mid = norms(0.02), fine = norms(0.01);
  const auto exact = norms(0.001);
  const double e1 = (coarse - exact).cwiseAbs().maxCoeff();
  const double e2 = (mid - exact).cwiseAbs().maxCoeff();
  const double e3 = (fine - exact).cwiseAbs().maxCoeff();
  CHECK(std::log2(e1 / e2) == doctest::Approx(2.0).epsilon(0.15));
  CHECK(std::log2(e2 / e3) == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("serial and parallel batches agree") {
  const auto b = Basis::with_radius(4);
  RandomSource rng(10);
  const auto bg = forward(random_field(b, rng, 2.0), 0.05, 0.1, 1e-3);
  for (auto scheme : {TimeScheme::etd_rk2, TimeScheme::imex_cn}) {
    LinearFlowConfig cfg;
    cfg.nu = 0.05;
    cfg.dt = 1e-3;
    cfg.scheme = scheme;
    cfg.background = bg;
    AssemblyOptions s, p;
    s.exec = kernels::Exec::serial;
    p.exec = kernels::Exec::parallel;
    const auto times = solver_times(cfg);
    const auto Ps = assemble_propagator(cfg, times, s);
    const auto Pp = assemble_propagator(cfg, times, p);
    CHECK((Ps.entries - Pp.entries).cwiseAbs().maxCoeff() == 0.0);
    const auto xi = DivFreeCoeffs::unit(b, 5);
    const auto U = linearize_solve(cfg, xi);
    CHECK((U.final_state().to_real() - Ps.entries.bottomRows(Eigen::Index(b->real_dim())).col(5) /
                                           std::sqrt(Ps.weights.back()))
              .norm() < 1e-13);
  }
}
