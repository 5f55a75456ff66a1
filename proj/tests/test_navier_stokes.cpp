#include "doctest.h"
#include "helpers.hpp"

#include <numbers>

#include "nsbayes/navier_stokes.hpp"

using namespace nsbayes;
using nsbayes::testing::random_field;

namespace {

// (u . grad) v by direct double sum over retained wave vectors, projected onto c_m.
DivFreeCoeffs convolution_oracle(const DivFreeCoeffs& u, const DivFreeCoeffs& v) {
  const Basis& b = u.basis();
  std::vector<std::pair<int, int>> ks;
  for (const auto& m : b.all_pairs()) {
    ks.emplace_back(m.k1, m.k2);
    ks.emplace_back(-m.k1, -m.k2);
  }
  auto cvec = [](int k1, int k2) {
    const double n = std::hypot(double(k1), double(k2));
    return Vec2{-k2 / n, k1 / n};
  };
  DivFreeCoeffs out(u.basis_ptr());
  for (std::size_t p = 0; p < b.pairs(); ++p) {
    const auto& target = b.pair(p);
    std::array<cplx, 2> acc{};
    for (auto [k1, k2] : ks)
      for (auto [l1, l2] : ks) {
        if (k1 + l1 != target.k1 || k2 + l2 != target.k2) continue;
        const Vec2 ck = cvec(k1, k2), cl = cvec(l1, l2);
        const cplx grad = cplx(0.0, kTwoPi) * (ck[0] * l1 + ck[1] * l2);
        const cplx s = u.coefficient(k1, k2) * v.coefficient(l1, l2) * grad;
        acc[0] += s * cl[0];
        acc[1] += s * cl[1];
      }
    out[p] = target.c[0] * acc[0] + target.c[1] * acc[1];
  }
  return out;
}

}  // namespace

TEST_CASE("bilinear form identities") {
  const auto b = Basis::with_radius(10);
  const int n = default_grid(*b);
  AdvectionWorkspace ws(b, n);
  RandomSource rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const auto u = random_field(b, rng, 1.0);
    const auto v = random_field(b, rng, 1.0);
    const auto w = random_field(b, rng, 1.0);
    const double scale = sobolev_norm(u, 0) * sobolev_norm(v, 1) * sobolev_norm(v, 0);
    CHECK(std::abs(ws.bilinear(u, v).dot(v)) <= 1e-10 * scale);
    const auto lap = fractional_laplacian(v, 1.0);
    CHECK(std::abs(ws.bilinear(v, v).dot(lap)) <= 1e-10 * sobolev_norm(v, 1) * sobolev_norm(v, 1) * sobolev_norm(v, 2));
    const double anti = ws.bilinear(u, v).dot(w) + ws.bilinear(u, w).dot(v);
    CHECK(std::abs(anti) <= 1e-10 * sobolev_norm(u, 0) * sobolev_norm(v, 1) * sobolev_norm(w, 1));
  }
  CHECK_THROWS_AS(AdvectionWorkspace(b, b->min_dealiased_grid() - 1), AliasingError);
}

TEST_CASE("bilinear form against coefficient convolution") {
  const auto b = Basis::with_radius(3);
  const int n = default_grid(*b);
  std::size_t p, q;
  bool neg;
  REQUIRE(b->locate(1, 0, p, neg));
  REQUIRE(b->locate(1, 1, q, neg));
  DivFreeCoeffs u(b), v(b);
  u[p] = cplx(0.3, -0.7);
  v[q] = cplx(1.1, 0.4);
  const auto oracle = convolution_oracle(u, v);
  const auto got = bilinear_B(u, v, n);
  CHECK(oracle.l2_norm() > 0.1);
  CHECK((got - oracle).l2_norm() <= 1e-12 * oracle.l2_norm());

  RandomSource rng(2);
  const auto x = random_field(b, rng);
  const auto y = random_field(b, rng);
  const auto ref = convolution_oracle(x, y);
  CHECK((bilinear_B(x, y, n) - ref).l2_norm() <= 1e-12 * ref.l2_norm());
}

TEST_CASE("advection functional") {
  const auto b = Basis::with_radius(6);
  const int n = default_grid(*b);
  CHECK(leray_project(advection_functional(DivFreeCoeffs(b), n)).is_zero());
  RandomSource rng(8);
  const auto u = random_field(b, rng, 2.0);
  const auto h = random_field(b, rng, 2.0);
  CHECK((leray_project(advection_functional(u, n)) - bilinear_B(u, u, n)).l2_norm() <=
        1e-12 * bilinear_B(u, u, n).l2_norm());

  AdvectionWorkspace ws(b, n);
  auto vec_norm = [](const VectorSpectrum& s) {
    double acc = 0.0;
    for (const auto& v : s.values) acc += std::norm(v[0]) + std::norm(v[1]);
    return std::sqrt(2.0 * acc);
  };
  std::vector<double> eps{1e-1, 1e-2, 1e-3}, rem;
  const auto base = ws.advect(u, u);
  const auto d1 = ws.advect(u, h);
  const auto d2 = ws.advect(h, u);
  for (double e : eps) {
    auto shifted = u;
    shifted.axpy(e, h);
    auto r = ws.advect(shifted, shifted);
    for (std::size_t k = 0; k < r.values.size(); ++k)
      for (int c = 0; c < 2; ++c) r.values[k][c] -= base.values[k][c] + e * (d1.values[k][c] + d2.values[k][c]);
    rem.push_back(vec_norm(r));
  }
  const double slope = (std::log(rem[2]) - std::log(rem[0])) / (std::log(eps[2]) - std::log(eps[0]));
  CHECK(slope == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("vorticity") {
  const auto b = Basis::with_radius(6);
  CHECK(vorticity(DivFreeCoeffs(b)).l2_norm() == 0.0);
  RandomSource rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const auto u = random_field(b, rng, 1.0);
    CHECK(vorticity(u).gradient_norm() == doctest::Approx(sobolev_norm(u, 2.0)).epsilon(1e-12));
  }
  std::size_t p;
  bool neg;
  REQUIRE(b->locate(2, -1, p, neg));
  DivFreeCoeffs e(b);
  e[p] = cplx(0.6, 0.8);
  const auto w = vorticity(e);
  CHECK(std::abs(w.values[p]) == doctest::Approx(kTwoPi * std::sqrt(5.0)).epsilon(1e-14));
  for (std::size_t q = 0; q < b->pairs(); ++q)
    if (q != p) CHECK(w.values[q] == cplx(0.0));

  // Grid cross-check: omega = -d2 u1 + d1 u2 by centred spectral differentiation.
  const auto u = random_field(b, rng);
  const auto om = vorticity(u);
  for (std::size_t q = 0; q < b->pairs(); ++q) {
    const auto& m = b->pair(q);
    const cplx expect = cplx(0.0, kTwoPi) * (m.k1 * m.c[1] - m.k2 * m.c[0]) * u[q];
    CHECK(std::abs(om.values[q] - expect) <= 1e-12 * std::abs(expect) + 1e-300);
  }
}

TEST_CASE("forward solver basics") {
  const auto b = Basis::with_radius(6);
  ForwardConfig cfg;
  cfg.basis = b;
  cfg.nu = 0.05;
  cfg.T = 0.2;
  cfg.dt = 1e-3;
  const DivFreeCoeffs zero(b);
  const auto traj = solve_ns(zero, zero, cfg);
  CHECK(traj.is_zero());
  CHECK(traj.size() == 201);
  CHECK(traj.times().back() == 0.2);

  RandomSource rng(6);
  const auto theta = random_field(b, rng, 2.0);
  for (auto scheme : {TimeScheme::imex_cn, TimeScheme::etd_rk2}) {
    cfg.scheme = scheme;
    const auto tr = solve_ns(theta, zero, cfg);
    CHECK((tr.state(0) - theta).l2_norm() == 0.0);
    double prev = tr.state(0).l2_norm();
    for (std::size_t m = 1; m < tr.size(); ++m) {
      const double now = tr.state(m).l2_norm();
      CHECK(now <= prev * (1 + 1e-12));  // unforced energy decays
      prev = now;
    }
  }

  cfg.dt = 0.03;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.dt = 1e-3;
  cfg.n = 5;
  CHECK_THROWS_AS(cfg.validate(), AliasingError);
}

TEST_CASE("taylor-green vortex") {
  const auto b = Basis::with_radius(16);
  const auto tg = taylor_green(b);
  // Field at (0.25, 0): (-cos(pi/2) sin 0, sin(pi/2) cos 0) = (0, 1).
  const auto v = evaluate_at(tg, Point2{0.25, 0.0});
  CHECK(v[0] == doctest::Approx(0.0));
  CHECK(v[1] == doctest::Approx(1.0).epsilon(1e-14));
  const auto w = evaluate_at(tg, Point2{0.1, 0.35});
  CHECK(w[0] == doctest::Approx(-std::cos(kTwoPi * 0.1) * std::sin(kTwoPi * 0.35)).epsilon(1e-14));
  CHECK(w[1] == doctest::Approx(std::sin(kTwoPi * 0.1) * std::cos(kTwoPi * 0.35)).epsilon(1e-14));

  ForwardConfig cfg;
  cfg.basis = b;
  cfg.nu = 0.1;
  cfg.T = 0.1;
  cfg.dt = 1e-4;
  const DivFreeCoeffs zero(b);
  for (auto scheme : {TimeScheme::imex_cn, TimeScheme::etd_rk2}) {
    cfg.scheme = scheme;
    const auto traj = solve_ns(tg, zero, cfg);
    auto exact = tg;
    exact *= std::exp(-8.0 * std::numbers::pi * std::numbers::pi * cfg.nu * cfg.T);
    CHECK((traj.final_state() - exact).l2_norm() / exact.l2_norm() < 1e-6);
  }
}

TEST_CASE("time-step convergence and energy balance") {
  const auto b = Basis::with_radius(5);
  RandomSource rng(12);
  const auto theta = random_field(b, rng, 2.0);
  const auto f = random_field(b, rng, 4.0);
  for (auto scheme : {TimeScheme::imex_cn, TimeScheme::etd_rk2}) {
    ForwardConfig cfg;
    cfg.basis = b;
    cfg.nu = 0.05;
    cfg.T = 0.2;
    cfg.scheme = scheme;
    std::vector<double> dts{2e-3, 1e-3, 5e-4, 2.5e-4};
    std::vector<DivFreeCoeffs> finals;
    for (double dt : dts) {
      cfg.dt = dt;
      finals.push_back(solve_ns(theta, f, cfg).final_state());
    }
    const double e1 = (finals[0] - finals[1]).l2_norm();
    const double e2 = (finals[1] - finals[2]).l2_norm();
    const double e3 = (finals[2] - finals[3]).l2_norm();
    CHECK(std::log2(e1 / e2) == doctest::Approx(2.0).epsilon(0.15));
    CHECK(std::log2(e2 / e3) == doctest::Approx(2.0).epsilon(0.15));

    std::vector<double> worst;
    for (double dt : {1e-2, 1e-3, 1e-4}) {
      cfg.dt = dt;
      const auto res = energy_residuals(solve_ns(theta, f, cfg), f);
      // Step 0 is the AB2 bootstrap (explicit-Euler substeps), first order by design.
      double w = 0.0;
      for (std::size_t m = 1; m < res.size(); ++m) w = std::max(w, std::abs(res[m]));
      worst.push_back(w);
    }
    CHECK(worst[1] < worst[0]);
    CHECK(worst[2] < worst[1]);
    // dt = 1e-2 is pre-asymptotic (nu lambda_max dt ~ 0.5); the order is read off the finer pair.
    const double slope = std::log10(worst[1] / worst[2]);
    MESSAGE(to_string(scheme) << " energy residual " << worst[0] << " " << worst[1] << " " << worst[2]);
    CHECK(slope == doctest::Approx(2.0).epsilon(0.15));
  }
}

TEST_CASE("lipschitz and sobolev boundedness") {
  const auto b = Basis::with_radius(5);
  ForwardConfig cfg;
  cfg.basis = b;
  cfg.nu = 0.05;
  cfg.T = 0.5;
  cfg.dt = 2e-3;
  const DivFreeCoeffs zero(b);
  RandomSource rng(21);
  const auto theta = random_field(b, rng, 3.0);
  const auto base = solve_ns(theta, zero, cfg);
  double sup_h2 = 0.0;
  for (const auto& s : base.states()) sup_h2 = std::max(sup_h2, sobolev_norm(s, 2.0));
  CHECK(std::isfinite(sup_h2));
  CHECK(sup_h2 <= 1.01 * sobolev_norm(theta, 2.0) + 1.0);

  const auto dir = random_field(b, rng, 3.0);
  double last = 1e300;
  for (double e : {1e-1, 1e-2, 1e-3}) {
    auto other = theta;
    other.axpy(e, dir);
    const auto tr = solve_ns(other, zero, cfg);
    double ratio = 0.0;
    for (std::size_t m = 0; m < tr.size(); ++m)
      ratio = std::max(ratio, (tr.state(m) - base.state(m)).l2_norm() / (e * dir.l2_norm()));
    CHECK(ratio < 10.0);
    CHECK(ratio <= last * (1 + 1e-6));
    last = ratio;
  }
}
