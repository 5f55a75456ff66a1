#include "doctest.h"
#include "helpers.hpp"

#include <Eigen/SVD>

#include <numbers>

#include "nsbayes/information.hpp"

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

LinearFlowConfig flow(std::shared_ptr<const Trajectory> bg, double nu, double dt) {
  LinearFlowConfig cfg;
  cfg.nu = nu;
  cfg.dt = dt;
  cfg.background = std::move(bg);
  return cfg;
}

double heat_diag(double lambda, double nu, double T) { return -std::expm1(-2.0 * nu * lambda * T) / (2.0 * nu * lambda * T); }

OperatorGram heat_gram(const BasisPtr& b, double nu, double T) {
  OperatorGram g;
  g.basis = b;
  g.T = T;
  g.nu = nu;
  g.G = Eigen::MatrixXd::Zero(Eigen::Index(b->real_dim()), Eigen::Index(b->real_dim()));
  for (std::size_t r = 0; r < b->real_dim(); ++r) g.G(Eigen::Index(r), Eigen::Index(r)) = heat_diag(b->pair(r / 2).lambda, nu, T);
  return g;
}

}  // namespace

TEST_CASE("heat-case gram is the analytic diagonal") {
  const auto b = Basis::with_radius(8);
  const double nu = 0.1, T = 0.5;
  const auto g = assemble_gram_streaming(flow(zero_trajectory(b, T), nu, 1e-4));
  double worst = 0.0, off = 0.0;
  for (Eigen::Index i = 0; i < g.G.rows(); ++i)
    for (Eigen::Index j = 0; j < g.G.cols(); ++j) {
      if (i == j)
        worst = std::max(worst, std::abs(g.G(i, i) - heat_diag(b->pair(std::size_t(i) / 2).lambda, nu, T)));
      else
        off = std::max(off, std::abs(g.G(i, j)));
    }
  MESSAGE("heat diagonal defect " << worst);
  CHECK(worst <= 1e-6);
  CHECK(off == 0.0);
  CHECK((g.G - g.G.transpose()).norm() == 0.0);
  CHECK(compact_remainder(g).cwiseAbs().maxCoeff() <= 1e-6 * T);
}

TEST_CASE("streaming and propagator grams agree") {
  const auto b = Basis::with_radius(4);
  RandomSource rng(1);
  const double nu = 0.05, T = 0.2;
  const auto cfg = flow(forward(random_field(b, rng, 2.0), nu, T, 1e-3), nu, 1e-3);
  const auto P = assemble_propagator(cfg, solver_times(cfg));
  const auto a = assemble_gram(P, T, nu);
  const auto s = assemble_gram_streaming(cfg, kernels::Exec::serial);
  const auto p = assemble_gram_streaming(cfg, kernels::Exec::parallel);
  CHECK((a.G - s.G).norm() <= 1e-12 * a.G.norm());
  CHECK((s.G - p.G).norm() <= 1e-14 * s.G.norm());
  CHECK(a.background_hash == cfg.background->hash());
  CHECK(a.T == T);

  // Unsymmetrised K: asymmetry comes only from rounding in P^T P.
  Eigen::MatrixXd raw = P.entries.transpose() * P.entries;
  for (std::size_t r = 0; r < b->real_dim(); ++r)
    raw(Eigen::Index(r), Eigen::Index(r)) -= heat_diag(b->pair(r / 2).lambda, nu, T) * T;
  CHECK((raw - raw.transpose()).norm() <= 1e-10);
  const auto K = compact_remainder(P, T, nu);
  CHECK((K - K.transpose()).norm() == 0.0);
  CHECK((K - compact_remainder(a)).norm() <= 1e-14 * std::max(1.0, K.norm()));
  // Fredholm identity: T G - K is the analytic diagonal.
  Eigen::MatrixXd LL = T * a.G - compact_remainder(a);
  for (std::size_t r = 0; r < b->real_dim(); ++r)
    LL(Eigen::Index(r), Eigen::Index(r)) -= heat_diag(b->pair(r / 2).lambda, nu, T) * T;
  CHECK(LL.cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("gram is positive definite on nonzero backgrounds") {
  const double nu = 0.1, T = 0.2;
  {
    const auto b = Basis::with_radius(8);
    const auto g = assemble_gram_streaming(flow(forward(taylor_green(b, 2.0), nu, T, 1e-3), nu, 1e-3));
    const auto ev = g.eigenvalues();
    MESSAGE("taylor-green smallest eigenvalue " << ev[0]);
    CHECK(ev[0] > 0.0);
  }
  // Oracle: squared singular values of the weighted propagator.
  const auto b = Basis::with_radius(5);
  RandomSource rng(2);
  for (double amp : {0.0, 1.0}) {
    auto theta = taylor_green(b, 2.0);
    theta.axpy(amp, random_field(b, rng, 2.0));
    const auto cfg = flow(forward(theta, nu, T, 1e-3), nu, 1e-3);
    const auto P = assemble_propagator(cfg, solver_times(cfg));
    const auto g = assemble_gram(P, T, nu);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(P.entries);
    const double smallest = std::pow(svd.singularValues().tail(1)[0], 2) / T;
    CHECK(g.eigenvalues()[0] == doctest::Approx(smallest).epsilon(1e-8));
    CHECK(smallest > 0.0);
  }

  OperatorGram bad = heat_gram(b, nu, T);
  bad.G(0, 0) = -1.0;
  PropagatorMatrix P;
  P.basis = b;
  P.entries = Eigen::MatrixXd::Zero(Eigen::Index(b->real_dim()), Eigen::Index(b->real_dim()));
  P.entries(1, 1) = 1.0;
  CHECK_THROWS_AS(assemble_gram(P, T, nu), NotPositiveDefinite);
  CHECK_THROWS_AS(LimitGaussianSpec::from_gram(bad), NotPositiveDefinite);
  CHECK_THROWS_AS(invert_info_op(bad, DivFreeCoeffs::unit(b, 0), {}), NotPositiveDefinite);
}

TEST_CASE("gram converges at trapezoid order") {
  const auto b = Basis::with_radius(4);
  RandomSource rng(3);
  const double nu = 0.05, T = 0.2;
  const auto theta = random_field(b, rng, 2.0);
  std::vector<Eigen::MatrixXd> G;
  for (double dt : {4e-3, 2e-3, 1e-3, 5e-4}) {
    auto cfg = flow(forward(theta, nu, T, dt), nu, dt);
    cfg.scheme = TimeScheme::imex_cn;
    G.push_back(assemble_gram_streaming(cfg).G);
  }
  const double e1 = (G[0] - G[1]).norm(), e2 = (G[1] - G[2]).norm(), e3 = (G[2] - G[3]).norm();
  MESSAGE("gram refinement " << e1 << " " << e2 << " " << e3);
  CHECK(std::log2(e2 / e3) == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("remainder is smoother than the heat part") {
  const auto b = Basis::with_radius(8);
  const double nu = 0.1, T = 0.2, dt = 5e-4;
  RandomSource rng(1);
  auto theta = random_field(b, rng, 4.0);
  theta *= 1.0 / theta.l2_norm();
  const auto g = assemble_gram_streaming(flow(forward(theta, nu, T, dt), nu, dt));
  const auto bands = band_diagnostics(compact_remainder(g), *b, T, nu);
  REQUIRE(bands.size() == 4);
  for (const auto& d : bands) MESSAGE("band " << d.band << " dim " << d.dim << " ratio " << d.ratio());
  CHECK(bands[2].complete);
  CHECK_FALSE(bands[3].complete);
  for (std::size_t m = 1; m < 3; ++m) CHECK(bands[m].ratio() < bands[m - 1].ratio());
  CHECK(bands[0].dim == 8);
  std::size_t total = 0;
  for (const auto& d : bands) total += d.dim;
  CHECK(total == b->real_dim());

  const auto heat = band_diagnostics(Eigen::MatrixXd::Zero(g.G.rows(), g.G.cols()), *b, T, nu);
  for (const auto& d : heat) CHECK(d.remainder_norm == 0.0);
  CHECK(heat[1].heat_norm == doctest::Approx(heat_diag(4.0 * 4.0 * std::numbers::pi * std::numbers::pi, nu, T) * T));
}

TEST_CASE("inversion") {
  const auto b = Basis::with_radius(6);
  RandomSource rng(4);
  const double nu = 0.1, T = 0.2;
  const auto heat = heat_gram(b, nu, T);
  const auto h = random_field(b, rng);
  const auto x = invert_info_op(heat, h);
  for (std::size_t p = 0; p < b->pairs(); ++p) {
    const double z = 2.0 * nu * b->pair(p).lambda * T;
    CHECK(std::abs(x[p] - h[p] * z / -std::expm1(-z)) <= 1e-12 * std::abs(x[p]));
  }

  const auto g = assemble_gram_streaming(flow(forward(taylor_green(b, 2.0), nu, T, 1e-3), nu, 1e-3));
  InvertOptions cg, dense;
  cg.method = InvertOptions::Method::cg;
  dense.method = InvertOptions::Method::dense;
  for (int trial = 0; trial < 5; ++trial) {
    const auto v = random_field(b, rng);
    CHECK((invert_info_op(g, g.apply(v), cg) - v).l2_norm() <= 1e-8 * v.l2_norm());
    CHECK((invert_info_op(g, g.apply(v), dense) - v).l2_norm() <= 1e-8 * v.l2_norm());
    CHECK((invert_info_op(g, g.apply(v)) - v).l2_norm() <= 1e-8 * v.l2_norm());
  }
  CHECK(invert_info_op(g, DivFreeCoeffs(b), cg).is_zero());

  CgReport rep;
  const Eigen::VectorXd rhs = h.to_real();
  const auto sol = conjugate_gradient(g.G, rhs, 1e-10, 10000, &rep);
  CHECK(rep.relative_residual <= 1e-10);
  CHECK((g.G * sol - rhs).norm() <= 1e-10 * rhs.norm() * 1.0001);
  CHECK(rep.iterations > 0);
  try {
    conjugate_gradient(g.G, rhs, 1e-14, 2);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.residual > 1e-14);
  }
  CHECK_THROWS_AS(invert_info_op(g, DivFreeCoeffs(Basis::with_radius(2))), std::invalid_argument);
}

TEST_CASE("inverse is bounded from H1 to H-1 across truncations") {
  const double nu = 0.1, T = 0.2;
  RandomSource rng(5);
  std::vector<double> worst;
  for (std::size_t J : {32, 64, 128}) {
    const auto b = Basis::with_modes(Basis::closed_truncation(J));
    const auto g = assemble_gram_streaming(flow(forward(taylor_green(b, 2.0), nu, T, 1e-3), nu, 1e-3));
    double w = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const auto h = random_field(b, rng, double(trial % 4) - 1.0);
      w = std::max(w, sobolev_norm(invert_info_op(g, h), -1.0) / sobolev_norm(h, 1.0));
    }
    worst.push_back(w);
    MESSAGE("J " << b->real_dim() << " max ratio " << w);
  }
  const double hi = *std::max_element(worst.begin(), worst.end());
  const double lo = *std::min_element(worst.begin(), worst.end());
  CHECK(hi / lo < 1.5);
  CHECK(hi <= 2.0 * nu * T * 1.5);
}

TEST_CASE("limit gaussian sampling") {
  const auto b = Basis::with_radius(4);
  const double nu = 0.1, T = 0.2;
  const auto g = assemble_gram_streaming(flow(forward(taylor_green(b, 2.0), nu, T, 1e-3), nu, 1e-3));
  const auto spec = LimitGaussianSpec::from_gram(g);
  const auto J = Eigen::Index(b->real_dim());
  CHECK((spec.covariance() * g.G - Eigen::MatrixXd::Identity(J, J)).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((spec.factor.triangularView<Eigen::StrictlyUpper>().toDenseMatrix()).norm() == 0.0);

  const Eigen::MatrixXd inv = g.G.inverse();
  RandomSource rng(6);
  const int n = 10000;
  Eigen::VectorXd s = Eigen::VectorXd::Zero(J), s2 = Eigen::VectorXd::Zero(J), s4 = Eigen::VectorXd::Zero(J);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd v = sample_limit_initial(spec, rng).to_real();
    s += v;
    s2 += v.cwiseAbs2();
    s4 += v.cwiseAbs2().cwiseAbs2();
  }
  int var_ok = 0, mean_ok = 0;
  for (Eigen::Index j = 0; j < J; ++j) {
    const double mean = s[j] / n, m2 = s2[j] / n;
    if (std::abs(mean) <= 3.0 * std::sqrt(inv(j, j) / n)) ++mean_ok;
    const double se = std::sqrt((s4[j] / n - m2 * m2) / n);
    if (std::abs(m2 - inv(j, j)) <= 3.0 * se) ++var_ok;
  }
  MESSAGE("modes within 3 SE: variance " << var_ok << " mean " << mean_ok << " of " << J);
  CHECK(var_ok >= 0.95 * double(J));
  CHECK(mean_ok >= 0.95 * double(J));

  RandomSource a(7), c(7);
  CHECK((sample_limit_initial(spec, a) - sample_limit_initial(spec, c)).l2_norm() == 0.0);
}

TEST_CASE("second moment in negative sobolev norms") {
  // Heat-case inverse is diagonal: E|draw|^2_{H^-kappa} = sum_j (G^-1)_jj lambda_j^-kappa.
  const double nu = 0.1, T = 0.2;
  auto moment = [&](std::size_t J, double kappa) {
    const auto b = Basis::with_modes(Basis::closed_truncation(J));
    double s = 0.0;
    for (std::size_t r = 0; r < b->real_dim(); ++r) {
      const double lam = b->pair(r / 2).lambda;
      s += std::pow(lam, -kappa) / heat_diag(lam, nu, T);
    }
    return s;
  };
  std::vector<double> m2, m3;
  for (std::size_t J : {64, 256, 1024, 4096}) {
    m2.push_back(moment(J, 2.0));
    m3.push_back(moment(J, 3.0));
  }
  for (std::size_t i = 1; i < m2.size(); ++i) {
    // Logarithmic growth: each quadrupling of J adds a roughly constant amount.
    CHECK(m2[i] - m2[i - 1] > 0.5 * (m2[1] - m2[0]));
    CHECK(m3[i] - m3[i - 1] < 0.3 * (m3[i - 1] - (i > 1 ? m3[i - 2] : 0.0)));
  }
  CHECK((m3.back() - m3[m3.size() - 2]) / m3.back() < 1e-2);

  // Monte Carlo check of the same moment on a streamed heat gram.
  const auto b = Basis::with_modes(Basis::closed_truncation(64));
  const auto spec = LimitGaussianSpec::from_gram(assemble_gram_streaming(flow(zero_trajectory(b, T), nu, 1e-4)));
  RandomSource rng(8);
  const int n = 10000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = std::pow(sobolev_norm(sample_limit_initial(spec, rng), -3.0), 2);
    s += v;
    s2 += v * v;
  }
  const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
  CHECK(std::abs(mean - moment(64, 3.0)) <= 3.0 * se);
}

TEST_CASE("limit process") {
  const auto b = Basis::with_radius(3);
  const double nu = 0.1, T = 0.2;
  const auto cfg = flow(zero_trajectory(b, T), nu, 1e-3);
  const auto spec = LimitGaussianSpec::from_gram(heat_gram(b, nu, T));
  const double t = 0.1;
  const Point2 x{0.3, 0.55};
  // Closed form: sum over real directions of (G^-1)_jj e^{-2 nu lambda_j t} e_j(x)^2.
  Vec2 var{0.0, 0.0};
  for (std::size_t r = 0; r < b->real_dim(); ++r) {
    const double lam = b->pair(r / 2).lambda;
    const auto e = evaluate_at(DivFreeCoeffs::unit(b, r), x);
    for (int c = 0; c < 2; ++c) var[c] += std::exp(-2.0 * nu * lam * t) / heat_diag(lam, nu, T) * e[c] * e[c];
  }
  RandomSource rng(9);
  const int n = 4000;
  Vec2 s{0, 0}, s2{0, 0};
  double sup_mean = 0.0;
  std::vector<Vec2> sum(9, Vec2{0, 0});
  for (int i = 0; i < n; ++i) {
    const auto U = sample_limit_process(spec, cfg, 0.05, 0.15, rng);
    CHECK(U.start() == doctest::Approx(0.05));
    CHECK(U.end() == doctest::Approx(0.15));
    const auto v = evaluate_at(U.at(t), x);
    for (int c = 0; c < 2; ++c) {
      s[c] += v[c] * v[c];
      s2[c] += std::pow(v[c], 4);
    }
    for (int q = 0; q < 9; ++q) {
      const auto w = evaluate_at(U.at(0.05 + 0.1 * q / 8), Point2{q / 9.0, 1.0 - q / 9.0});
      sum[q][0] += w[0];
      sum[q][1] += w[1];
    }
  }
  for (int c = 0; c < 2; ++c) {
    const double m = s[c] / n, se = std::sqrt((s2[c] / n - m * m) / n);
    CHECK(std::abs(m - var[c]) <= 3.0 * se);
  }
  for (const auto& v : sum) sup_mean = std::max({sup_mean, std::abs(v[0]) / n, std::abs(v[1]) / n});
  double vmax = 0.0;  // |e_j(x)|^2 <= 2 bounds every probe variance
  for (std::size_t r = 0; r < b->real_dim(); ++r) {
    const double lam = b->pair(r / 2).lambda;
    vmax += 2.0 * std::exp(-2.0 * nu * lam * 0.05) / heat_diag(lam, nu, T);
  }
  CHECK(sup_mean <= 4.0 * std::sqrt(vmax / n));

  RandomSource a(10), c(10);
  const auto A = sample_limit_process(spec, cfg, 0.0, T, a);
  const auto C = sample_limit_process(spec, cfg, 0.0, T, c);
  CHECK((A.final_state() - C.final_state()).l2_norm() == 0.0);
  CHECK(A.size() == 201);
  CHECK_THROWS_AS(sample_limit_process(spec, cfg, 0.1, 0.3, a), std::invalid_argument);
}
