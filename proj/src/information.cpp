#include "nsbayes/information.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <sstream>

namespace nsbayes {

namespace {

void symmetrize(Eigen::MatrixXd& G) {
  const Eigen::MatrixXd S = 0.5 * (G + G.transpose());
  G = S;
}

void require_spd(const OperatorGram& g, const char* who) {
  const Eigen::VectorXd ev = g.eigenvalues();
  if (!(ev[0] > 0.0)) {
    std::ostringstream os;
    os << who << ": information matrix not positive definite (smallest eigenvalue " << ev[0] << ")";
    throw NotPositiveDefinite(os.str(), ev[0]);
  }
}

}  // namespace

DivFreeCoeffs OperatorGram::apply(const DivFreeCoeffs& h) const {
  return DivFreeCoeffs::from_real(basis, G * h.to_real());
}

Eigen::VectorXd OperatorGram::eigenvalues() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

OperatorGram assemble_gram(const PropagatorMatrix& P, double T, double nu) {
  if (!(T > 0.0)) throw std::invalid_argument("assemble_gram: T must be > 0");
  OperatorGram g;
  g.basis = P.basis;
  g.T = T;
  g.nu = nu;
  g.background_hash = P.background_hash;
  g.G = (P.entries.transpose() * P.entries) / T;
  symmetrize(g.G);
  require_spd(g, "assemble_gram");
  return g;
}

OperatorGram assemble_gram_streaming(const LinearFlowConfig& config, kernels::Exec exec) {
  config.validate();
  const BasisPtr& basis = config.basis();
  const std::size_t J = basis->real_dim();
  const auto times = solver_times(config);
  const auto w = trapezoid_weights(times);

  std::vector<DivFreeCoeffs> columns;
  columns.reserve(J);
  for (std::size_t j = 0; j < J; ++j) columns.push_back(DivFreeCoeffs::unit(basis, j));
  LinearFlowBatch batch(config, std::move(columns), nullptr, nullptr, exec);

  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(Eigen::Index(J), Eigen::Index(J));
  for (std::size_t m = 0;; ++m) {
    kernels::gram_accumulate(exec, G, batch.real_states(), w[m]);
    if (m == batch.steps()) break;
    batch.advance();
  }
  OperatorGram g;
  g.basis = basis;
  g.T = config.horizon();
  g.nu = config.nu;
  g.background_hash = config.background->hash();
  g.G = G / g.T;
  symmetrize(g.G);
  require_spd(g, "assemble_gram_streaming");
  return g;
}

Eigen::MatrixXd compact_remainder(const OperatorGram& gram) {
  Eigen::MatrixXd K = gram.T * gram.G;
  for (std::size_t p = 0; p < gram.basis->pairs(); ++p) {
    const double s = heat_gram_symbol(gram.basis->pair(p).lambda, gram.T, gram.nu);
    K(Eigen::Index(2 * p), Eigen::Index(2 * p)) -= s;
    K(Eigen::Index(2 * p + 1), Eigen::Index(2 * p + 1)) -= s;
  }
  return K;
}

Eigen::MatrixXd compact_remainder(const PropagatorMatrix& P, double T, double nu) {
  OperatorGram g;
  g.basis = P.basis;
  g.T = T;
  g.nu = nu;
  g.G = (P.entries.transpose() * P.entries) / T;
  symmetrize(g.G);
  return compact_remainder(g);
}

std::vector<BandDiagnostic> band_diagnostics(const Eigen::MatrixXd& K, const Basis& basis, double T, double nu) {
  std::vector<BandDiagnostic> out;
  double top = 0.0;
  for (std::size_t p = 0; p < basis.pairs(); ++p) top = std::max(top, basis.pair(p).norm);
  const long top2 = std::lround(top * top);
  for (int m = 0;; ++m) {
    const double lo = std::ldexp(1.0, m);
    const double hi = std::ldexp(1.0, m + 1);
    std::vector<Eigen::Index> idx;
    double heat = 0.0;
    bool beyond = true;
    for (std::size_t p = 0; p < basis.pairs(); ++p) {
      const auto& mode = basis.pair(p);
      if (mode.norm >= lo) beyond = false;
      if (mode.norm >= lo && mode.norm < hi) {
        idx.push_back(Eigen::Index(2 * p));
        idx.push_back(Eigen::Index(2 * p + 1));
        heat = std::max(heat, heat_gram_symbol(mode.lambda, T, nu));
      }
    }
    if (beyond) break;
    if (idx.empty()) continue;
    Eigen::MatrixXd block(idx.size(), idx.size());
    for (std::size_t a = 0; a < idx.size(); ++a)
      for (std::size_t b = 0; b < idx.size(); ++b) block(Eigen::Index(a), Eigen::Index(b)) = K(idx[a], idx[b]);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(block);
    BandDiagnostic d;
    d.band = m;
    d.dim = idx.size();
    d.remainder_norm = svd.singularValues()[0];
    d.heat_norm = heat;
    d.complete = (4L << (2 * m)) - 1 <= top2;
    out.push_back(d);
  }
  return out;
}

Eigen::VectorXd conjugate_gradient(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double tol,
                                   std::size_t max_iter, CgReport* report) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  const double bnorm = b.norm();
  if (report) *report = {};
  if (bnorm == 0.0) return x;
  Eigen::VectorXd r = b;
  Eigen::VectorXd p = r;
  Eigen::VectorXd q(b.size());
  double rr = r.squaredNorm();
  std::size_t it = 0;
  while (std::sqrt(rr) > tol * bnorm) {
    if (it == max_iter) {
      std::ostringstream os;
      os << "conjugate_gradient: no convergence after " << it << " iterations (relative residual "
         << std::sqrt(rr) / bnorm << ", target " << tol << ")";
      throw ConvergenceError(os.str(), std::sqrt(rr) / bnorm);
    }
    q.noalias() = A * p;
    const double alpha = rr / p.dot(q);
    x += alpha * p;
    r -= alpha * q;
    const double rr_new = r.squaredNorm();
    p = r + (rr_new / rr) * p;
    rr = rr_new;
    ++it;
  }
  if (report) *report = {it, std::sqrt(rr) / bnorm};
  return x;
}

DivFreeCoeffs invert_info_op(const OperatorGram& gram, const DivFreeCoeffs& h, const InvertOptions& options) {
  if (h.modes() != gram.dim()) throw std::invalid_argument("invert_info_op: dimension mismatch");
  const Eigen::VectorXd b = h.to_real();
  auto method = options.method;
  if (method == InvertOptions::Method::automatic)
    method = gram.dim() <= 256 ? InvertOptions::Method::dense : InvertOptions::Method::cg;
  Eigen::VectorXd x;
  if (method == InvertOptions::Method::dense) {
    Eigen::LLT<Eigen::MatrixXd> llt(gram.G);
    if (llt.info() != Eigen::Success)
      throw NotPositiveDefinite("invert_info_op: Cholesky factorisation failed", gram.eigenvalues()[0]);
    x = llt.solve(b);
  } else {
    const std::size_t cap = options.max_iter ? options.max_iter : 10 * gram.dim() + 100;
    x = conjugate_gradient(gram.G, b, options.tol, cap);
  }
  return DivFreeCoeffs::from_real(gram.basis, x);
}

LimitGaussianSpec LimitGaussianSpec::from_gram(OperatorGram gram) {
  const auto J = Eigen::Index(gram.dim());
  Eigen::LLT<Eigen::MatrixXd> llt(gram.G);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("LimitGaussianSpec: information matrix not SPD", gram.eigenvalues()[0]);
  Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(J, J));
  symmetrize(cov);
  Eigen::LLT<Eigen::MatrixXd> cov_llt(cov);
  if (cov_llt.info() != Eigen::Success)
    throw NotPositiveDefinite("LimitGaussianSpec: inverse not SPD", gram.eigenvalues()[0]);
  LimitGaussianSpec spec;
  spec.factor = cov_llt.matrixL();
  spec.gram = std::move(gram);
  return spec;
}

DivFreeCoeffs sample_limit_initial(const LimitGaussianSpec& spec, RandomSource& rng) {
  Eigen::VectorXd z(spec.factor.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.gaussian();
  return DivFreeCoeffs::from_real(spec.gram.basis, spec.factor.triangularView<Eigen::Lower>() * z);
}

Trajectory sample_limit_process(const LimitGaussianSpec& spec, const LinearFlowConfig& config, double t_min,
                                double t_max, RandomSource& rng) {
  if (!(t_min <= t_max) || t_min < 0.0 || t_max > config.horizon() + 1e-12)
    throw std::invalid_argument("sample_limit_process: window outside [0, T]");
  const DivFreeCoeffs theta = sample_limit_initial(spec, rng);
  const Trajectory full = linearize_solve(config, theta);
  std::vector<double> times;
  std::vector<DivFreeCoeffs> states;
  const double tol = 1e-12 * std::max(1.0, config.horizon());
  for (std::size_t m = 0; m < full.size(); ++m) {
    const double t = full.times()[m];
    if (t >= t_min - tol && t <= t_max + tol) {
      times.push_back(t);
      states.push_back(full.state(m));
    }
  }
  if (states.empty()) throw std::invalid_argument("sample_limit_process: window contains no solver node");
  return Trajectory(full.config(), std::move(times), std::move(states));
}

}  // namespace nsbayes
