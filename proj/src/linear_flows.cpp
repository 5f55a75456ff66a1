#include "nsbayes/linear_flows.hpp"

#include <cmath>
#include <sstream>

#include "schemes.hpp"

namespace nsbayes {

DivFreeCoeffs heat_evolve(const DivFreeCoeffs& h, double t, double nu) {
  DivFreeCoeffs out = h;
  for (std::size_t p = 0; p < h.pairs(); ++p) out[p] *= std::exp(-nu * h.basis().pair(p).lambda * t);
  return out;
}

double heat_gram_symbol(double lambda, double T, double nu) {
  const double z = 2.0 * nu * lambda;
  return -std::expm1(-z * T) / z;
}

DivFreeCoeffs L_star_L(const DivFreeCoeffs& h, double T, double nu) {
  DivFreeCoeffs out = h;
  for (std::size_t p = 0; p < h.pairs(); ++p) out[p] *= heat_gram_symbol(h.basis().pair(p).lambda, T, nu);
  return out;
}

DivFreeCoeffs laplacian(const DivFreeCoeffs& u) {
  DivFreeCoeffs out = u;
  for (std::size_t p = 0; p < u.pairs(); ++p) out[p] *= -u.basis().pair(p).lambda;
  return out;
}

// ---------------------------------------------------------------------------

void LinearFlowConfig::validate() const {
  if (!background) throw std::invalid_argument("LinearFlowConfig: background trajectory not set");
  if (!(nu > 0.0)) throw std::invalid_argument("LinearFlowConfig: nu must be > 0");
  if (!(dt > 0.0)) throw std::invalid_argument("LinearFlowConfig: dt must be > 0");
  if (std::abs(background->start()) > 1e-12)
    throw std::invalid_argument("LinearFlowConfig: background must start at t = 0");
  const double T = horizon();
  const double m = std::round(T / dt);
  if (m < 1.0 || std::abs(m * dt - T) > 1e-12 * std::max(1.0, T))
    throw std::invalid_argument("LinearFlowConfig: dt does not divide the background horizon");
  if (n != 0 && n < basis()->min_dealiased_grid())
    throw AliasingError("LinearFlowConfig: grid below dealiasing bound");
}

std::size_t LinearFlowConfig::steps() const { return static_cast<std::size_t>(std::llround(horizon() / dt)); }

int LinearFlowConfig::grid() const { return n != 0 ? n : default_grid(*basis()); }

ForwardConfig LinearFlowConfig::as_forward() const {
  ForwardConfig f;
  f.nu = nu;
  f.T = horizon();
  f.dt = dt;
  f.basis = basis();
  f.n = n;
  f.scheme = scheme;
  f.blowup_ceiling = blowup_ceiling;
  return f;
}

struct LinearFlowBatch::Frame {
  double t = 0.0;
  std::vector<double> u1, u2;                    // velocity of the first background
  std::vector<double> d1v1, d2v1, d1v2, d2v2;    // gradient of the second background
  DivFreeCoeffs source;
  bool has_source = false;
};

struct LinearFlowBatch::Worker {
  Worker(const BasisPtr& basis, int n) : ws(basis, n), buf(8 * std::size_t(n) * n) {}
  AdvectionWorkspace ws;
  std::vector<double> buf;
};

LinearFlowBatch::LinearFlowBatch(const LinearFlowConfig& config, std::vector<DivFreeCoeffs> initial,
                                 const Trajectory* source, const Trajectory* background2, kernels::Exec exec)
    : config_(config), source_(source), background2_(background2), exec_(exec), states_(std::move(initial)) {
  config_.validate();
  steps_ = config_.steps();
  h_ = config_.horizon() / double(steps_);
  zero_background_ = config_.background->is_zero() && (!background2_ || background2_->is_zero());
  for (const auto& s : states_)
    if (s.pairs() != config_.basis()->pairs())
      throw std::invalid_argument("LinearFlowBatch: initial state truncation mismatch");
  if (source_ && (source_->start() > 1e-12 || source_->end() < config_.horizon() - 1e-12))
    throw std::invalid_argument("LinearFlowBatch: source does not cover [0, T]");
  if (background2_ && (background2_->start() > 1e-12 || background2_->end() < config_.horizon() - 1e-12))
    throw std::invalid_argument("LinearFlowBatch: second background does not cover [0, T]");
  const int n = config_.grid();
  const int slots = kernels::worker_slots(exec_);
  for (int i = 0; i < slots; ++i) workers_.push_back(std::make_unique<Worker>(config_.basis(), n));
  frame_worker_ = std::make_unique<Worker>(config_.basis(), n);
  previous_.resize(states_.size());
}

LinearFlowBatch::~LinearFlowBatch() = default;

double LinearFlowBatch::time(std::size_t m) const { return config_.horizon() * double(m) / double(steps_); }

std::shared_ptr<LinearFlowBatch::Frame> LinearFlowBatch::frame_at(double t) {
  if (cached_ && std::abs(cached_->t - t) <= 1e-14 * std::max(1.0, config_.horizon())) return cached_;
  auto f = std::make_shared<Frame>();
  f->t = t;
  if (source_) {
    f->source = source_->at(t);
    f->has_source = true;
  }
  if (!zero_background_) {
    const std::size_t N = std::size_t(config_.grid()) * config_.grid();
    for (auto* v : {&f->u1, &f->u2, &f->d1v1, &f->d2v1, &f->d1v2, &f->d2v2}) v->resize(N);
    auto& ws = frame_worker_->ws;
    const DivFreeCoeffs b1 = config_.background->at(t);
    ws.velocity(b1, f->u1.data(), f->u2.data());
    const DivFreeCoeffs b2 = background2_ ? background2_->at(t) : b1;
    ws.gradient(b2, f->d1v1.data(), f->d2v1.data(), f->d1v2.data(), f->d2v2.data());
  }
  cached_ = f;
  return f;
}

DivFreeCoeffs LinearFlowBatch::explicit_term(const DivFreeCoeffs& U, const Frame& frame, Worker& w) const {
  DivFreeCoeffs e = frame.has_source ? frame.source : DivFreeCoeffs(config_.basis());
  if (zero_background_) return e;
  const std::size_t N = std::size_t(w.ws.n()) * w.ws.n();
  double* U1 = w.buf.data();
  double* U2 = U1 + N;
  double* d1U1 = U2 + N;
  double* d2U1 = d1U1 + N;
  double* d1U2 = d2U1 + N;
  double* d2U2 = d1U2 + N;
  double* w1 = d2U2 + N;
  double* w2 = w1 + N;
  w.ws.velocity(U, U1, U2);
  w.ws.gradient(U, d1U1, d2U1, d1U2, d2U2);
  for (std::size_t i = 0; i < N; ++i) {
    // (u1 . grad) U + (U . grad) u2
    w1[i] = frame.u1[i] * d1U1[i] + frame.u2[i] * d2U1[i] + U1[i] * frame.d1v1[i] + U2[i] * frame.d2v1[i];
    w2[i] = frame.u1[i] * d1U2[i] + frame.u2[i] * d2U2[i] + U1[i] * frame.d1v2[i] + U2[i] * frame.d2v2[i];
  }
  e -= w.ws.project(w1, w2);
  return e;
}

void LinearFlowBatch::advance() {
  if (step_ >= steps_) throw std::logic_error("LinearFlowBatch::advance: already at final time");
  const double t0 = time(step_);
  const double t1 = time(step_ + 1);
  const double nu = config_.nu;
  const std::size_t cols = states_.size();

  if (config_.scheme == TimeScheme::imex_cn) {
    if (step_ == 0) {
      const double sub = h_ / detail::kBootstrapSubsteps;
      std::vector<std::shared_ptr<Frame>> frames;
      for (int i = 0; i < detail::kBootstrapSubsteps; ++i) frames.push_back(frame_at(t0 + i * sub));
      kernels::for_each_index(exec_, cols, [&](std::size_t c, int slot) {
        Worker& w = *workers_[slot];
        previous_[c] = explicit_term(states_[c], *frames[0], w);
        DivFreeCoeffs& U = states_[c];
        for (int i = 0; i < detail::kBootstrapSubsteps; ++i) {
          if (i == 0)
            detail::cn_update(U, previous_[c], sub, nu);
          else
            detail::cn_update(U, explicit_term(U, *frames[i], w), sub, nu);
        }
      });
    } else {
      const auto f = frame_at(t0);
      kernels::for_each_index(exec_, cols, [&](std::size_t c, int slot) {
        DivFreeCoeffs now = explicit_term(states_[c], *f, *workers_[slot]);
        detail::cn_ab2_update(states_[c], now, previous_[c], h_, nu);
        previous_[c] = std::move(now);
      });
    }
  } else {
    const auto f0 = frame_at(t0);
    const auto f1 = frame_at(t1);
    kernels::for_each_index(exec_, cols, [&](std::size_t c, int slot) {
      Worker& w = *workers_[slot];
      const DivFreeCoeffs n_u = explicit_term(states_[c], *f0, w);
      DivFreeCoeffs a = detail::etd_predict(states_[c], n_u, h_, nu);
      const DivFreeCoeffs n_a = explicit_term(a, *f1, w);
      detail::etd_correct(a, n_a, n_u, h_, nu);
      states_[c] = std::move(a);
    });
  }
  ++step_;
  for (std::size_t c = 0; c < cols; ++c) {
    const double norm = states_[c].l2_norm();
    if (!(norm <= config_.blowup_ceiling)) {
      std::ostringstream os;
      os << "linearised flow: column " << c << " L2 norm " << norm << " exceeds ceiling at t = " << t1;
      throw SolverError(os.str());
    }
  }
}

Eigen::MatrixXd LinearFlowBatch::real_states() const {
  Eigen::MatrixXd X(config_.basis()->real_dim(), states_.size());
  for (std::size_t c = 0; c < states_.size(); ++c) states_[c].to_real(X.col(Eigen::Index(c)));
  return X;
}

std::shared_ptr<const Trajectory> zero_trajectory(const BasisPtr& basis, double T) {
  ForwardConfig cfg;
  cfg.basis = basis;
  cfg.T = T;
  cfg.dt = T;
  return std::make_shared<const Trajectory>(cfg, std::vector<double>{0.0, T},
                                            std::vector<DivFreeCoeffs>{DivFreeCoeffs(basis), DivFreeCoeffs(basis)});
}

Trajectory linearize_solve(const LinearFlowConfig& config, const DivFreeCoeffs& xi, const Trajectory* source,
                           const Trajectory* background2) {
  LinearFlowBatch batch(config, {xi}, source, background2, kernels::Exec::serial);
  std::vector<double> times{0.0};
  std::vector<DivFreeCoeffs> states{xi};
  while (batch.step_index() < batch.steps()) {
    batch.advance();
    times.push_back(batch.current_time());
    states.push_back(batch.states()[0]);
  }
  return Trajectory(config.as_forward(), std::move(times), std::move(states));
}

std::vector<double> trapezoid_weights(const std::vector<double>& times) {
  std::vector<double> w(times.size(), 0.0);
  for (std::size_t m = 0; m + 1 < times.size(); ++m) {
    const double half = 0.5 * (times[m + 1] - times[m]);
    if (!(half > 0.0)) throw std::invalid_argument("trapezoid_weights: times must increase strictly");
    w[m] += half;
    w[m + 1] += half;
  }
  return w;
}

std::vector<double> solver_times(const LinearFlowConfig& config) {
  config.validate();
  const std::size_t M = config.steps();
  std::vector<double> t(M + 1);
  for (std::size_t m = 0; m <= M; ++m) t[m] = config.horizon() * double(m) / double(M);
  return t;
}

Eigen::VectorXd PropagatorMatrix::apply(const DivFreeCoeffs& h) const { return entries * h.to_real(); }

PropagatorMatrix assemble_propagator(const LinearFlowConfig& config, const std::vector<double>& sample_times,
                                     const AssemblyOptions& options) {
  config.validate();
  const BasisPtr& basis = config.basis();
  const std::size_t J = basis->real_dim();
  if (J > options.max_dim)
    throw std::length_error("assemble_propagator: J = " + std::to_string(J) + " exceeds assembly limit " +
                            std::to_string(options.max_dim));
  if (sample_times.empty()) throw std::invalid_argument("assemble_propagator: no sample times");
  const std::size_t M = config.steps();
  const double T = config.horizon();
  std::vector<std::size_t> nodes;
  for (double t : sample_times) {
    const double m = std::round(t / T * double(M));
    if (m < 0 || m > double(M) || std::abs(m * T / double(M) - t) > 1e-9 * std::max(1.0, T))
      throw std::invalid_argument("assemble_propagator: sample time is not a solver node");
    if (!nodes.empty() && std::size_t(m) <= nodes.back())
      throw std::invalid_argument("assemble_propagator: sample times must increase strictly");
    nodes.push_back(std::size_t(m));
  }

  PropagatorMatrix P;
  P.basis = basis;
  P.sample_times = sample_times;
  P.weights = sample_times.size() > 1 ? trapezoid_weights(sample_times) : std::vector<double>{1.0};
  P.entries.setZero(Eigen::Index(sample_times.size() * J), Eigen::Index(J));
  P.background_hash = config.background->hash();

  std::vector<DivFreeCoeffs> columns;
  columns.reserve(J);
  for (std::size_t j = 0; j < J; ++j) columns.push_back(DivFreeCoeffs::unit(basis, j));
  LinearFlowBatch batch(config, std::move(columns), nullptr, nullptr, options.exec);

  std::size_t next = 0;
  for (;;) {
    if (next < nodes.size() && nodes[next] == batch.step_index()) {
      P.entries.middleRows(Eigen::Index(next * J), Eigen::Index(J)) = std::sqrt(P.weights[next]) * batch.real_states();
      ++next;
    }
    if (next == nodes.size() || batch.step_index() == batch.steps()) break;
    batch.advance();
  }
  return P;
}

DivFreeCoeffs adjoint_apply(const PropagatorMatrix& P, const Eigen::VectorXd& w) {
  if (w.size() != P.entries.rows())
    throw std::invalid_argument("adjoint_apply: vector length " + std::to_string(w.size()) + " != " +
                                std::to_string(P.entries.rows()));
  return DivFreeCoeffs::from_real(P.basis, P.entries.transpose() * w);
}

}  // namespace nsbayes
