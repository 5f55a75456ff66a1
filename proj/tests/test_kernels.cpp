#include "doctest.h"

#include <atomic>
#include <vector>

#include "nsbayes/kernels.hpp"
#include "nsbayes/rng.hpp"

using namespace nsbayes;
using namespace nsbayes::kernels;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, RandomSource& rng) {
  Eigen::MatrixXd M(r, c);
  for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] = rng.gaussian();
  return M;
}

}  // namespace

TEST_CASE("for_each_index visits every index once") {
  for (Exec e : {Exec::serial, Exec::parallel}) {
    std::vector<std::atomic<int>> hits(1000);
    std::atomic<int> bad_slot{0};
    for_each_index(e, hits.size(), [&](std::size_t i, int slot) {
      hits[i]++;
      if (slot < 0 || slot >= worker_slots(e)) bad_slot++;
    });
    for (auto& h : hits) CHECK(h.load() == 1);
    CHECK(bad_slot.load() == 0);
  }
  CHECK(worker_slots(Exec::serial) == 1);
}

TEST_CASE("gram accumulation") {
  RandomSource rng(1);
  const auto X = random_matrix(40, 17, rng);
  Eigen::MatrixXd Gs = Eigen::MatrixXd::Identity(17, 17), Gp = Gs;
  serial::gram_accumulate(Gs, X, 0.3);
  omp::gram_accumulate(Gp, X, 0.3);
  const Eigen::MatrixXd expect = Eigen::MatrixXd::Identity(17, 17) + 0.3 * X.transpose() * X;
  CHECK((Gs - expect).norm() <= 1e-13 * expect.norm());
  CHECK((Gp - Gs).norm() <= 1e-14 * expect.norm());
  CHECK((Gs - Gs.transpose()).norm() == 0.0);
}

TEST_CASE("observation functionals") {
  RandomSource rng(2);
  ObservationRows rows;
  rows.E = random_matrix(2 * 50, 12, rng);
  const auto states = random_matrix(12, 9, rng);
  for (int i = 0; i < 50; ++i) {
    rows.node.push_back(std::size_t(i % 8));
    rows.weight.push_back(rng.uniform());
  }
  Eigen::VectorXd s(100), p(100);
  serial::observe(rows, states, s);
  omp::observe(rows, states, p);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd x = (1 - rows.weight[i]) * states.col(Eigen::Index(rows.node[i])) +
                              rows.weight[i] * states.col(Eigen::Index(rows.node[i] + 1));
    const Eigen::Vector2d y = rows.E.middleRows(2 * i, 2) * x;
    CHECK(std::abs(s[2 * i] - y[0]) <= 1e-13);
    CHECK(std::abs(s[2 * i + 1] - y[1]) <= 1e-13);
  }
  CHECK((s - p).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sample projections") {
  RandomSource rng(3);
  const auto S = random_matrix(300, 25, rng);
  const Eigen::VectorXd d = random_matrix(25, 1, rng);
  Eigen::VectorXd a(300), b(300);
  serial::project_samples(S, d, a);
  omp::project_samples(S, d, b);
  CHECK((a - S * d).norm() <= 1e-13 * (S * d).norm());
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}
