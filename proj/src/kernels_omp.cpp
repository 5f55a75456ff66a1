#include <omp.h>

#include "nsbayes/kernels.hpp"

namespace nsbayes::kernels {

namespace omp {

int max_threads() { return omp_get_max_threads(); }
void set_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

void for_each_index(std::size_t count, const IndexedBody& body) {
  const auto n = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < n; ++i) body(static_cast<std::size_t>(i), omp_get_thread_num());
}

void gram_accumulate(Eigen::Ref<Eigen::MatrixXd> G, const Eigen::Ref<const Eigen::MatrixXd>& X, double w) {
  const Eigen::Index n = X.cols();
#pragma omp parallel for schedule(dynamic, 4)
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto xj = X.col(j);
    for (Eigen::Index i = 0; i <= j; ++i) {
      const double s = w * X.col(i).dot(xj);
      G(i, j) += s;
      if (i != j) G(j, i) += s;
    }
  }
}

void observe(const ObservationRows& rows, const Eigen::Ref<const Eigen::MatrixXd>& states,
             Eigen::Ref<Eigen::VectorXd> out) {
  const auto N = static_cast<long long>(rows.node.size());
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < N; ++i) {
    const auto n0 = Eigen::Index(rows.node[i]);
    const double w = rows.weight[i];
    const auto block = rows.E.middleRows(2 * i, 2);
    Eigen::Vector2d v = (1.0 - w) * (block * states.col(n0));
    if (w != 0.0) v += w * (block * states.col(n0 + 1));
    out.segment<2>(2 * i) = v;
  }
}

void project_samples(const Eigen::Ref<const Eigen::MatrixXd>& samples, const Eigen::Ref<const Eigen::VectorXd>& dir,
                     Eigen::Ref<Eigen::VectorXd> out) {
  const Eigen::Index n = samples.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) out[i] = samples.row(i).dot(dir);
}

}  // namespace omp

int worker_slots(Exec exec) { return exec == Exec::serial ? 1 : omp::max_threads(); }

}  // namespace nsbayes::kernels
