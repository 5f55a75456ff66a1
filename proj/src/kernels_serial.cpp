#include "nsbayes/kernels.hpp"

namespace nsbayes::kernels {

namespace serial {

void for_each_index(std::size_t count, const IndexedBody& body) {
  for (std::size_t i = 0; i < count; ++i) body(i, 0);
}

void gram_accumulate(Eigen::Ref<Eigen::MatrixXd> G, const Eigen::Ref<const Eigen::MatrixXd>& X, double w) {
  const Eigen::Index n = X.cols();
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i <= j; ++i) {
      double s = 0.0;
      for (Eigen::Index r = 0; r < X.rows(); ++r) s += X(r, i) * X(r, j);
      G(i, j) += w * s;
      if (i != j) G(j, i) += w * s;
    }
}

void observe(const ObservationRows& rows, const Eigen::Ref<const Eigen::MatrixXd>& states,
             Eigen::Ref<Eigen::VectorXd> out) {
  const std::size_t N = rows.node.size();
  for (std::size_t i = 0; i < N; ++i) {
    const auto n0 = Eigen::Index(rows.node[i]);
    const double w = rows.weight[i];
    for (int c = 0; c < 2; ++c) {
      const Eigen::Index r = Eigen::Index(2 * i + c);
      double a = 0.0, b = 0.0;
      for (Eigen::Index j = 0; j < rows.E.cols(); ++j) {
        a += rows.E(r, j) * states(j, n0);
        if (w != 0.0) b += rows.E(r, j) * states(j, n0 + 1);
      }
      out[r] = (1.0 - w) * a + w * b;
    }
  }
}

void project_samples(const Eigen::Ref<const Eigen::MatrixXd>& samples, const Eigen::Ref<const Eigen::VectorXd>& dir,
                     Eigen::Ref<Eigen::VectorXd> out) {
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < samples.cols(); ++j) s += samples(i, j) * dir[j];
    out[i] = s;
  }
}

}  // namespace serial

}  // namespace nsbayes::kernels
