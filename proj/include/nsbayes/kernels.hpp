#pragma once

// Data-parallel inner loops. Every kernel has a plain serial reference in
// nsbayes::kernels::serial and an OpenMP version in nsbayes::kernels::omp with
// identical semantics; tests check them against each other and bench/ times them.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace nsbayes::kernels {

enum class Exec { serial, parallel };

/// Body receives (index, worker slot); slot < worker_slots(exec).
using IndexedBody = std::function<void(std::size_t, int)>;

/// One linear observation functional pair acting on interpolated states:
/// y = (1 - w) E x[node] + w E x[node + 1], E a 2 x J block.
struct ObservationRows {
  Eigen::MatrixXd E;  // (2 N) x J, rows 2i and 2i+1 belong to record i
  std::vector<std::size_t> node;
  std::vector<double> weight;
};

namespace serial {
void for_each_index(std::size_t count, const IndexedBody& body);
/// G += w X^T X (upper and lower triangles both written).
void gram_accumulate(Eigen::Ref<Eigen::MatrixXd> G, const Eigen::Ref<const Eigen::MatrixXd>& X, double w);
/// out(2i..2i+1) = model value at record i; states are columns of `states` (J x nodes).
void observe(const ObservationRows& rows, const Eigen::Ref<const Eigen::MatrixXd>& states,
             Eigen::Ref<Eigen::VectorXd> out);
/// Row-wise projections out = S d for samples S (n x dim) and direction d.
void project_samples(const Eigen::Ref<const Eigen::MatrixXd>& samples, const Eigen::Ref<const Eigen::VectorXd>& dir,
                     Eigen::Ref<Eigen::VectorXd> out);
}  // namespace serial

namespace omp {
void for_each_index(std::size_t count, const IndexedBody& body);
void gram_accumulate(Eigen::Ref<Eigen::MatrixXd> G, const Eigen::Ref<const Eigen::MatrixXd>& X, double w);
void observe(const ObservationRows& rows, const Eigen::Ref<const Eigen::MatrixXd>& states,
             Eigen::Ref<Eigen::VectorXd> out);
void project_samples(const Eigen::Ref<const Eigen::MatrixXd>& samples, const Eigen::Ref<const Eigen::VectorXd>& dir,
                     Eigen::Ref<Eigen::VectorXd> out);
int max_threads();
void set_threads(int n);
}  // namespace omp

int worker_slots(Exec exec);

inline void for_each_index(Exec e, std::size_t count, const IndexedBody& body) {
  e == Exec::serial ? serial::for_each_index(count, body) : omp::for_each_index(count, body);
}
inline void gram_accumulate(Exec e, Eigen::Ref<Eigen::MatrixXd> G, const Eigen::Ref<const Eigen::MatrixXd>& X,
                            double w) {
  e == Exec::serial ? serial::gram_accumulate(G, X, w) : omp::gram_accumulate(G, X, w);
}
inline void observe(Exec e, const ObservationRows& rows, const Eigen::Ref<const Eigen::MatrixXd>& states,
                    Eigen::Ref<Eigen::VectorXd> out) {
  e == Exec::serial ? serial::observe(rows, states, out) : omp::observe(rows, states, out);
}
inline void project_samples(Exec e, const Eigen::Ref<const Eigen::MatrixXd>& samples,
                            const Eigen::Ref<const Eigen::VectorXd>& dir, Eigen::Ref<Eigen::VectorXd> out) {
  e == Exec::serial ? serial::project_samples(samples, dir, out) : omp::project_samples(samples, dir, out);
}

}  // namespace nsbayes::kernels
