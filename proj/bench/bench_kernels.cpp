// Serial reference kernels against their OpenMP versions.
//
//   bench_kernels [--threads N] [--reps R]
// Prints best-of-R wall times and the speedup per kernel.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "CLI11.hpp"
#include "nsbayes/bayes.hpp"
#include "nsbayes/information.hpp"
#include "nsbayes/kernels.hpp"

using namespace nsbayes;

namespace {

double best_of(int reps, const std::function<void()>& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void report(const std::string& name, double serial, double parallel) {
  std::printf("%-34s %12.4f %12.4f %8.2fx\n", name.c_str(), serial * 1e3, parallel * 1e3, serial / parallel);
}

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, RandomSource& rng) {
  Eigen::MatrixXd M(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) M(i, j) = rng.gaussian();
  return M;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs OpenMP kernel benchmark"};
  int threads = 0, reps = 3;
  app.add_option("--threads", threads, "OpenMP threads (default: OpenMP default)");
  app.add_option("--reps", reps, "repetitions per measurement")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);
  if (threads > 0) kernels::omp::set_threads(threads);

  std::printf("OpenMP threads: %d\n", kernels::omp::max_threads());
  std::printf("%-34s %12s %12s %9s\n", "kernel", "serial ms", "omp ms", "speedup");
  RandomSource rng(1);
  using kernels::Exec;

  {
    const Eigen::MatrixXd X = random_matrix(1024, 256, rng);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(256, 256);
    report("gram_accumulate 1024x256",
           best_of(reps, [&] { kernels::gram_accumulate(Exec::serial, G, X, 1.0); }),
           best_of(reps, [&] { kernels::gram_accumulate(Exec::parallel, G, X, 1.0); }));
  }
  {
    const auto b = Basis::with_radius(8);
    ForwardConfig fc;
    fc.basis = b;
    fc.T = 1.0;
    fc.dt = 0.01;
    const auto truth = solve_ns(taylor_green(b), DivFreeCoeffs(b), fc);
    const auto data = generate_data(truth, 20000, 1.0, rng);
    ObservationModel serial(data, fc, Exec::serial), parallel(data, fc, Exec::parallel);
    report("observe N=20000 radius 8",
           best_of(reps, [&] { serial.log_likelihood(truth); }),
           best_of(reps, [&] { parallel.log_likelihood(truth); }));
  }
  {
    const Eigen::MatrixXd S = random_matrix(4000, 5202, rng);
    Eigen::VectorXd dir = Eigen::VectorXd::Ones(5202), out(4000);
    report("project_samples 4000x5202",
           best_of(reps, [&] { kernels::project_samples(Exec::serial, S, dir, out); }),
           best_of(reps, [&] { kernels::project_samples(Exec::parallel, S, dir, out); }));
  }
  {
    const auto b = Basis::with_radius(6);
    LinearFlowConfig lc;
    lc.nu = 0.1;
    lc.dt = 1e-3;
    ForwardConfig fc;
    fc.basis = b;
    fc.T = 0.1;
    fc.dt = lc.dt;
    lc.background = std::make_shared<const Trajectory>(solve_ns(taylor_green(b, 2.0), DivFreeCoeffs(b), fc));
    report("streaming gram radius 6, 100 steps",
           best_of(reps, [&] { assemble_gram_streaming(lc, Exec::serial); }),
           best_of(reps, [&] { assemble_gram_streaming(lc, Exec::parallel); }));
  }
  return 0;
}
