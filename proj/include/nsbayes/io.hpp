#pragma once

// Persistence. Binary containers share one layout:
//   8-byte magic | u64 header length | JSON header | payload (little endian)
// Coefficient payloads are flat records (i32 k1, i32 k2, f64 re, f64 im) per
// stored representative mode; matrix payloads are column-major f64.

#include <Eigen/Dense>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nsbayes/bayes.hpp"
#include "nsbayes/information.hpp"
#include "nsbayes/linear_flows.hpp"
#include "nsbayes/navier_stokes.hpp"
#include "nsbayes/spectral.hpp"

namespace nsbayes::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// J, convention and eigenvalue tags written into every coefficient header.
json basis_header(const Basis& basis);
/// Rebuilds the basis named by a header and checks its tags.
BasisPtr basis_from_header(const json& header);

json coeffs_to_json(const DivFreeCoeffs& u);
DivFreeCoeffs coeffs_from_json(const json& j);
void save_coeffs_json(const fs::path& path, const DivFreeCoeffs& u);
DivFreeCoeffs load_coeffs_json(const fs::path& path);

/// Several coefficient vectors on one basis; `extra` is merged into the header.
void save_coeff_blocks(const fs::path& path, const std::vector<DivFreeCoeffs>& blocks, const json& extra = json::object());
std::vector<DivFreeCoeffs> load_coeff_blocks(const fs::path& path, json* header = nullptr);
void save_coeffs_binary(const fs::path& path, const DivFreeCoeffs& u);
DivFreeCoeffs load_coeffs_binary(const fs::path& path);

json forward_config_to_json(const ForwardConfig& c);
ForwardConfig forward_config_from_json(const json& j, BasisPtr basis);

/// Binary container of the states plus a JSON sidecar (same stem, .json) with the config.
void save_trajectory(const fs::path& path, const Trajectory& traj);
Trajectory load_trajectory(const fs::path& path);

void save_matrix(const fs::path& path, const Eigen::MatrixXd& M, const json& header = json::object());
Eigen::MatrixXd load_matrix(const fs::path& path, json* header = nullptr);

void save_propagator(const fs::path& path, const PropagatorMatrix& P);
void save_gram(const fs::path& path, const OperatorGram& G);
void save_limit_factor(const fs::path& path, const LimitGaussianSpec& spec);

/// Doubles are written with 17 significant digits so output is reproducible byte for byte.
std::string format_double(double v);

class CsvWriter {
public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header);
  void row(const std::vector<double>& values);
  void row(const std::vector<std::string>& cells);

private:
  std::ofstream os_;
  std::size_t width_;
};

/// t, L2 norm, H1 norm, energy residual (of the step ending at t; 0 at t = 0).
void write_norms_csv(const fs::path& path, const Trajectory& traj, const DivFreeCoeffs& f);
/// rank, eigenvalue (ascending).
void write_eigen_csv(const fs::path& path, const Eigen::VectorXd& eigenvalues);

/// CSV (t, x1, x2, y1, y2) plus metadata sidecar.
void save_observations(const fs::path& csv_path, const ObservationSet& data);
ObservationSet load_observations(const fs::path& csv_path);

/// Retained draws as coefficient blocks plus a JSON manifest (prior, beta, acceptance trace).
void save_chain(const fs::path& blocks_path, const fs::path& manifest_path, const PosteriorChain& chain);

void write_json(const fs::path& path, const json& j);
json read_json(const fs::path& path);

}  // namespace nsbayes::io
