#include "nsbayes/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <sstream>

namespace nsbayes::io {

namespace {

constexpr char kCoeffMagic[8] = {'N', 'S', 'B', 'C', 'O', 'E', 'F', '1'};
constexpr char kMatrixMagic[8] = {'N', 'S', 'B', 'M', 'A', 'T', 'X', '1'};
constexpr const char* kConventionTag = "c=(-k2,k1)/|k|";
constexpr const char* kEigenvalueTag = "lambda=(2*pi*|k|)^2";
constexpr const char* kRealityTag = "a(-k)=-conj(a(k))";

#pragma pack(push, 1)
struct ModeRecord {
  std::int32_t k1;
  std::int32_t k2;
  double re;
  double im;
};
#pragma pack(pop)
static_assert(sizeof(ModeRecord) == 24);

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  return os;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  return is;
}

void write_container_header(std::ostream& os, const char (&magic)[8], const json& header) {
  const std::string text = header.dump();
  const std::uint64_t len = text.size();
  os.write(magic, 8);
  os.write(reinterpret_cast<const char*>(&len), sizeof len);
  os.write(text.data(), std::streamsize(text.size()));
}

json read_container_header(std::istream& is, const char (&magic)[8], const fs::path& path) {
  char m[8];
  is.read(m, 8);
  if (!is || std::memcmp(m, magic, 8) != 0) throw FormatError(path.string() + ": wrong file type (bad magic)");
  std::uint64_t len = 0;
  is.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!is || len > (1ULL << 32)) throw FormatError(path.string() + ": corrupt header length");
  std::string text(len, '\0');
  is.read(text.data(), std::streamsize(len));
  if (!is) throw FormatError(path.string() + ": truncated header");
  return json::parse(text);
}

void write_records(std::ostream& os, const DivFreeCoeffs& u) {
  for (std::size_t p = 0; p < u.pairs(); ++p) {
    const auto& m = u.basis().pair(p);
    const ModeRecord r{m.k1, m.k2, u[p].real(), u[p].imag()};
    os.write(reinterpret_cast<const char*>(&r), sizeof r);
  }
}

DivFreeCoeffs read_records(std::istream& is, const BasisPtr& basis, const fs::path& path) {
  DivFreeCoeffs u(basis);
  for (std::size_t p = 0; p < basis->pairs(); ++p) {
    ModeRecord r{};
    is.read(reinterpret_cast<char*>(&r), sizeof r);
    if (!is) throw FormatError(path.string() + ": truncated coefficient payload");
    const auto& m = basis->pair(p);
    if (r.k1 != m.k1 || r.k2 != m.k2) throw FormatError(path.string() + ": mode order does not match the basis");
    u[p] = {r.re, r.im};
  }
  return u;
}

}  // namespace

json basis_header(const Basis& basis) {
  return {{"J", basis.modes()},
          {"stored_modes", basis.pairs()},
          {"convention", kConventionTag},
          {"eigenvalue", kEigenvalueTag},
          {"reality", kRealityTag}};
}

BasisPtr basis_from_header(const json& h) {
  if (!h.contains("J")) throw FormatError("coefficient header lacks J");
  if (h.value("convention", "") != kConventionTag) throw FormatError("coefficient header: unknown basis convention");
  if (h.value("eigenvalue", "") != kEigenvalueTag) throw FormatError("coefficient header: unknown eigenvalue tag");
  return Basis::with_modes(h.at("J").get<std::size_t>());
}

json coeffs_to_json(const DivFreeCoeffs& u) {
  json j = basis_header(u.basis());
  json modes = json::array();
  for (std::size_t p = 0; p < u.pairs(); ++p) {
    const auto& m = u.basis().pair(p);
    modes.push_back({m.k1, m.k2, u[p].real(), u[p].imag()});
  }
  j["modes"] = std::move(modes);
  return j;
}

DivFreeCoeffs coeffs_from_json(const json& j) {
  const BasisPtr basis = basis_from_header(j);
  const auto& modes = j.at("modes");
  if (modes.size() != basis->pairs()) throw FormatError("coefficient JSON: mode count does not match J");
  DivFreeCoeffs u(basis);
  for (std::size_t p = 0; p < basis->pairs(); ++p) {
    const auto& r = modes[p];
    const auto& m = basis->pair(p);
    if (r.at(0).get<int>() != m.k1 || r.at(1).get<int>() != m.k2)
      throw FormatError("coefficient JSON: mode order does not match the basis");
    u[p] = {r.at(2).get<double>(), r.at(3).get<double>()};
  }
  return u;
}

void save_coeffs_json(const fs::path& path, const DivFreeCoeffs& u) { write_json(path, coeffs_to_json(u)); }

DivFreeCoeffs load_coeffs_json(const fs::path& path) { return coeffs_from_json(read_json(path)); }

void save_coeff_blocks(const fs::path& path, const std::vector<DivFreeCoeffs>& blocks, const json& extra) {
  if (blocks.empty()) throw std::invalid_argument("save_coeff_blocks: nothing to write");
  json h = basis_header(blocks.front().basis());
  h["blocks"] = blocks.size();
  for (const auto& [k, v] : extra.items()) h[k] = v;
  auto os = open_out(path);
  write_container_header(os, kCoeffMagic, h);
  for (const auto& b : blocks) {
    if (b.basis_ptr() != blocks.front().basis_ptr() && b.modes() != blocks.front().modes())
      throw std::invalid_argument("save_coeff_blocks: blocks on different bases");
    write_records(os, b);
  }
  if (!os) throw FormatError("write failed: " + path.string());
}

std::vector<DivFreeCoeffs> load_coeff_blocks(const fs::path& path, json* header) {
  auto is = open_in(path);
  const json h = read_container_header(is, kCoeffMagic, path);
  const BasisPtr basis = basis_from_header(h);
  const auto n = h.at("blocks").get<std::size_t>();
  std::vector<DivFreeCoeffs> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(read_records(is, basis, path));
  if (header) *header = h;
  return out;
}

void save_coeffs_binary(const fs::path& path, const DivFreeCoeffs& u) { save_coeff_blocks(path, {u}); }

DivFreeCoeffs load_coeffs_binary(const fs::path& path) {
  auto blocks = load_coeff_blocks(path);
  if (blocks.size() != 1) throw FormatError(path.string() + ": expected a single coefficient block");
  return blocks.front();
}

json forward_config_to_json(const ForwardConfig& c) {
  return {{"nu", c.nu},
          {"T", c.T},
          {"dt", c.dt},
          {"J", c.basis ? c.basis->modes() : 0},
          {"grid", c.n},
          {"scheme", to_string(c.scheme)},
          {"advection", c.advection},
          {"blowup_ceiling", c.blowup_ceiling}};
}

ForwardConfig forward_config_from_json(const json& j, BasisPtr basis) {
  ForwardConfig c;
  c.nu = j.at("nu").get<double>();
  c.T = j.at("T").get<double>();
  c.dt = j.at("dt").get<double>();
  c.n = j.value("grid", 0);
  c.scheme = scheme_from_string(j.value("scheme", "imex-cn"));
  c.advection = j.value("advection", true);
  c.blowup_ceiling = j.value("blowup_ceiling", 1e6);
  c.basis = std::move(basis);
  return c;
}

void save_trajectory(const fs::path& path, const Trajectory& traj) {
  save_coeff_blocks(path, traj.states(), {{"times", traj.times()}});
  fs::path sidecar = path;
  sidecar.replace_extension(".json");
  write_json(sidecar, {{"config", forward_config_to_json(traj.config())},
                       {"nodes", traj.size()},
                       {"hash", traj.hash()},
                       {"payload", path.filename().string()}});
}

Trajectory load_trajectory(const fs::path& path) {
  json h;
  auto states = load_coeff_blocks(path, &h);
  auto times = h.at("times").get<std::vector<double>>();
  fs::path sidecar = path;
  sidecar.replace_extension(".json");
  ForwardConfig cfg;
  if (fs::exists(sidecar)) cfg = forward_config_from_json(read_json(sidecar).at("config"), states.front().basis_ptr());
  else cfg.basis = states.front().basis_ptr();
  return Trajectory(cfg, std::move(times), std::move(states));
}

void save_matrix(const fs::path& path, const Eigen::MatrixXd& M, const json& header) {
  json h = header;
  h["rows"] = M.rows();
  h["cols"] = M.cols();
  h["layout"] = "column-major f64";
  auto os = open_out(path);
  write_container_header(os, kMatrixMagic, h);
  os.write(reinterpret_cast<const char*>(M.data()), std::streamsize(M.size() * sizeof(double)));
  if (!os) throw FormatError("write failed: " + path.string());
}

Eigen::MatrixXd load_matrix(const fs::path& path, json* header) {
  auto is = open_in(path);
  const json h = read_container_header(is, kMatrixMagic, path);
  Eigen::MatrixXd M(h.at("rows").get<Eigen::Index>(), h.at("cols").get<Eigen::Index>());
  is.read(reinterpret_cast<char*>(M.data()), std::streamsize(M.size() * sizeof(double)));
  if (!is) throw FormatError(path.string() + ": truncated matrix payload");
  if (header) *header = h;
  return M;
}

void save_propagator(const fs::path& path, const PropagatorMatrix& P) {
  json h = basis_header(*P.basis);
  h["kind"] = "propagator";
  h["sample_times"] = P.sample_times;
  h["weights"] = P.weights;
  h["background_hash"] = P.background_hash;
  save_matrix(path, P.entries, h);
}

void save_gram(const fs::path& path, const OperatorGram& G) {
  json h = basis_header(*G.basis);
  h["kind"] = "gram";
  h["T"] = G.T;
  h["nu"] = G.nu;
  h["background_hash"] = G.background_hash;
  save_matrix(path, G.G, h);
}

void save_limit_factor(const fs::path& path, const LimitGaussianSpec& spec) {
  json h = basis_header(*spec.gram.basis);
  h["kind"] = "limit-covariance-factor";
  h["triangle"] = "lower";
  h["T"] = spec.gram.T;
  h["nu"] = spec.gram.nu;
  h["background_hash"] = spec.gram.background_hash;
  save_matrix(path, spec.factor, h);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(const fs::path& path, const std::vector<std::string>& header)
    : os_(open_out(path)), width_(header.size()) {
  row(header);
}

void CsvWriter::row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_double(v));
  row(cells);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != width_) throw std::invalid_argument("CsvWriter: row width does not match header");
  for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
  os_ << '\n';
}

void write_norms_csv(const fs::path& path, const Trajectory& traj, const DivFreeCoeffs& f) {
  const auto res = energy_residuals(traj, f);
  CsvWriter csv(path, {"t", "l2", "h1", "energy_residual"});
  for (std::size_t m = 0; m < traj.size(); ++m)
    csv.row({traj.times()[m], traj.state(m).l2_norm(), sobolev_norm(traj.state(m), 1.0), m == 0 ? 0.0 : res[m - 1]});
}

void write_eigen_csv(const fs::path& path, const Eigen::VectorXd& eigenvalues) {
  CsvWriter csv(path, {"rank", "eigenvalue"});
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) csv.row({double(i + 1), eigenvalues[i]});
}

void save_observations(const fs::path& csv_path, const ObservationSet& data) {
  {
    CsvWriter csv(csv_path, {"t", "x1", "x2", "y1", "y2"});
    for (const auto& r : data.records) csv.row({r.t, r.omega.x1, r.omega.x2, r.y[0], r.y[1]});
  }
  fs::path meta = csv_path;
  meta.replace_extension(".json");
  write_json(meta, {{"N", data.size()},
                    {"noise_sd", data.noise_sd},
                    {"T", data.T},
                    {"seed", data.seed},
                    {"hash", data.hash()},
                    {"columns", {"t", "x1", "x2", "y1", "y2"}}});
}

ObservationSet load_observations(const fs::path& csv_path) {
  ObservationSet data;
  fs::path meta = csv_path;
  meta.replace_extension(".json");
  const json m = read_json(meta);
  data.noise_sd = m.at("noise_sd").get<double>();
  data.T = m.at("T").get<double>();
  data.seed = m.at("seed").get<std::uint64_t>();
  std::ifstream is(csv_path);
  if (!is) throw FormatError("cannot open " + csv_path.string());
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    ObservationRecord r;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &r.t, &r.omega.x1, &r.omega.x2, &r.y[0], &r.y[1]) != 5)
      throw FormatError(csv_path.string() + ": malformed row '" + line + "'");
    data.records.push_back(r);
  }
  if (data.size() != m.at("N").get<std::size_t>()) throw FormatError(csv_path.string() + ": row count mismatch");
  return data;
}

void save_chain(const fs::path& blocks_path, const fs::path& manifest_path, const PosteriorChain& chain) {
  if (!chain.draws.empty()) save_coeff_blocks(blocks_path, chain.draws, {{"kind", "posterior-draws"}});
  std::string trace;
  trace.reserve(chain.accepted.size());
  for (auto a : chain.accepted) trace.push_back(a ? '1' : '0');
  write_json(manifest_path, {{"draws_file", blocks_path.filename().string()},
                             {"retained", chain.draws.size()},
                             {"n_iter", chain.n_iter},
                             {"burn_in", chain.burn_in},
                             {"thin", chain.thin},
                             {"beta_pcn", chain.beta},
                             {"prior", {{"alpha", chain.prior.alpha}, {"rho", chain.prior.rho}}},
                             {"data_hash", chain.data_hash},
                             {"acceptance_rate", chain.acceptance_rate()},
                             {"acceptance_rate_after_burn_in", chain.acceptance_rate_after_burn_in()},
                             {"acceptance_trace", trace},
                             {"complete", chain.complete}});
}

void write_json(const fs::path& path, const json& j) {
  auto os = open_out(path);
  os << j.dump(2) << '\n';
  if (!os) throw FormatError("write failed: " + path.string());
}

json read_json(const fs::path& path) {
  auto is = open_in(path);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace nsbayes::io
