#pragma once

#include "pam/contraction.hpp"
#include "pam/models/crn.hpp"
#include "pam/models/nn.hpp"
#include "pam/models/parallel.hpp"
#include "pam/rng.hpp"
#include "pam/trace.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pam::models {

inline constexpr double kTargetTolerance = 1e-12;

/// Synthetic fitting problem: true parameters, per-instance inputs, the
/// equilibria they produce, and a fresh starting point.
struct Dataset {
  ModelKind kind = ModelKind::crn;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  Vector w_true;
  std::vector<Vector> inputs;  // b^i (CRN, log totals) or u^i (NN)
  std::vector<Vector> targets;
  Vector w0;

  std::size_t m() const { return inputs.size(); }
};

namespace detail {

inline Vector draw_params(ModelKind kind, std::size_t n, Rng& rng) {
  const auto nn = static_cast<Eigen::Index>(n);
  Matrix a = rng.normal_matrix(nn, nn);
  if (kind == ModelKind::crn) {
    Matrix sym = 0.5 * (a + a.transpose());
    return CrnModel::complete(n).params_from_matrix(sym);
  }
  return NnModel(n).params_from_matrix(a);
}

}  // namespace detail

/// Draw order from a single Rng(seed): n x n true weight matrix (row-major),
/// m input vectors, n x n starting matrix. CRN matrices are symmetrized as
/// (A + A^T)/2. Targets are the fixed points of each instance, iterated from
/// zero to an increment of kTargetTolerance.
inline Dataset generate_dataset(ModelKind kind, std::size_t n, std::size_t m, std::uint64_t seed) {
  if (n == 0 || m == 0) throw std::invalid_argument("generate_dataset: n and m must be >= 1");
  Rng rng(seed);
  Dataset d;
  d.kind = kind;
  d.n = n;
  d.seed = seed;
  d.w_true = detail::draw_params(kind, n, rng);
  for (std::size_t i = 0; i < m; ++i) d.inputs.push_back(rng.normal_vector(static_cast<Eigen::Index>(n)));
  d.w0 = detail::draw_params(kind, n, rng);

  const auto blocks = make_parallel(kind, n, d.inputs, std::vector<Vector>(m, Vector::Zero(n)));
  const Vector x_star = deep_solve(blocks.system.primal_map(), Vector::Zero(n * m), d.w_true,
                                   kTargetTolerance);
  for (std::size_t i = 0; i < m; ++i) d.targets.push_back(blocks.block_of(x_star, i));
  return d;
}

inline ParallelProblem make_problem(const Dataset& d) {
  return make_parallel(d.kind, d.n, d.inputs, d.targets);
}

/// Parameter vector as the full n x n matrix (symmetric for CRN).
inline Matrix parameter_matrix(const Dataset& d, const Vector& w) {
  if (d.kind == ModelKind::crn) return CrnModel::complete(d.n).rate_matrix(w);
  return Matrix(NnModel(d.n).weights(w));
}

namespace detail {

inline void write_matrix_csv(const std::filesystem::path& p, const Matrix& a) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      os << (j ? "," : "") << pam::detail::format_double(a(i, j));
    }
    os << '\n';
  }
}

/// Header `instance,s0,...,s{n-1}`, one row per instance.
inline void write_vectors_csv(const std::filesystem::path& p, const std::vector<Vector>& vs,
                              std::size_t n) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << "instance";
  for (std::size_t j = 0; j < n; ++j) os << ",s" << j;
  os << '\n';
  for (std::size_t i = 0; i < vs.size(); ++i) {
    os << i;
    for (Eigen::Index j = 0; j < vs[i].size(); ++j) os << ',' << pam::detail::format_double(vs[i][j]);
    os << '\n';
  }
}

inline std::vector<std::vector<double>> read_csv_numbers(const std::filesystem::path& p,
                                                         bool skip_header) {
  std::ifstream is(p);
  if (!is) throw std::runtime_error("cannot read " + p.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if ((skip_header && lineno == 1) || line.empty()) continue;
    std::vector<double> row;
    for (auto f : pam::detail::split_commas(line)) {
      row.push_back(pam::detail::parse_double(f, lineno, p.filename().string().c_str()));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix read_matrix_csv(const std::filesystem::path& p) {
  const auto rows = read_csv_numbers(p, false);
  if (rows.empty()) throw std::runtime_error(p.string() + ": empty matrix");
  Matrix a(rows.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size()) throw std::runtime_error(p.string() + ": matrix not square");
    for (std::size_t j = 0; j < rows.size(); ++j) a(i, j) = rows[i][j];
  }
  return a;
}

inline std::vector<Vector> read_vectors_csv(const std::filesystem::path& p, std::size_t n) {
  std::vector<Vector> out;
  for (const auto& row : read_csv_numbers(p, true)) {
    if (row.size() != n + 1) throw std::runtime_error(p.string() + ": wrong column count");
    Vector v(n);
    for (std::size_t j = 0; j < n; ++j) v[j] = row[j + 1];
    out.push_back(v);
  }
  return out;
}

}  // namespace detail

/// Files: w_true.csv and w0.csv (n x n matrices), inputs.csv and
/// targets.csv (one instance per row), dataset.txt (kind, n, m, seed).
inline void write_dataset(const std::filesystem::path& dir, const Dataset& d) {
  std::filesystem::create_directories(dir);
  detail::write_matrix_csv(dir / "w_true.csv", parameter_matrix(d, d.w_true));
  detail::write_matrix_csv(dir / "w0.csv", parameter_matrix(d, d.w0));
  detail::write_vectors_csv(dir / "inputs.csv", d.inputs, d.n);
  detail::write_vectors_csv(dir / "targets.csv", d.targets, d.n);
  std::ofstream meta(dir / "dataset.txt");
  meta << "kind: " << to_string(d.kind) << "\nn: " << d.n << "\nm: " << d.m()
       << "\nseed: " << d.seed << '\n';
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
  std::ifstream meta(dir / "dataset.txt");
  if (!meta) throw std::runtime_error("cannot read " + (dir / "dataset.txt").string());
  Dataset d;
  std::string key, value;
  while (meta >> key >> value) {
    if (key == "kind:") {
      if (value != "crn" && value != "nn") throw std::runtime_error("dataset.txt: unknown kind");
      d.kind = value == "crn" ? ModelKind::crn : ModelKind::nn;
    } else if (key == "n:") {
      d.n = std::stoul(value);
    } else if (key == "seed:") {
      d.seed = std::stoull(value);
    }
  }
  const Matrix wt = detail::read_matrix_csv(dir / "w_true.csv");
  const Matrix w0 = detail::read_matrix_csv(dir / "w0.csv");
  if (static_cast<std::size_t>(wt.rows()) != d.n) throw std::runtime_error("w_true.csv: wrong size");
  if (d.kind == ModelKind::crn) {
    const auto model = CrnModel::complete(d.n);
    d.w_true = model.params_from_matrix(wt);
    d.w0 = model.params_from_matrix(w0);
  } else {
    NnModel model(d.n);
    d.w_true = model.params_from_matrix(wt);
    d.w0 = model.params_from_matrix(w0);
  }
  d.inputs = detail::read_vectors_csv(dir / "inputs.csv", d.n);
  d.targets = detail::read_vectors_csv(dir / "targets.csv", d.n);
  if (d.inputs.size() != d.targets.size()) throw std::runtime_error("dataset: inputs/targets mismatch");
  return d;
}

}  // namespace pam::models
