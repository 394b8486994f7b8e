#pragma once

#include "pam/adjoint.hpp"
#include "pam/models/dataset.hpp"
#include "pam/models/parallel.hpp"
#include "pam/models/scalar.hpp"
#include "pam/optimizer.hpp"
#include "pam/trace.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace pam {

enum class Experiment { crn, nn, scalar_certified };
enum class Mode { empirical, certified };

inline const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::crn: return "crn";
    case Experiment::nn: return "nn";
    case Experiment::scalar_certified: return "scalar-certified";
  }
  return "?";
}

inline Experiment parse_experiment(const std::string& s) {
  if (s == "crn") return Experiment::crn;
  if (s == "nn") return Experiment::nn;
  if (s == "scalar-certified") return Experiment::scalar_certified;
  throw std::invalid_argument("unknown experiment '" + s + "' (crn, nn, scalar-certified)");
}

inline const char* to_string(Mode m) { return m == Mode::empirical ? "empirical" : "certified"; }

inline Mode parse_mode(const std::string& s) {
  if (s == "empirical") return Mode::empirical;
  if (s == "certified") return Mode::certified;
  throw std::invalid_argument("unknown mode '" + s + "' (empirical, certified)");
}

/// Defaults follow the published runs: n = 5 species or nodes, m = 10
/// instances, eps = 0.4, delta = 0.01, z0 = 0, 50000 iterations, Frobenius
/// parameter norm.
struct ExperimentConfig {
  Experiment experiment = Experiment::crn;
  std::size_t n = 5;
  std::size_t m = 10;
  std::uint64_t seed = 1;
  std::optional<Mode> mode;  // empty: certified for scalar-certified, empirical otherwise
  double epsilon = 0.4;
  double delta = 0.01;
  double alpha_c = 0.4;
  double alpha_eps = 0.5;
  double alpha_delta = 0.5;
  double scalar_a = 0.5;
  double scalar_w0 = 1.0;
  std::size_t iterations = 50000;
  std::size_t objective_stride = 50;
  std::filesystem::path out_dir = "out";

  Mode effective_mode() const {
    return mode.value_or(experiment == Experiment::scalar_certified ? Mode::certified
                                                                    : Mode::empirical);
  }

  void validate() const {
    if (experiment != Experiment::scalar_certified && (n == 0 || m == 0)) {
      throw std::invalid_argument("n and m must be >= 1");
    }
    if (iterations == 0) throw std::invalid_argument("iterations must be >= 1");
    if (effective_mode() == Mode::empirical && (!(epsilon > 0.0) || !(delta > 0.0))) {
      throw std::invalid_argument("eps and delta must be positive");
    }
    if (effective_mode() == Mode::certified && experiment != Experiment::scalar_certified) {
      throw std::invalid_argument(
          "certified mode needs a full Lipschitz bundle; only scalar-certified provides one");
    }
  }
};

struct ExperimentSummary {
  ExperimentConfig config;
  RunResult result;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  double wall_seconds = 0.0;
  std::optional<ScheduleConstants> constants;
};

namespace detail {

inline void write_summary(std::ostream& os, const ExperimentSummary& s) {
  const auto& c = s.config;
  const auto& r = s.result;
  os.precision(17);
  os << "experiment: " << to_string(c.experiment) << '\n'
     << "mode: " << to_string(c.effective_mode()) << '\n'
     << "seed: " << c.seed << '\n';
  if (c.experiment != Experiment::scalar_certified) os << "n: " << c.n << "\nm: " << c.m << '\n';
  os << "iterations: " << c.iterations << '\n'
     << "objective_stride: " << c.objective_stride << '\n'
     << "epsilon: " << r.epsilon << '\n'
     << "delta: " << r.delta << '\n';
  if (s.constants) {
    const auto& k = *s.constants;
    os << "alpha_c: " << k.alpha_c << "\nalpha_eps: " << k.alpha_eps
       << "\nalpha_delta: " << k.alpha_delta << "\nc: " << k.c << "\nbeta: " << k.beta
       << "\np1: " << k.p1 << '\n';
  }
  os << "z_norm: " << to_string(r.z_norm) << '\n'
     << "status: " << to_string(r.status) << '\n'
     << "message: " << r.message << '\n'
     << "outer_iterations: " << r.trace.size() << '\n'
     << "initial_objective: " << s.initial_objective << '\n'
     << "final_objective: " << s.final_objective << '\n'
     << "final_grad_norm: " << (r.trace.empty() ? 0.0 : r.trace.rows.back().grad_norm) << '\n'
     << "total_inner_steps: " << r.trace.total_inner_steps() << '\n';
  if (r.initial_condition) {
    const auto& ic = *r.initial_condition;
    os << "initial_condition_distance: " << ic.distance << '\n'
       << "initial_grad_norm: " << ic.grad_norm << '\n';
    if (auto ok = ic.satisfied()) os << "initial_condition_satisfied: " << (*ok ? "yes" : "no") << '\n';
  }
  os << "wall_seconds: " << s.wall_seconds << '\n';
}

}  // namespace detail

/// Runs one experiment and writes dataset files (crn, nn), trace.csv and
/// summary.txt under config.out_dir.
inline ExperimentSummary run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  std::filesystem::create_directories(config.out_dir);

  ExperimentSummary s;
  s.config = config;

  RunConfig rc;
  rc.max_outer_iterations = config.iterations;
  rc.objective_stride = config.objective_stride;

  if (config.experiment == Experiment::scalar_certified) {
    const double x_star = config.scalar_w0 / (1.0 - config.scalar_a);
    const auto p = models::make_scalar_problem(config.scalar_a, std::abs(x_star));
    const auto k = certified_constants(*p.system.lipschitz, config.alpha_c, config.alpha_eps,
                                       config.alpha_delta);
    s.constants = k;
    rc.mode = k;
    rc.w0 = Vector::Constant(1, config.scalar_w0);
    // Start on the auxiliary equilibrium so the initial-point condition holds.
    rc.z0 = {Vector::Constant(1, x_star), Vector::Constant(1, x_star / (1.0 - config.scalar_a))};
    s.initial_objective = p.objective(config.scalar_w0);
    s.result = run(p.system, p.loss, rc);
    s.final_objective = p.objective(s.result.w[0]);
  } else {
    const auto kind = config.experiment == Experiment::crn ? models::ModelKind::crn
                                                           : models::ModelKind::nn;
    const auto data = models::generate_dataset(kind, config.n, config.m, config.seed);
    models::write_dataset(config.out_dir / "dataset", data);
    const auto p = models::make_problem(data);
    rc.mode = EmpiricalSchedule{config.epsilon, config.delta, 1.0};
    rc.w0 = data.w0;
    rc.z0 = AdjointState::zeros(p.system.state_dim);
    const Vector x0 = Vector::Zero(p.system.state_dim);
    s.initial_objective = objective_at(p.system, p.loss, rc.w0, rc.objective_tol, x0);
    s.result = run(p.system, p.loss, rc);
    try {
      s.final_objective = objective_at(p.system, p.loss, s.result.w, rc.objective_tol, s.result.z.x);
    } catch (const NonConvergenceError&) {
      s.final_objective = std::numeric_limits<double>::quiet_NaN();
    }
  }

  {
    std::ofstream os(config.out_dir / "trace.csv");
    if (!os) throw std::runtime_error("cannot write trace.csv");
    write_trace_csv(os, s.result.trace);
  }
  s.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ofstream sum(config.out_dir / "summary.txt");
  detail::write_summary(sum, s);
  return s;
}

/// Textual digest of a trace.
struct TraceReport {
  std::optional<double> min_objective;
  std::optional<double> final_objective;
  double first_param_norm = 0.0;
  double final_param_norm = 0.0;
  std::optional<double> first_contraction_bound;
  std::optional<double> final_contraction_bound;
  std::optional<double> max_contraction_bound;
  std::size_t rows = 0;
  std::size_t total_inner_steps = 0;
  /// First iteration from which at least 95% of the remaining iterations
  /// need at most one inner step.
  std::optional<std::size_t> steady_state_iteration;
};

inline std::optional<std::size_t> steady_state_iteration(const OptimizationTrace& t,
                                                         double fraction = 0.95) {
  std::size_t ones = 0;
  std::optional<std::size_t> best;
  for (std::size_t i = t.rows.size(); i-- > 0;) {
    if (t.rows[i].inner_steps <= 1) ++ones;
    const double count = static_cast<double>(t.rows.size() - i);
    if (static_cast<double>(ones) >= fraction * count) best = t.rows[i].iter;
  }
  return best;
}

inline TraceReport report(const OptimizationTrace& t) {
  if (t.empty()) throw std::invalid_argument("report: empty trace");
  TraceReport r;
  r.rows = t.size();
  r.total_inner_steps = t.total_inner_steps();
  r.first_param_norm = t.rows.front().param_norm;
  r.final_param_norm = t.rows.back().param_norm;
  for (const auto& row : t.rows) {
    if (row.objective && !std::isnan(*row.objective)) {
      r.min_objective = r.min_objective ? std::min(*r.min_objective, *row.objective) : *row.objective;
      r.final_objective = row.objective;
    }
    if (row.contraction_bound) {
      if (!r.first_contraction_bound) r.first_contraction_bound = row.contraction_bound;
      r.final_contraction_bound = row.contraction_bound;
      r.max_contraction_bound = std::max(r.max_contraction_bound.value_or(0.0), *row.contraction_bound);
    }
  }
  r.steady_state_iteration = steady_state_iteration(t);
  return r;
}

inline void print_report(std::ostream& os, const TraceReport& r) {
  auto opt = [](const std::optional<double>& v) {
    std::ostringstream s;
    s.precision(6);
    if (v) s << *v; else s << "n/a";
    return s.str();
  };
  std::ostringstream os2;
  os2.precision(6);
  os2 << "iterations: " << r.rows << '\n'
      << "total inner steps: " << r.total_inner_steps << '\n'
      << "min objective: " << opt(r.min_objective) << '\n'
      << "final objective: " << opt(r.final_objective) << '\n'
      << "parameter norm: " << r.first_param_norm << " -> " << r.final_param_norm << '\n'
      << "contraction bound: " << opt(r.first_contraction_bound) << " -> "
      << opt(r.final_contraction_bound) << " (max " << opt(r.max_contraction_bound) << ")\n";
  if (r.steady_state_iteration) {
    os2 << "steady-state inner steps from iteration " << *r.steady_state_iteration << '\n';
  } else {
    os2 << "steady-state inner steps not reached\n";
  }
  os << os2.str();
}

/// Largest coordinate gap between the adjoint gradient and central
/// differences, relative to the largest finite-difference coordinate.
inline double max_relative_error(const Vector& estimate, const Vector& reference) {
  const double scale = reference.cwiseAbs().maxCoeff();
  const double gap = (estimate - reference).cwiseAbs().maxCoeff();
  return scale > 0.0 ? gap / scale : gap;
}

struct GradcheckResult {
  Vector adjoint;
  Vector finite_difference;
  double max_relative_error = 0.0;
};

/// Adjoint vs central-difference gradient at the dataset's starting point.
inline GradcheckResult gradcheck(models::ModelKind kind, std::size_t n, std::size_t m,
                                 std::uint64_t seed, double tol = 1e-13, double h_rel = 1e-5) {
  const auto data = models::generate_dataset(kind, n, m, seed);
  const auto p = models::make_problem(data);
  GradcheckResult r;
  r.adjoint = implicit_gradient(p.system, p.loss, data.w0, tol);
  r.finite_difference = fd_gradient(p.system, p.loss, data.w0, h_rel, tol);
  r.max_relative_error = max_relative_error(r.adjoint, r.finite_difference);
  return r;
}

}  // namespace pam
