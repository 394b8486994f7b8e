#pragma once

#include "pam/adjoint.hpp"
#include "pam/contraction.hpp"
#include "pam/norms.hpp"
#include "pam/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace pam {

/// Experimentally chosen step size and time-scale constant. No Lipschitz
/// data is used; the Z norm weight defaults to 1.
struct EmpiricalSchedule {
  double epsilon = 0.4;
  double delta = 0.01;
  double p1 = 1.0;
};

struct RunConfig {
  std::variant<EmpiricalSchedule, ScheduleConstants> mode = EmpiricalSchedule{};
  std::size_t max_outer_iterations = 1000;
  std::size_t inner_max_steps = kDefaultMaxSteps;
  Vector w0;
  AdjointState z0;
  /// Stop once ||g(z_n, w_{n-1})||_W falls below this value.
  std::optional<double> gradient_tolerance;
  /// Record E(w_n) every `objective_stride` iterations (0 disables).
  std::size_t objective_stride = 50;
  double objective_tol = 1e-10;
  /// Evaluate ||z0 - z0*||_Z <= c ||g(z0, w0)||_W before the run.
  bool check_initial_condition = true;
  /// The inner loop accepts an increment below noise_floor * machine epsilon
  /// * ||z||_Z even when c_n is smaller, since rounding keeps successive
  /// iterates from agreeing any closer. 0 runs the test exactly as written.
  double noise_floor = 64.0;

  void validate() const {
    if (max_outer_iterations == 0 || inner_max_steps == 0) {
      throw std::invalid_argument("RunConfig: budgets must be >= 1");
    }
    if (!(noise_floor >= 0.0) || !std::isfinite(noise_floor)) {
      throw std::invalid_argument("RunConfig: noise_floor must be finite and >= 0");
    }
    if (const auto* e = std::get_if<EmpiricalSchedule>(&mode)) {
      if (!(e->epsilon > 0.0) || !(e->delta > 0.0) || !(e->p1 > 0.0)) {
        throw std::invalid_argument("RunConfig: epsilon, delta and p1 must be positive");
      }
    }
  }
};

enum class RunStatus { budget_exhausted, gradient_tolerance, inner_nonconvergence, divergence };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::budget_exhausted: return "budget_exhausted";
    case RunStatus::gradient_tolerance: return "gradient_tolerance";
    case RunStatus::inner_nonconvergence: return "inner_nonconvergence";
    case RunStatus::divergence: return "divergence";
  }
  return "?";
}

struct InitialConditionCheck {
  double distance = 0.0;   // ||z0 - z0*||_Z
  double grad_norm = 0.0;  // ||g(z0, w0)||_W
  std::optional<double> c; // only known in certified mode

  std::optional<bool> satisfied() const {
    if (!c) return std::nullopt;
    return distance <= *c * grad_norm;
  }
};

struct RunResult {
  OptimizationTrace trace;
  Vector w;
  AdjointState z;
  RunStatus status = RunStatus::budget_exhausted;
  std::string message;
  double epsilon = 0.0;
  double delta = 0.0;
  NormSpec z_norm = NormSpec::max_abs();
  std::optional<InitialConditionCheck> initial_condition;

  bool ok() const {
    return status == RunStatus::budget_exhausted || status == RunStatus::gradient_tolerance;
  }
};

/// Everything the loop knows at the end of outer iteration n.
struct IterationView {
  std::size_t n;
  const Vector& w_prev;    // w_{n-1}
  const AdjointState& z;   // z_n
  const Vector& g;         // g(z_n, w_{n-1})
  const Vector& w;         // w_n
  const InnerLoopResult& inner;
  double c_n;
};

using IterationObserver = std::function<void(const IterationView&)>;

/// Persistent adjoint method with dynamic time-scaling.
///
/// After every parameter update the adjoint system is relaxed, warm-started
/// from the previous auxiliary state, until successive iterates differ by at
/// most c_n in the Z norm. The next threshold is delta times the norm of the
/// gradient estimate just applied. A zero threshold means the previous
/// estimate vanished, so the auxiliary state is taken to be at equilibrium
/// and a single step is applied.
inline RunResult run(const DifferentiableSystem& sys, const LossFunction& loss,
                     const RunConfig& config, const IterationObserver& observer = {}) {
  config.validate();
  const auto n_state = static_cast<Eigen::Index>(sys.state_dim);
  if (config.w0.size() != static_cast<Eigen::Index>(sys.param_dim) ||
      config.z0.x.size() != n_state || config.z0.y.size() != n_state) {
    throw std::invalid_argument("run: w0/z0 dimensions do not match the system");
  }

  RunResult out;
  double p1 = 1.0;
  std::optional<double> c_factor;
  if (const auto* e = std::get_if<EmpiricalSchedule>(&config.mode)) {
    out.epsilon = e->epsilon;
    out.delta = e->delta;
    p1 = e->p1;
  } else {
    const auto& s = std::get<ScheduleConstants>(config.mode);
    out.epsilon = s.epsilon;
    out.delta = s.delta;
    p1 = s.p1;
    c_factor = s.c;
  }
  out.z_norm = adjoint_norm(sys.state_norm, p1);
  const StepMap adj = make_adjoint_map(sys, loss, p1);

  Vector w = config.w0;
  AdjointState z = config.z0;
  Vector g = adjoint_gradient(sys, z, w);
  double c = out.delta * norm(sys.param_norm, g);

  if (config.check_initial_condition) {
    try {
      const Vector z_star = deep_solve(adj, z.packed(), w, 1e-12, config.inner_max_steps);
      InitialConditionCheck ic;
      ic.distance = norm(out.z_norm, z.packed() - z_star);
      ic.grad_norm = norm(sys.param_norm, g);
      ic.c = c_factor;
      out.initial_condition = ic;
    } catch (const NonConvergenceError&) {
    }
  }

  auto finish = [&](RunStatus status, std::string msg) {
    out.status = status;
    out.message = std::move(msg);
    out.w = w;
    out.z = z;
    return out;
  };

  for (std::size_t n = 1; n <= config.max_outer_iterations; ++n) {
    InnerLoopResult inner;
    try {
      const Vector zp = z.packed();
      const double floor = config.noise_floor * std::numeric_limits<double>::epsilon() *
                           norm(out.z_norm, zp);
      inner = c > 0.0 ? iterate_to_tolerance(adj, zp, w, std::max(c, floor), config.inner_max_steps)
                      : iterate_to_tolerance(adj, zp, w,
                                             std::numeric_limits<double>::infinity(), 1);
    } catch (const DivergenceError& e) {
      return finish(RunStatus::divergence,
                    "iteration " + std::to_string(n) + ": " + e.what());
    } catch (const NonConvergenceError& e) {
      return finish(RunStatus::inner_nonconvergence,
                    "iteration " + std::to_string(n) + ": " + e.what());
    }
    z = AdjointState::unpack(inner.final_state);
    g = adjoint_gradient(sys, z, w);
    const double g_norm = norm(sys.param_norm, g);
    Vector w_next = w - out.epsilon * g;
    if (!std::isfinite(g_norm) || !w_next.allFinite()) {
      return finish(RunStatus::divergence,
                    "iteration " + std::to_string(n) + ": non-finite parameter update");
    }

    TraceRow row;
    row.iter = n;
    row.c_n = c;
    row.inner_steps = inner.steps_taken;
    row.grad_norm = g_norm;
    row.param_norm = norm(sys.param_norm, w_next);
    if (sys.contraction_bound) row.contraction_bound = sys.contraction_bound(w_next);

    const bool stop_on_gradient =
        config.gradient_tolerance && g_norm < *config.gradient_tolerance;
    const bool last = n == config.max_outer_iterations || stop_on_gradient;
    if (config.objective_stride > 0 && (n == 1 || n % config.objective_stride == 0 || last)) {
      try {
        row.objective = objective_at(sys, loss, w_next, config.objective_tol, z.x,
                                     config.inner_max_steps);
      } catch (const NonConvergenceError&) {
        row.objective = std::numeric_limits<double>::quiet_NaN();
      }
    }
    out.trace.rows.push_back(row);

    if (observer) observer(IterationView{n, w, z, g, w_next, inner, c});

    w.swap(w_next);
    c = out.delta * g_norm;
    if (stop_on_gradient) return finish(RunStatus::gradient_tolerance, "gradient tolerance reached");
  }
  return finish(RunStatus::budget_exhausted, "iteration budget exhausted");
}

/// Objective value and exact gradient norm at one iterate w_n.
struct DescentSample {
  double objective = 0.0;
  double grad_norm = 0.0;  // ||dE/dw(w_n)||_2
};

struct DescentReport {
  double k = 0.0;
  std::vector<std::size_t> violations;  // indices n with a failed step n -> n+1

  bool ok() const { return violations.empty(); }
};

/// k = eps (1-alpha) (1 - (L/2) eps (1-alpha))
inline double descent_constant(double epsilon, double lipschitz, double alpha) {
  return epsilon * (1.0 - alpha) * (1.0 - 0.5 * lipschitz * epsilon * (1.0 - alpha));
}

/// Flags every n with E(w_{n+1}) > E(w_n) - k ||dE/dw(w_n)||^2 + slack.
inline DescentReport check_descent(std::span<const DescentSample> samples, double epsilon,
                                   double lipschitz, double alpha, double slack = 1e-12) {
  DescentReport report;
  report.k = descent_constant(epsilon, lipschitz, alpha);
  for (std::size_t n = 0; n + 1 < samples.size(); ++n) {
    const auto& cur = samples[n];
    const double bound = cur.objective - report.k * cur.grad_norm * cur.grad_norm + slack;
    if (samples[n + 1].objective > bound) report.violations.push_back(n);
  }
  return report;
}

/// ||g_est - g_true||_2 <= alpha ||g_est||_2
inline bool check_direction_quality(const Vector& g_est, const Vector& g_true, double alpha) {
  if (g_est.size() != g_true.size()) {
    throw std::invalid_argument("check_direction_quality: length mismatch");
  }
  const double rhs = alpha * g_est.norm();
  return (g_est - g_true).norm() <= rhs + 1e-12 * rhs;
}

}  // namespace pam
