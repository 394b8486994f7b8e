#pragma once

#include "pam/norms.hpp"

#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>

namespace pam {

inline constexpr std::size_t kDefaultMaxSteps = 1'000'000;

/// Parameterized step map z -> T(z, w) together with the norm its
/// increments are measured in.
struct StepMap {
  std::function<Vector(const Vector& state, const Vector& param)> step;
  NormSpec state_norm = NormSpec::max_abs();
  std::optional<double> declared_beta;
};

struct InnerLoopResult {
  Vector final_state;
  std::size_t steps_taken = 0;
  double last_increment_norm = 0.0;
};

/// Thrown when the step budget runs out before the increment threshold is met.
class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, std::size_t steps, double last_increment)
      : std::runtime_error(what), steps_(steps), last_increment_(last_increment) {}
  std::size_t steps() const { return steps_; }
  double last_increment_norm() const { return last_increment_; }

 private:
  std::size_t steps_;
  double last_increment_;
};

/// Thrown when an iterate or increment stops being finite.
class DivergenceError : public NonConvergenceError {
 public:
  using NonConvergenceError::NonConvergenceError;
};

/// Repeat z <- step(z) until ||z_i - z_{i-1}|| <= threshold. At least one
/// step is always taken.
template <typename Step>
  requires std::invocable<Step&, const Vector&>
InnerLoopResult iterate(Step&& step, const NormSpec& norm_spec, const Vector& z0, double threshold,
                        std::size_t max_steps = kDefaultMaxSteps) {
  if (!(threshold >= 0.0)) throw std::invalid_argument("iterate: threshold must be >= 0");
  if (max_steps == 0) throw std::invalid_argument("iterate: max_steps must be >= 1");

  InnerLoopResult r{z0, 0, 0.0};
  Vector next;
  while (r.steps_taken < max_steps) {
    next = step(r.final_state);
    ++r.steps_taken;
    r.last_increment_norm = norm(norm_spec, next - r.final_state);
    r.final_state.swap(next);
    if (!std::isfinite(r.last_increment_norm)) {
      throw DivergenceError("fixed-point iteration produced a non-finite increment", r.steps_taken,
                            r.last_increment_norm);
    }
    if (r.last_increment_norm <= threshold) return r;
  }
  throw NonConvergenceError("fixed-point iteration did not reach threshold " +
                                std::to_string(threshold) + " within " +
                                std::to_string(max_steps) + " steps",
                            r.steps_taken, r.last_increment_norm);
}

inline InnerLoopResult iterate_to_tolerance(const StepMap& map, const Vector& z0, const Vector& w,
                                            double threshold,
                                            std::size_t max_steps = kDefaultMaxSteps) {
  return iterate([&](const Vector& z) { return map.step(z, w); }, map.state_norm, z0, threshold,
                 max_steps);
}

/// beta/(1-beta) * increment: distance bound from an accepted iterate to the
/// fixed point.
inline double banach_tail_bound(double beta, double increment_norm) {
  if (!(beta > 0.0 && beta < 1.0)) {
    throw std::invalid_argument("banach_tail_bound: beta must lie in (0,1)");
  }
  if (increment_norm < 0.0) throw std::invalid_argument("banach_tail_bound: negative increment");
  return beta / (1.0 - beta) * increment_norm;
}

inline Vector deep_solve(const StepMap& map, const Vector& z0, const Vector& w, double tol,
                         std::size_t max_steps = kDefaultMaxSteps) {
  if (!(tol > 0.0)) throw std::invalid_argument("deep_solve: tol must be positive");
  return iterate_to_tolerance(map, z0, w, tol, max_steps).final_state;
}

/// max ||T(u)-T(v)|| / ||u-v|| over the sample; identical pairs are skipped.
inline double measure_contraction_ratio(const StepMap& map, const Vector& w,
                                        std::span<const std::pair<Vector, Vector>> pairs) {
  double worst = 0.0;
  std::size_t used = 0;
  for (const auto& [u, v] : pairs) {
    const double d = norm(map.state_norm, u - v);
    if (d == 0.0) continue;
    ++used;
    worst = std::max(worst, norm(map.state_norm, map.step(u, w) - map.step(v, w)) / d);
  }
  if (used == 0) throw std::invalid_argument("measure_contraction_ratio: all sample pairs identical");
  return worst;
}

}  // namespace pam
