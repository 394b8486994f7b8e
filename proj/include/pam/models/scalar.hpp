#pragma once

#include "pam/adjoint.hpp"

#include <cmath>
#include <stdexcept>

namespace pam::models {

/// f(x, w) = a x + w with e(x) = x^2 / 2, so E(w) = w^2 / (2 (1-a)^2).
///
/// The Lipschitz bundle is exact on the state interval |x| <= radius: the
/// only nonzero constants are beta_x = |a|, L_w f = 1, L_x e = radius and
/// L_{x^2} e = 1.
struct ScalarProblem {
  double a = 0.5;
  double radius = 2.0;
  DifferentiableSystem system;
  LossFunction loss;

  double fixed_point(double w) const { return w / (1.0 - a); }
  double objective(double w) const { return 0.5 * fixed_point(w) * fixed_point(w); }
  double gradient(double w) const { return w / ((1.0 - a) * (1.0 - a)); }
};

inline ScalarProblem make_scalar_problem(double a = 0.5, double radius = 2.0) {
  if (!(std::abs(a) < 1.0)) throw std::invalid_argument("scalar problem: need |a| < 1");
  if (!(radius > 0.0)) throw std::invalid_argument("scalar problem: radius must be positive");
  ScalarProblem p;
  p.a = a;
  p.radius = radius;
  auto& s = p.system;
  s.state_dim = 1;
  s.param_dim = 1;
  s.step = [a](const Vector& x, const Vector& w) -> Vector { return a * x + w; };
  s.vjp_x = [a](const Vector&, const Vector&, const Vector& y) -> Vector { return a * y; };
  s.vjp_w = [](const Vector&, const Vector&, const Vector& y) -> Vector { return y; };
  s.state_norm = NormSpec::max_abs();
  s.param_norm = NormSpec::euclidean();
  s.lipschitz = LipschitzBundle{std::abs(a), 0.0, 1.0, 0.0, 0.0, radius, 1.0};
  s.contraction_bound = [a](const Vector&) { return std::abs(a); };

  p.loss.value = [](const Vector& x) { return 0.5 * x.squaredNorm(); };
  p.loss.gradient = [](const Vector& x) -> Vector { return x; };
  p.loss.lipschitz = LossLipschitz{radius, 1.0};
  return p;
}

}  // namespace pam::models
