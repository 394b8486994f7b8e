#pragma once

#include "pam/contraction.hpp"
#include "pam/norms.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>

namespace pam {

/// Subset of the Lipschitz data that fixes the adjoint system's own
/// contraction: the state contraction coefficient and the curvature terms.
struct StateBounds {
  double beta_x = 0.0;    // ||df/dx||_X
  double lip_xx_f = 0.0;  // Lipschitz constant of df/dx in x
  double lip_x_e = 0.0;   // ||de/dx||_X*
  double lip_xx_e = 0.0;  // Lipschitz constant of de/dx in x

  void validate() const {
    if (!(beta_x >= 0.0 && beta_x < 1.0)) {
      throw std::invalid_argument("Lipschitz data: beta_x must lie in [0,1)");
    }
    for (double v : {lip_xx_f, lip_x_e, lip_xx_e}) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument("Lipschitz data: constants must be finite and >= 0");
      }
    }
  }
};

/// Uniform bounds on the first and second derivatives of f and e.
struct LipschitzBundle {
  double beta_x = 0.0;
  double lip_xx_f = 0.0;
  double lip_w_f = 0.0;
  double lip_ww_f = 0.0;
  double lip_xw_f = 0.0;
  double lip_x_e = 0.0;
  double lip_xx_e = 0.0;

  StateBounds state_bounds() const { return {beta_x, lip_xx_f, lip_x_e, lip_xx_e}; }

  void validate() const {
    state_bounds().validate();
    for (double v : {lip_w_f, lip_ww_f, lip_xw_f}) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument("Lipschitz data: constants must be finite and >= 0");
      }
    }
  }
};

/// Parameterized step map f(x, w) exposed through vector-Jacobian products.
struct DifferentiableSystem {
  std::size_t state_dim = 0;
  std::size_t param_dim = 0;
  std::function<Vector(const Vector& x, const Vector& w)> step;
  /// (df/dx)^T y
  std::function<Vector(const Vector& x, const Vector& w, const Vector& y)> vjp_x;
  /// (df/dw)^T y, in parameter coordinates
  std::function<Vector(const Vector& x, const Vector& w, const Vector& y)> vjp_w;
  NormSpec state_norm = NormSpec::max_abs();
  NormSpec param_norm = NormSpec::euclidean();
  std::optional<LipschitzBundle> lipschitz;
  /// Optional a-priori contraction coefficient bound at w, for traces.
  std::function<double(const Vector& w)> contraction_bound;

  StepMap primal_map() const { return StepMap{step, state_norm, std::nullopt}; }
};

struct LossLipschitz {
  double lip_x_e = 0.0;
  double lip_xx_e = 0.0;
};

struct LossFunction {
  std::function<double(const Vector& x)> value;
  std::function<Vector(const Vector& x)> gradient;
  std::optional<LossLipschitz> lipschitz;
};

/// z = (x, y): primal state and adjoint covector.
struct AdjointState {
  Vector x;
  Vector y;

  static AdjointState zeros(std::size_t n) { return {Vector::Zero(n), Vector::Zero(n)}; }

  Vector packed() const {
    Vector z(x.size() + y.size());
    z << x, y;
    return z;
  }
  static AdjointState unpack(const Vector& z) {
    if (z.size() % 2 != 0) throw std::invalid_argument("AdjointState: odd packed length");
    const auto n = z.size() / 2;
    return {z.head(n), z.tail(n)};
  }
};

/// Z norm p1 ||x||_X + p2 ||y||_X*.
inline NormSpec adjoint_norm(const NormSpec& state_norm, double p1, double p2 = 1.0) {
  return NormSpec::weighted_pair(p1, p2, state_norm, dual(state_norm));
}

namespace detail {
inline void check_dims(const DifferentiableSystem& sys, const AdjointState& z, const Vector& w) {
  const auto n = static_cast<Eigen::Index>(sys.state_dim);
  if (z.x.size() != n || z.y.size() != n ||
      w.size() != static_cast<Eigen::Index>(sys.param_dim)) {
    throw std::invalid_argument("adjoint: dimension mismatch");
  }
}
}  // namespace detail

/// (x, y) -> (f(x,w), (df/dx)^T y + de/dx(x)). Both components read the
/// incoming state.
inline AdjointState adjoint_step(const DifferentiableSystem& sys, const LossFunction& loss,
                                 const AdjointState& z, const Vector& w) {
  detail::check_dims(sys, z, w);
  return {sys.step(z.x, w), sys.vjp_x(z.x, w, z.y) + loss.gradient(z.x)};
}

/// g((x,y), w) = (df/dw)^T y
inline Vector adjoint_gradient(const DifferentiableSystem& sys, const AdjointState& z,
                               const Vector& w) {
  detail::check_dims(sys, z, w);
  return sys.vjp_w(z.x, w, z.y);
}

/// Adjoint system as a step map on the packed state [x; y].
inline StepMap make_adjoint_map(const DifferentiableSystem& sys, const LossFunction& loss,
                                double p1, std::optional<double> beta = std::nullopt) {
  return StepMap{
      [&sys, &loss](const Vector& z, const Vector& w) {
        return adjoint_step(sys, loss, AdjointState::unpack(z), w).packed();
      },
      adjoint_norm(sys.state_norm, p1), beta};
}

/// Weight on the primal block of the Z norm. Falls back to 1 when both
/// curvature terms vanish, since any positive weight then works.
inline double weight_p1(const StateBounds& b) {
  b.validate();
  const double gap = 1.0 - b.beta_x;
  const double p1 = 2.0 * (b.lip_xx_f * b.lip_x_e / (gap * gap) + b.lip_xx_e / gap);
  return p1 > 0.0 ? p1 : 1.0;
}

inline double weight_p1(const LipschitzBundle& b) { return weight_p1(b.state_bounds()); }

/// Step size, threshold factor and time-scale constant that certify tracking
/// and descent, together with the Lipschitz data they were derived from.
struct ScheduleConstants {
  double alpha_c = 0.0;
  double alpha_eps = 0.0;
  double alpha_delta = 0.0;

  double beta = 0.0;
  double p1 = 1.0;
  double lip_w_T = 0.0;
  double lip_z_g = 0.0;
  double lip_w_g = 0.0;

  double c = 0.0;
  double epsilon = 0.0;
  double delta = 0.0;

  /// A = (L_wg + L_zg L_wT/(1-beta)) eps + L_zg c + L_zg beta/(1-beta) delta
  double composite_a() const {
    return (lip_w_g + lip_z_g * lip_w_T / (1.0 - beta)) * epsilon + lip_z_g * c +
           lip_z_g * beta / (1.0 - beta) * delta;
  }
  /// (1-a_c)(1-a_eps)(1-a_c/(1+a_c)). This is a lower bound on 1 - A; it
  /// is reached only in the limit a_delta -> 1.
  double one_minus_a_closed_form() const {
    return (1.0 - alpha_c) * (1.0 - alpha_eps) * (1.0 - alpha_c / (1.0 + alpha_c));
  }
  /// (1-a_c)(1-a_eps)(1-a_delta a_c/(1+a_c)), equal to 1 - A.
  double one_minus_a_exact() const {
    return (1.0 - alpha_c) * (1.0 - alpha_eps) * (1.0 - alpha_delta * alpha_c / (1.0 + alpha_c));
  }
  /// Lipschitz constant of the true gradient implied by the data.
  double gradient_lipschitz() const { return lip_z_g * lip_w_T / (1.0 - beta) + lip_w_g; }
};

/// c, epsilon, delta from a contraction coefficient and Lipschitz constants
/// of T and g.
inline ScheduleConstants schedule_constants(double beta, double lip_w_T, double lip_z_g,
                                            double lip_w_g, double alpha_c, double alpha_eps,
                                            double alpha_delta) {
  auto in_unit = [](double a) { return a > 0.0 && a < 1.0; };
  if (!in_unit(alpha_c) || !in_unit(alpha_eps) || !in_unit(alpha_delta)) {
    throw std::invalid_argument("schedule_constants: alphas must lie in (0,1)");
  }
  if (!in_unit(beta)) throw std::invalid_argument("schedule_constants: beta must lie in (0,1)");
  if (!(lip_z_g > 0.0) || !(lip_w_T >= 0.0) || !(lip_w_g >= 0.0)) {
    throw std::invalid_argument("schedule_constants: need L_zg > 0 and L_wT, L_wg >= 0");
  }
  ScheduleConstants s;
  s.alpha_c = alpha_c;
  s.alpha_eps = alpha_eps;
  s.alpha_delta = alpha_delta;
  s.beta = beta;
  s.lip_w_T = lip_w_T;
  s.lip_z_g = lip_z_g;
  s.lip_w_g = lip_w_g;

  s.c = alpha_c / lip_z_g;
  s.epsilon = alpha_eps * (1.0 - alpha_c) / (lip_w_g + lip_z_g * lip_w_T / (1.0 - beta));
  s.delta = alpha_delta * alpha_c * (1.0 - alpha_c) * (1.0 - alpha_eps) * (1.0 - beta) /
            ((1.0 + alpha_c) * lip_z_g * beta);
  return s;
}

/// Constants for the persistent adjoint method from a full Lipschitz bundle.
inline ScheduleConstants certified_constants(const LipschitzBundle& b, double alpha_c,
                                             double alpha_eps, double alpha_delta) {
  b.validate();
  if (!(alpha_c > 0.0 && alpha_c < 0.5)) {
    throw std::invalid_argument("certified_constants: alpha_c must lie in (0, 1/2)");
  }
  const double gap = 1.0 - b.beta_x;
  const double p = weight_p1(b);
  const double y_radius = b.lip_x_e / gap;

  const double beta = (b.beta_x + 1.0) / 2.0;
  const double lip_w_T = p * b.lip_w_f + b.lip_xw_f * y_radius;
  // L_{x^2}f = 0 leaves only the first branch.
  const double lip_z_g = b.lip_xx_f > 0.0
                             ? std::max(b.lip_w_f, gap * b.lip_xw_f / (2.0 * b.lip_xx_f))
                             : b.lip_w_f;
  const double lip_w_g = b.lip_ww_f * y_radius;

  auto s = schedule_constants(beta, lip_w_T, lip_z_g, lip_w_g, alpha_c, alpha_eps, alpha_delta);
  s.p1 = p;
  const double a = s.composite_a();
  if (!(a < 1.0)) throw std::logic_error("certified_constants: composite A >= 1");
  return s;
}

/// Fixed point of the y-recursion y <- (df/dx(x*))^T y + de/dx(x*) with x
/// frozen, measured in the dual state norm.
inline Vector solve_adjoint_at(const DifferentiableSystem& sys, const LossFunction& loss,
                               const Vector& x_star, const Vector& w, double tol,
                               const Vector& y0, std::size_t max_steps = kDefaultMaxSteps) {
  const Vector rhs = loss.gradient(x_star);
  return iterate([&](const Vector& y) -> Vector { return sys.vjp_x(x_star, w, y) + rhs; },
                 dual(sys.state_norm), y0, tol, max_steps)
      .final_state;
}

/// dE/dw at w through the deep-solved primal and adjoint fixed points.
inline Vector implicit_gradient(const DifferentiableSystem& sys, const LossFunction& loss,
                                const Vector& w, double tol,
                                std::optional<Vector> x0 = std::nullopt,
                                std::size_t max_steps = kDefaultMaxSteps) {
  if (!(tol > 0.0)) throw std::invalid_argument("implicit_gradient: tol must be positive");
  const auto n = static_cast<Eigen::Index>(sys.state_dim);
  const Vector start = x0 ? *x0 : Vector::Zero(n);
  const Vector x_star = deep_solve(sys.primal_map(), start, w, tol, max_steps);
  const Vector y_star = solve_adjoint_at(sys, loss, x_star, w, tol, Vector::Zero(n), max_steps);
  return sys.vjp_w(x_star, w, y_star);
}

/// E(w) = e(x*(w)) with x* deep-solved from x0.
inline double objective_at(const DifferentiableSystem& sys, const LossFunction& loss,
                           const Vector& w, double tol, const Vector& x0,
                           std::size_t max_steps = kDefaultMaxSteps) {
  return loss.value(deep_solve(sys.primal_map(), x0, w, tol, max_steps));
}

/// Central differences of w -> e(x*(w)), one coordinate at a time, with
/// h_k = h_rel * max(1, |w_k|). Every perturbed solve is warm-started from
/// x*(w).
inline Vector fd_gradient(const DifferentiableSystem& sys, const LossFunction& loss,
                          const Vector& w, double h_rel = 1e-5, double tol = 1e-13,
                          std::optional<Vector> x0 = std::nullopt,
                          std::size_t max_steps = kDefaultMaxSteps) {
  if (!(h_rel > 0.0)) throw std::invalid_argument("fd_gradient: h must be positive");
  const auto n = static_cast<Eigen::Index>(sys.state_dim);
  const Vector start = x0 ? *x0 : Vector::Zero(n);
  const Vector x_star = deep_solve(sys.primal_map(), start, w, tol, max_steps);

  Vector grad(w.size());
  Vector wp = w;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    const double h = h_rel * std::max(1.0, std::abs(w[k]));
    const double w_up = w[k] + h;
    const double w_down = w[k] - h;
    wp[k] = w_up;
    const double up = objective_at(sys, loss, wp, tol, x_star, max_steps);
    wp[k] = w_down;
    const double down = objective_at(sys, loss, wp, tol, x_star, max_steps);
    wp[k] = w[k];
    grad[k] = (up - down) / (w_up - w_down);
  }
  return grad;
}

}  // namespace pam
