#pragma once

#include "pam/adjoint.hpp"
#include "pam/models/crn.hpp"
#include "pam/models/nn.hpp"
#include "pam/norms.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace pam::models {

enum class ModelKind { crn, nn };

inline const char* to_string(ModelKind k) { return k == ModelKind::crn ? "crn" : "nn"; }

/// One sub-instance with its input already bound.
struct BlockSystem {
  std::function<Vector(const Vector& x, const Vector& w)> step;
  std::function<Vector(const Vector& x, const Vector& w, const Vector& y)> vjp_x;
  std::function<Vector(const Vector& x, const Vector& w, const Vector& y)> vjp_w;
};

/// m copies of a model sharing one parameter, each driven by its own input,
/// with the mean squared error to per-block targets as loss.
struct ParallelProblem {
  DifferentiableSystem system;
  LossFunction loss;
  std::size_t m = 0;
  std::size_t block = 0;
  std::vector<Vector> targets;

  Vector block_of(const Vector& stacked, std::size_t i) const {
    return stacked.segment(static_cast<Eigen::Index>(i * block), static_cast<Eigen::Index>(block));
  }
};

/// State norm: sum over blocks of the inf norm. Parameter read-outs are
/// reduced in block order so results do not depend on scheduling.
inline ParallelProblem make_parallel(std::size_t block_dim, std::size_t param_dim,
                                     std::vector<BlockSystem> blocks, std::vector<Vector> targets,
                                     NormSpec param_norm = NormSpec::frobenius()) {
  const std::size_t m = blocks.size();
  if (m == 0) throw std::invalid_argument("make_parallel: need at least one block");
  if (targets.size() != m) throw std::invalid_argument("make_parallel: one target per block");
  for (const auto& t : targets) {
    if (t.size() != static_cast<Eigen::Index>(block_dim)) {
      throw std::invalid_argument("make_parallel: target has wrong dimension");
    }
  }

  auto shared = std::make_shared<const std::vector<BlockSystem>>(std::move(blocks));
  auto tgt = std::make_shared<const std::vector<Vector>>(targets);
  const auto nb = static_cast<Eigen::Index>(block_dim);

  ParallelProblem p;
  p.m = m;
  p.block = block_dim;
  p.targets = std::move(targets);

  auto& s = p.system;
  s.state_dim = m * block_dim;
  s.param_dim = param_dim;
  s.state_norm = NormSpec::stacked_sum(m, block_dim, NormSpec::max_abs());
  s.param_norm = std::move(param_norm);
  s.step = [shared, nb](const Vector& x, const Vector& w) {
    Vector out(x.size());
    for (std::size_t i = 0; i < shared->size(); ++i) {
      const auto off = static_cast<Eigen::Index>(i) * nb;
      out.segment(off, nb) = (*shared)[i].step(x.segment(off, nb), w);
    }
    return out;
  };
  s.vjp_x = [shared, nb](const Vector& x, const Vector& w, const Vector& y) {
    Vector out(x.size());
    for (std::size_t i = 0; i < shared->size(); ++i) {
      const auto off = static_cast<Eigen::Index>(i) * nb;
      out.segment(off, nb) = (*shared)[i].vjp_x(x.segment(off, nb), w, y.segment(off, nb));
    }
    return out;
  };
  s.vjp_w = [shared, nb](const Vector& x, const Vector& w, const Vector& y) {
    Vector out = Vector::Zero(w.size());
    for (std::size_t i = 0; i < shared->size(); ++i) {
      const auto off = static_cast<Eigen::Index>(i) * nb;
      out += (*shared)[i].vjp_w(x.segment(off, nb), w, y.segment(off, nb));
    }
    return out;
  };

  const double inv_m = 1.0 / static_cast<double>(m);
  p.loss.value = [tgt, nb, inv_m](const Vector& x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < tgt->size(); ++i) {
      acc += (x.segment(static_cast<Eigen::Index>(i) * nb, nb) - (*tgt)[i]).squaredNorm();
    }
    return acc * inv_m;
  };
  p.loss.gradient = [tgt, nb, inv_m](const Vector& x) {
    Vector g(x.size());
    for (std::size_t i = 0; i < tgt->size(); ++i) {
      const auto off = static_cast<Eigen::Index>(i) * nb;
      g.segment(off, nb) = 2.0 * inv_m * (x.segment(off, nb) - (*tgt)[i]);
    }
    return g;
  };
  return p;
}

inline ParallelProblem make_crn_parallel(const CrnModel& model, const std::vector<Vector>& inputs,
                                         std::vector<Vector> targets) {
  auto mdl = std::make_shared<const CrnModel>(model);
  std::vector<BlockSystem> blocks;
  for (const auto& b_in : inputs) {
    if (b_in.size() != static_cast<Eigen::Index>(model.species())) {
      throw std::invalid_argument("make_crn_parallel: input has wrong dimension");
    }
    blocks.push_back(BlockSystem{
        [mdl, b = b_in](const Vector& x, const Vector& w) { return crn_step(*mdl, x, w, b); },
        [mdl](const Vector& x, const Vector& w, const Vector& y) {
          return crn_vjp_x(*mdl, x, w, y);
        },
        [mdl](const Vector& x, const Vector& w, const Vector& y) {
          return crn_vjp_w(*mdl, x, w, y);
        }});
  }
  auto p = make_parallel(model.species(), model.param_dim(), std::move(blocks), std::move(targets));
  p.system.contraction_bound = [mdl, inputs](const Vector& w) {
    return crn_contraction_bound(*mdl, w, std::span<const Vector>(inputs));
  };
  return p;
}

inline ParallelProblem make_nn_parallel(const NnModel& model, const std::vector<Vector>& inputs,
                                        std::vector<Vector> targets) {
  auto mdl = std::make_shared<const NnModel>(model);
  std::vector<BlockSystem> blocks;
  for (const auto& u_in : inputs) {
    if (u_in.size() != static_cast<Eigen::Index>(model.nodes())) {
      throw std::invalid_argument("make_nn_parallel: input has wrong dimension");
    }
    blocks.push_back(BlockSystem{
        [mdl, u = u_in](const Vector& x, const Vector& w) { return nn_step(*mdl, x, w, u); },
        [mdl, u = u_in](const Vector& x, const Vector& w, const Vector& y) {
          return nn_vjp_x(*mdl, x, w, u, y);
        },
        [mdl, u = u_in](const Vector& x, const Vector& w, const Vector& y) {
          return nn_vjps(*mdl, x, w, u, y).second;
        }});
  }
  auto p = make_parallel(model.nodes(), model.param_dim(), std::move(blocks), std::move(targets));
  p.system.contraction_bound = [mdl](const Vector& w) {
    return nn_contraction_bound(*mdl, w, NormSpec::max_abs());
  };
  return p;
}

/// Dispatch on the model kind; `n` is the species/node count.
inline ParallelProblem make_parallel(ModelKind kind, std::size_t n,
                                     const std::vector<Vector>& inputs,
                                     std::vector<Vector> targets) {
  if (kind == ModelKind::crn) return make_crn_parallel(CrnModel::complete(n), inputs, std::move(targets));
  return make_nn_parallel(NnModel(n), inputs, std::move(targets));
}

/// Per-block box [lower, upper] that the step map leaves invariant.
struct StateBox {
  std::vector<Vector> lower;
  std::vector<Vector> upper;
};

/// State-side Lipschitz data of the stacked problem on an invariant box,
/// for the stacked-sum inf norm and its dual.
struct ParallelStateBounds {
  StateBounds bounds;
  StateBox box;
};

/// CRN: the box is [f(b; w, b), b] per block (f is decreasing in x).
/// beta_x = M/(1+M); the Jacobian rows are softmax-like weights pi with
/// row sums S <= beta_x, and d pi_ij/dx_l = pi_ij (delta_jl - pi_il) gives
/// L_{x^2}f = beta_x (1 + beta_x).
inline ParallelStateBounds crn_state_bounds(const CrnModel& model, const Vector& w,
                                            const std::vector<Vector>& inputs,
                                            const std::vector<Vector>& targets) {
  const double m = static_cast<double>(inputs.size());
  const double n = static_cast<double>(model.species());
  ParallelStateBounds out;
  auto& b = out.bounds;
  b.beta_x = crn_contraction_bound(model, w, std::span<const Vector>(inputs));
  b.lip_xx_f = b.beta_x * (1.0 + b.beta_x);
  b.lip_xx_e = 2.0 * n / m;
  double worst_l1 = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Vector lo = crn_step(model, inputs[i], w, inputs[i]);
    const Vector& hi = inputs[i];
    const Vector spread =
        (lo - targets[i]).cwiseAbs().cwiseMax((hi - targets[i]).cwiseAbs());
    worst_l1 = std::max(worst_l1, spread.sum());
    out.box.lower.push_back(lo);
    out.box.upper.push_back(hi);
  }
  b.lip_x_e = 2.0 / m * worst_l1;
  return out;
}

/// NN: states live in [0,1]^n; beta_x = ||w||_inf / 4 and
/// L_{x^2}f = sup|sigma''| ||w||_inf^2.
inline ParallelStateBounds nn_state_bounds(const NnModel& model, const Vector& w,
                                           const std::vector<Vector>& targets) {
  const double m = static_cast<double>(targets.size());
  const double n = static_cast<double>(model.nodes());
  const double w_inf = operator_norm_upper(Matrix(model.weights(w)), NormSpec::max_abs());
  ParallelStateBounds out;
  auto& b = out.bounds;
  b.beta_x = w_inf / 4.0;
  b.lip_xx_f = kLogisticCurvature * w_inf * w_inf;
  b.lip_xx_e = 2.0 * n / m;
  double worst_l1 = 0.0;
  for (const auto& t : targets) {
    worst_l1 = std::max(worst_l1, t.cwiseMax(Vector::Ones(t.size()) - t).sum());
    out.box.lower.push_back(Vector::Zero(t.size()));
    out.box.upper.push_back(Vector::Ones(t.size()));
  }
  b.lip_x_e = 2.0 / m * worst_l1;
  return out;
}

}  // namespace pam::models
