#pragma once

#include "pam/norms.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>

namespace pam::models {

/// Logistic attractor network f_i(x, w; u) = sigma(sum_j w_ij x_j + u_i).
/// All n*n weights are free, stored row-major.
class NnModel {
 public:
  explicit NnModel(std::size_t n) : n_(n) {}

  std::size_t nodes() const { return n_; }
  std::size_t param_dim() const { return n_ * n_; }

  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Eigen::Map<const RowMajor> weights(const Vector& w) const {
    if (w.size() != static_cast<Eigen::Index>(param_dim())) {
      throw std::invalid_argument("nn: weight vector has wrong length");
    }
    return Eigen::Map<const RowMajor>(w.data(), n_, n_);
  }

  Vector params_from_matrix(const Matrix& a) const {
    Vector w(param_dim());
    Eigen::Map<RowMajor>(w.data(), n_, n_) = a;
    return w;
  }

 private:
  std::size_t n_;
};

/// 1 / (1 + e^{-t}) without overflow for large |t|.
inline double logistic(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

/// sup |sigma''| = 1 / (6 sqrt 3)
inline constexpr double kLogisticCurvature = 0.09622504486493763;

inline Vector nn_step(const NnModel& m, const Vector& x, const Vector& w, const Vector& u) {
  if (x.size() != static_cast<Eigen::Index>(m.nodes()) || u.size() != x.size()) {
    throw std::invalid_argument("nn_step: dimension mismatch");
  }
  Vector a = m.weights(w) * x + u;
  return a.unaryExpr([](double t) { return logistic(t); });
}

/// vjp_x = w^T (D y), vjp_w = (D y) x^T flattened row-major, where
/// D = diag(sigma'(w x + u)).
inline std::pair<Vector, Vector> nn_vjps(const NnModel& m, const Vector& x, const Vector& w,
                                         const Vector& u, const Vector& y) {
  const auto W = m.weights(w);
  const Vector s = (W * x + u).unaryExpr([](double t) { return logistic(t); });
  const Vector dy = (s.array() * (1.0 - s.array()) * y.array()).matrix();
  Vector gw(m.param_dim());
  Eigen::Map<NnModel::RowMajor>(gw.data(), m.nodes(), m.nodes()) = dy * x.transpose();
  return {W.transpose() * dy, std::move(gw)};
}

inline Vector nn_vjp_x(const NnModel& m, const Vector& x, const Vector& w, const Vector& u,
                       const Vector& y) {
  const auto W = m.weights(w);
  const Vector s = (W * x + u).unaryExpr([](double t) { return logistic(t); });
  return W.transpose() * (s.array() * (1.0 - s.array()) * y.array()).matrix();
}

/// ||w|| / 4 in the matrix norm induced by an absolute vector norm. Can
/// exceed 1; contraction is only guaranteed below 1.
inline double nn_contraction_bound(const NnModel& m, const Vector& w, const NormSpec& spec) {
  const Matrix W = m.weights(w);
  switch (spec.kind()) {
    case NormKind::max_abs:
    case NormKind::sum_abs: return operator_norm_upper(W, spec) / 4.0;
    case NormKind::euclidean:
      return W.size() == 0 ? 0.0
                           : Eigen::JacobiSVD<Matrix>(W).singularValues()(0) / 4.0;
    default: break;
  }
  throw std::invalid_argument("nn_contraction_bound: norm must be inf, l1 or l2");
}

}  // namespace pam::models
