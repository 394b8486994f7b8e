#pragma once

#include "pam/norms.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pam::models {

/// Heterodimerization network on n simple species.
///
/// Free parameters are the log-rates w_{ij} of the reacting pairs D, one
/// entry per unordered pair, in the order the pairs were given. State and
/// inputs live in log-concentration space.
class CrnModel {
 public:
  struct Neighbor {
    std::size_t species;  // j
    std::size_t param;    // index of {i, j} in the parameter vector
  };

  CrnModel(std::size_t n, std::vector<std::pair<std::size_t, std::size_t>> pairs)
      : n_(n), pairs_(std::move(pairs)), neighbors_(n) {
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      auto& [i, j] = pairs_[k];
      if (i == j || i >= n || j >= n) throw std::invalid_argument("CrnModel: invalid pair");
      if (i > j) std::swap(i, j);
      neighbors_[i].push_back({j, k});
      neighbors_[j].push_back({i, k});
    }
  }

  /// Every pair of species reacts.
  static CrnModel complete(std::size_t n) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    return CrnModel(n, std::move(pairs));
  }

  std::size_t species() const { return n_; }
  std::size_t param_dim() const { return pairs_.size(); }
  const std::vector<std::pair<std::size_t, std::size_t>>& pairs() const { return pairs_; }
  const std::vector<Neighbor>& neighbors(std::size_t i) const { return neighbors_[i]; }

  /// Symmetric n x n matrix; diagonal and non-reacting entries are 0.
  Matrix rate_matrix(const Vector& w) const {
    Matrix a = Matrix::Zero(n_, n_);
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      const auto [i, j] = pairs_[k];
      a(i, j) = a(j, i) = w[k];
    }
    return a;
  }

  /// Reads the upper triangle over D.
  Vector params_from_matrix(const Matrix& a) const {
    Vector w(pairs_.size());
    for (std::size_t k = 0; k < pairs_.size(); ++k) w[k] = a(pairs_[k].first, pairs_[k].second);
    return w;
  }

 private:
  std::size_t n_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  std::vector<std::vector<Neighbor>> neighbors_;
};

namespace detail {

inline void check_crn_args(const CrnModel& m, const Vector& x, const Vector& w) {
  if (x.size() != static_cast<Eigen::Index>(m.species()) ||
      w.size() != static_cast<Eigen::Index>(m.param_dim())) {
    throw std::invalid_argument("crn: dimension mismatch");
  }
}

/// log(1 + sum_j exp(w_ij + x_j)) for species i.
inline double crn_log_denominator(const CrnModel& m, std::size_t i, const Vector& x,
                                  const Vector& w) {
  const auto& nb = m.neighbors(i);
  if (nb.empty()) return 0.0;
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& e : nb) top = std::max(top, w[e.param] + x[e.species]);
  if (top <= 0.0) {
    double s = 0.0;
    for (const auto& e : nb) s += std::exp(w[e.param] + x[e.species]);
    return std::log1p(s);
  }
  double s = std::exp(-top);
  for (const auto& e : nb) s += std::exp(w[e.param] + x[e.species] - top);
  return top + std::log(s);
}

}  // namespace detail

/// f_i(x, w; b) = b_i - log(1 + sum_{j ~ i} exp(w_ij + x_j))
inline Vector crn_step(const CrnModel& m, const Vector& x, const Vector& w, const Vector& b) {
  detail::check_crn_args(m, x, w);
  if (b.size() != x.size()) throw std::invalid_argument("crn_step: dimension mismatch");
  if (!x.allFinite() || !w.allFinite() || !b.allFinite()) {
    throw std::invalid_argument("crn_step: non-finite input");
  }
  Vector out(x.size());
  for (std::size_t i = 0; i < m.species(); ++i) {
    out[i] = b[i] - detail::crn_log_denominator(m, i, x, w);
  }
  return out;
}

/// (df/dx)^T y. The Jacobian entry for j ~ i is
/// -exp(w_ij + x_j) / (1 + sum_k exp(w_ik + x_k)).
inline Vector crn_vjp_x(const CrnModel& m, const Vector& x, const Vector& w, const Vector& y) {
  detail::check_crn_args(m, x, w);
  Vector out = Vector::Zero(x.size());
  for (std::size_t i = 0; i < m.species(); ++i) {
    if (y[i] == 0.0) continue;
    const double log_den = detail::crn_log_denominator(m, i, x, w);
    for (const auto& e : m.neighbors(i)) {
      out[e.species] -= y[i] * std::exp(w[e.param] + x[e.species] - log_den);
    }
  }
  return out;
}

/// (df/dw)^T y on the symmetric parameter: the (i,j) and (j,i) entries both
/// feed the single shared w_ij.
inline Vector crn_vjp_w(const CrnModel& m, const Vector& x, const Vector& w, const Vector& y) {
  detail::check_crn_args(m, x, w);
  Vector out = Vector::Zero(w.size());
  for (std::size_t i = 0; i < m.species(); ++i) {
    if (y[i] == 0.0) continue;
    const double log_den = detail::crn_log_denominator(m, i, x, w);
    for (const auto& e : m.neighbors(i)) {
      out[e.param] -= y[i] * std::exp(w[e.param] + x[e.species] - log_den);
    }
  }
  return out;
}

inline std::pair<Vector, Vector> crn_vjps(const CrnModel& m, const Vector& x, const Vector& w,
                                          const Vector& y) {
  return {crn_vjp_x(m, x, w, y), crn_vjp_w(m, x, w, y)};
}

/// M = (max_i sum_{j ~ i} exp(w_ij)) * max over inputs of ||exp(b)||_inf.
inline double crn_m_constant(const CrnModel& m, const Vector& w, std::span<const Vector> bs) {
  if (bs.empty()) throw std::invalid_argument("crn_contraction_bound: no inputs");
  double row = 0.0;
  for (std::size_t i = 0; i < m.species(); ++i) {
    double s = 0.0;
    for (const auto& e : m.neighbors(i)) s += std::exp(w[e.param]);
    row = std::max(row, s);
  }
  double b_max = -std::numeric_limits<double>::infinity();
  for (const auto& b : bs) b_max = std::max(b_max, b.maxCoeff());
  return row * std::exp(b_max);
}

/// beta_x = M / (1 + M), valid in the inf norm on {x <= b} (and in the
/// stacked-sum norm for several inputs).
inline double crn_contraction_bound(const CrnModel& m, const Vector& w,
                                    std::span<const Vector> bs) {
  const double big_m = crn_m_constant(m, w, bs);
  return big_m / (1.0 + big_m);
}

inline double crn_contraction_bound(const CrnModel& m, const Vector& w, const Vector& b) {
  return crn_contraction_bound(m, w, std::span<const Vector>(&b, 1));
}

/// Complex-species concentrations exp(w_ij + x_i + x_j), one per pair.
inline Vector crn_equilibrium_concentrations(const CrnModel& m, const Vector& x_star,
                                             const Vector& w) {
  detail::check_crn_args(m, x_star, w);
  Vector out(m.param_dim());
  for (std::size_t k = 0; k < m.param_dim(); ++k) {
    const auto [i, j] = m.pairs()[k];
    out[k] = std::exp(w[k] + x_star[i] + x_star[j]);
  }
  return out;
}

/// Concentration-space equilibrium map F_i(x) = B_i / (1 + sum_j x_j exp(w_ij)).
inline Vector crn_equilibrium_map_F(const CrnModel& m, const Vector& conc, const Vector& w,
                                    const Vector& total) {
  detail::check_crn_args(m, conc, w);
  if (total.size() != conc.size()) throw std::invalid_argument("crn_equilibrium_map_F: size");
  if ((conc.array() <= 0.0).any() || (total.array() <= 0.0).any()) {
    throw std::invalid_argument("crn_equilibrium_map_F: concentrations must be positive");
  }
  Vector out(conc.size());
  for (std::size_t i = 0; i < m.species(); ++i) {
    double s = 1.0;
    for (const auto& e : m.neighbors(i)) s += conc[e.species] * std::exp(w[e.param]);
    out[i] = total[i] / s;
  }
  return out;
}

/// Largest absolute violations of the mass-action equilibrium conditions
/// and of the conservation law, in concentration space.
struct MassActionResiduals {
  double species_balance = 0.0;  // sum_j k_ij x_i x_j - sum_j x_ij
  double complex_balance = 0.0;  // k_ij x_i x_j - x_ij
  double conservation = 0.0;     // x_i + sum_j x_ij - B_i

  double max() const { return std::max({species_balance, complex_balance, conservation}); }
};

inline MassActionResiduals crn_mass_action_residuals(const CrnModel& m, const Vector& conc,
                                                     const Vector& complexes, const Vector& w,
                                                     const Vector& total) {
  MassActionResiduals r;
  for (std::size_t i = 0; i < m.species(); ++i) {
    double formed = 0.0;
    double bound = 0.0;
    for (const auto& e : m.neighbors(i)) {
      formed += std::exp(w[e.param]) * conc[i] * conc[e.species];
      bound += complexes[e.param];
    }
    r.species_balance = std::max(r.species_balance, std::abs(formed - bound));
    r.conservation = std::max(r.conservation, std::abs(conc[i] + bound - total[i]));
  }
  for (std::size_t k = 0; k < m.param_dim(); ++k) {
    const auto [i, j] = m.pairs()[k];
    r.complex_balance = std::max(
        r.complex_balance, std::abs(std::exp(w[k]) * conc[i] * conc[j] - complexes[k]));
  }
  return r;
}

}  // namespace pam::models
