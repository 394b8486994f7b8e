#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pam {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class NormKind {
  max_abs,      // ||.||_inf
  sum_abs,      // ||.||_1
  euclidean,    // ||.||_2
  frobenius,    // ||.||_2 of a flattened matrix
  stacked_sum,  // sum of inner norms over consecutive blocks
  stacked_max,  // max of inner norms over consecutive blocks
  weighted_pair // p1 ||x||_A + p2 ||y||_B over two equal halves
};

/// Description of a norm as plain data.
///
/// Traces and summaries record the NormSpec that produced a number, so a
/// norm is never a bare function. Composite kinds hold their inner specs by
/// value.
class NormSpec {
 public:
  static NormSpec max_abs() { return NormSpec(NormKind::max_abs); }
  static NormSpec sum_abs() { return NormSpec(NormKind::sum_abs); }
  static NormSpec euclidean() { return NormSpec(NormKind::euclidean); }
  static NormSpec frobenius() { return NormSpec(NormKind::frobenius); }

  static NormSpec stacked_sum(std::vector<std::size_t> blocks, NormSpec inner) {
    return stacked(NormKind::stacked_sum, std::move(blocks), std::move(inner));
  }
  static NormSpec stacked_max(std::vector<std::size_t> blocks, NormSpec inner) {
    return stacked(NormKind::stacked_max, std::move(blocks), std::move(inner));
  }
  /// m equally sized blocks of length `block`.
  static NormSpec stacked_sum(std::size_t m, std::size_t block, NormSpec inner) {
    return stacked_sum(std::vector<std::size_t>(m, block), std::move(inner));
  }

  static NormSpec weighted_pair(double p1, double p2, NormSpec first, NormSpec second) {
    if (!(p1 > 0.0) || !(p2 > 0.0) || !std::isfinite(p1) || !std::isfinite(p2)) {
      throw std::invalid_argument("weighted_pair: weights must be positive and finite");
    }
    NormSpec s(NormKind::weighted_pair);
    s.p1_ = p1;
    s.p2_ = p2;
    s.inner_ = {std::move(first), std::move(second)};
    return s;
  }

  NormKind kind() const { return kind_; }
  const std::vector<std::size_t>& blocks() const { return blocks_; }
  const std::vector<NormSpec>& inner() const { return inner_; }
  double p1() const { return p1_; }
  double p2() const { return p2_; }

  bool is_flat() const {
    return kind_ == NormKind::max_abs || kind_ == NormKind::sum_abs ||
           kind_ == NormKind::euclidean || kind_ == NormKind::frobenius;
  }
  bool is_stacked() const {
    return kind_ == NormKind::stacked_sum || kind_ == NormKind::stacked_max;
  }

  /// Total length implied by the layout, or 0 when any length is accepted.
  std::size_t fixed_size() const {
    if (is_stacked()) return std::accumulate(blocks_.begin(), blocks_.end(), std::size_t{0});
    if (kind_ == NormKind::weighted_pair) {
      const auto a = inner_[0].fixed_size();
      const auto b = inner_[1].fixed_size();
      return (a == 0 || b == 0) ? 0 : a + b;
    }
    return 0;
  }

  friend bool operator==(const NormSpec& a, const NormSpec& b) {
    return a.kind_ == b.kind_ && a.blocks_ == b.blocks_ && a.p1_ == b.p1_ && a.p2_ == b.p2_ &&
           a.inner_ == b.inner_;
  }

 private:
  explicit NormSpec(NormKind k) : kind_(k) {}

  static NormSpec stacked(NormKind k, std::vector<std::size_t> blocks, NormSpec inner) {
    if (blocks.empty()) throw std::invalid_argument("stacked norm needs at least one block");
    NormSpec s(k);
    s.blocks_ = std::move(blocks);
    s.inner_ = {std::move(inner)};
    return s;
  }

  NormKind kind_;
  std::vector<std::size_t> blocks_;
  std::vector<NormSpec> inner_;
  double p1_ = 1.0;
  double p2_ = 1.0;
};

inline std::string to_string(const NormSpec& s) {
  std::ostringstream os;
  switch (s.kind()) {
    case NormKind::max_abs: return "inf";
    case NormKind::sum_abs: return "l1";
    case NormKind::euclidean: return "l2";
    case NormKind::frobenius: return "frobenius";
    case NormKind::stacked_sum:
    case NormKind::stacked_max: {
      os << (s.kind() == NormKind::stacked_sum ? "sum" : "max") << "[";
      const auto& b = s.blocks();
      const bool uniform = std::all_of(b.begin(), b.end(), [&](auto v) { return v == b.front(); });
      if (uniform) {
        os << b.size() << "x" << b.front();
      } else {
        for (std::size_t i = 0; i < b.size(); ++i) os << (i ? "," : "") << b[i];
      }
      os << "](" << to_string(s.inner()[0]) << ")";
      return os.str();
    }
    case NormKind::weighted_pair:
      os.precision(17);
      os << s.p1() << "*" << to_string(s.inner()[0]) << " + " << s.p2() << "*"
         << to_string(s.inner()[1]);
      return os.str();
  }
  return "?";
}

namespace detail {

inline double flat_norm(NormKind k, const Eigen::Ref<const Vector>& v) {
  switch (k) {
    case NormKind::max_abs: return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
    case NormKind::sum_abs: return v.cwiseAbs().sum();
    case NormKind::euclidean:
    case NormKind::frobenius: return v.norm();
    default: break;
  }
  throw std::logic_error("flat_norm: composite kind");
}

}  // namespace detail

inline double norm(const NormSpec& spec, const Eigen::Ref<const Vector>& v) {
  if (spec.is_flat()) return detail::flat_norm(spec.kind(), v);

  const auto expected = spec.fixed_size();
  if (spec.is_stacked()) {
    if (static_cast<std::size_t>(v.size()) != expected) {
      throw std::invalid_argument("norm: vector length does not match stacked layout");
    }
    const auto& inner = spec.inner()[0];
    double acc = 0.0;
    Eigen::Index offset = 0;
    for (auto len : spec.blocks()) {
      const auto n = static_cast<Eigen::Index>(len);
      const double part = norm(inner, v.segment(offset, n));
      acc = spec.kind() == NormKind::stacked_sum ? acc + part : std::max(acc, part);
      offset += n;
    }
    return acc;
  }

  // weighted pair: two equal halves
  if (v.size() % 2 != 0 || (expected != 0 && static_cast<std::size_t>(v.size()) != expected)) {
    throw std::invalid_argument("norm: vector length does not match weighted-pair layout");
  }
  const auto half = v.size() / 2;
  return spec.p1() * norm(spec.inner()[0], v.head(half)) +
         spec.p2() * norm(spec.inner()[1], v.tail(half));
}

/// Dual of a norm. Weighted pairs have no dual here.
inline NormSpec dual(const NormSpec& spec) {
  switch (spec.kind()) {
    case NormKind::max_abs: return NormSpec::sum_abs();
    case NormKind::sum_abs: return NormSpec::max_abs();
    case NormKind::euclidean: return NormSpec::euclidean();
    case NormKind::frobenius: return NormSpec::frobenius();
    case NormKind::stacked_sum: return NormSpec::stacked_max(spec.blocks(), dual(spec.inner()[0]));
    case NormKind::stacked_max: return NormSpec::stacked_sum(spec.blocks(), dual(spec.inner()[0]));
    case NormKind::weighted_pair: break;
  }
  throw std::invalid_argument("dual: weighted-pair norm has no dual");
}

/// Induced matrix norm for inf (max row sum) or l1 (max column sum).
inline double operator_norm_upper(const Eigen::Ref<const Matrix>& a, const NormSpec& spec) {
  if (a.size() == 0) return 0.0;
  switch (spec.kind()) {
    case NormKind::max_abs: return a.cwiseAbs().rowwise().sum().maxCoeff();
    case NormKind::sum_abs: return a.cwiseAbs().colwise().sum().maxCoeff();
    default: break;
  }
  throw std::invalid_argument("operator_norm_upper: only inf and l1 induced norms are supported");
}

}  // namespace pam
