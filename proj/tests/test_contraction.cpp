#include "support/oracles.hpp"

#include <gtest/gtest.h>

namespace {

using pam::NormSpec;
using pam::StepMap;
using pam::Vector;

StepMap halving() {
  return {[](const Vector& z, const Vector&) -> Vector { return 0.5 * z; }, NormSpec::max_abs(),
          0.5};
}

StepMap constant(double k) {
  return {[k](const Vector& z, const Vector&) -> Vector { return Vector::Constant(z.size(), k); },
          NormSpec::max_abs(), std::nullopt};
}

const Vector kNoParams = Vector::Zero(0);

TEST(Iterate, ConstantMapNeedsConfirmingStep) {
  const auto r = pam::iterate_to_tolerance(constant(2.0), Vector::Constant(1, 7.0), kNoParams, 0.0);
  EXPECT_EQ(r.final_state[0], 2.0);
  EXPECT_EQ(r.steps_taken, 2u);
  EXPECT_EQ(r.last_increment_norm, 0.0);
}

TEST(Iterate, ZeroThresholdAtFixedPointTakesOneStep) {
  const auto r = pam::iterate_to_tolerance(constant(2.0), Vector::Constant(1, 2.0), kNoParams, 0.0);
  EXPECT_EQ(r.steps_taken, 1u);
}

TEST(Iterate, HalvingMapHandIterated) {
  auto r = pam::iterate_to_tolerance(halving(), Vector::Constant(1, 1.0), kNoParams, 0.25);
  EXPECT_EQ(r.final_state[0], 0.25);
  EXPECT_EQ(r.steps_taken, 2u);
  // First increment is 0.5, so 0.3 still needs a second step.
  r = pam::iterate_to_tolerance(halving(), Vector::Constant(1, 1.0), kNoParams, 0.3);
  EXPECT_EQ(r.final_state[0], 0.25);
  EXPECT_EQ(r.steps_taken, 2u);
  r = pam::iterate_to_tolerance(halving(), Vector::Constant(1, 1.0), kNoParams, 0.5);
  EXPECT_EQ(r.final_state[0], 0.5);
  EXPECT_EQ(r.steps_taken, 1u);
}

TEST(Iterate, BudgetExhaustionReportsLastIncrement) {
  try {
    pam::iterate_to_tolerance(halving(), Vector::Constant(1, 1.0), kNoParams, 1e-6, 3);
    FAIL() << "expected non-convergence";
  } catch (const pam::NonConvergenceError& e) {
    EXPECT_EQ(e.steps(), 3u);
    EXPECT_EQ(e.last_increment_norm(), 0.125);
  }
}

TEST(Iterate, NonFiniteIncrementIsDivergence) {
  StepMap doubling{[](const Vector& z, const Vector&) -> Vector { return 1e300 * z; },
                   NormSpec::max_abs(), std::nullopt};
  EXPECT_THROW(pam::iterate_to_tolerance(doubling, Vector::Constant(1, 1.0), kNoParams, 1e-9),
               pam::DivergenceError);
}

TEST(Iterate, RejectsBadArguments) {
  EXPECT_THROW(pam::iterate_to_tolerance(halving(), Vector::Ones(1), kNoParams, -1.0),
               std::invalid_argument);
  EXPECT_THROW(pam::iterate_to_tolerance(halving(), Vector::Ones(1), kNoParams, 1.0, 0),
               std::invalid_argument);
}

TEST(BanachTail, Values) {
  EXPECT_DOUBLE_EQ(pam::banach_tail_bound(0.5, 0.1), 0.1);
  EXPECT_NEAR(pam::banach_tail_bound(0.9, 1.0), 9.0, 1e-14);
  EXPECT_EQ(pam::banach_tail_bound(0.3, 0.0), 0.0);
  EXPECT_THROW(pam::banach_tail_bound(1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(pam::banach_tail_bound(0.0, 1.0), std::invalid_argument);
}

TEST(DeepSolve, HalvingReachesTolerance) {
  const Vector z = pam::deep_solve(halving(), Vector::Constant(1, 1.0), kNoParams, 1e-12);
  EXPECT_LE(std::abs(z[0]), 2e-12);
}

TEST(DeepSolve, ConstantMapInTwoSteps) {
  const auto r = pam::iterate_to_tolerance(constant(-1.5), Vector::Constant(3, 4.0), kNoParams, 1e-15);
  EXPECT_LE(r.steps_taken, 2u);
  EXPECT_EQ(r.final_state, Vector::Constant(3, -1.5));
}

TEST(DeepSolve, SingleSpeciesCrnIsItsTotal) {
  const auto m = pam::models::CrnModel::complete(1);
  StepMap map{[&](const Vector& x, const Vector& w) { return pam::models::crn_step(m, x, w, Vector::Constant(1, 3.0)); },
              NormSpec::max_abs(), std::nullopt};
  const auto r = pam::iterate_to_tolerance(map, Vector::Zero(1), Vector::Zero(0), 1e-12);
  EXPECT_LE(r.steps_taken, 2u);
  EXPECT_EQ(r.final_state[0], 3.0);
}

TEST(MeasureRatio, KnownMaps) {
  pam::Rng rng(5);
  std::vector<std::pair<Vector, Vector>> pairs;
  for (int k = 0; k < 50; ++k) pairs.emplace_back(rng.normal_vector(3), rng.normal_vector(3));
  EXPECT_DOUBLE_EQ(pam::measure_contraction_ratio(halving(), kNoParams, pairs), 0.5);
  EXPECT_EQ(pam::measure_contraction_ratio(constant(1.0), kNoParams, pairs), 0.0);

  const pam::models::NnModel nn(3);
  const Vector u = rng.normal_vector(3);
  StepMap nn_map{[&](const Vector& x, const Vector& w) { return pam::models::nn_step(nn, x, w, u); },
                 NormSpec::max_abs(), std::nullopt};
  EXPECT_EQ(pam::measure_contraction_ratio(nn_map, Vector::Zero(9), pairs), 0.0);
}

TEST(MeasureRatio, IdenticalPairsSkippedOrRejected) {
  const Vector a = Vector::Ones(2);
  std::vector<std::pair<Vector, Vector>> same{{a, a}};
  EXPECT_THROW(pam::measure_contraction_ratio(halving(), kNoParams, same), std::invalid_argument);
  same.emplace_back(a, Vector::Zero(2));
  EXPECT_DOUBLE_EQ(pam::measure_contraction_ratio(halving(), kNoParams, same), 0.5);
}

// Random affine contractions z -> A z + c with ||A||_inf = beta.
struct AffineDraw {
  pam::Matrix a;
  Vector c;
  double beta;
};

AffineDraw draw_affine(pam::Rng& rng, Eigen::Index n, double max_beta = 0.95) {
  pam::Matrix a = rng.normal_matrix(n, n);
  const double beta = rng.uniform(0.1, max_beta);
  a *= beta / pam::operator_norm_upper(a, NormSpec::max_abs());
  return {a, rng.normal_vector(n), beta};
}

TEST(ContractionProperties, AcceptedIterateWithinBanachBound) {
  pam::Rng rng(21);
  for (int k = 0; k < 100; ++k) {
    const auto d = draw_affine(rng, 4);
    StepMap map{[&d](const Vector& z, const Vector&) -> Vector { return d.a * z + d.c; },
                NormSpec::max_abs(), d.beta};
    const Vector z0 = 5.0 * rng.normal_vector(4);
    const double threshold = std::pow(10.0, rng.uniform(-6, 0));
    const auto r = pam::iterate_to_tolerance(map, z0, kNoParams, threshold);
    EXPECT_LE(r.last_increment_norm, threshold);
    // Exact fixed point by a direct linear solve, independent of iteration.
    const Vector exact = (pam::Matrix::Identity(4, 4) - d.a).partialPivLu().solve(d.c);
    EXPECT_LE(pam::norm(NormSpec::max_abs(), r.final_state - exact),
              pam::banach_tail_bound(d.beta, r.last_increment_norm) + 1e-12);
  }
}

TEST(ContractionProperties, LooserThresholdNeverTakesMoreSteps) {
  pam::Rng rng(22);
  for (int k = 0; k < 100; ++k) {
    const auto d = draw_affine(rng, 3);
    StepMap map{[&d](const Vector& z, const Vector&) -> Vector { return d.a * z + d.c; },
                NormSpec::max_abs(), d.beta};
    const Vector z0 = rng.normal_vector(3);
    double t1 = std::pow(10.0, rng.uniform(-8, 0));
    double t2 = std::pow(10.0, rng.uniform(-8, 0));
    if (t1 < t2) std::swap(t1, t2);
    EXPECT_LE(pam::iterate_to_tolerance(map, z0, kNoParams, t1).steps_taken,
              pam::iterate_to_tolerance(map, z0, kNoParams, t2).steps_taken);
  }
}

TEST(ContractionProperties, DeepSolveIndependentOfStart) {
  pam::Rng rng(23);
  const double tol = 1e-10;
  for (int k = 0; k < 100; ++k) {
    // With beta <= 1/2 each result lies within tol of the fixed point.
    const auto d = draw_affine(rng, 3, 0.5);
    StepMap map{[&d](const Vector& z, const Vector&) -> Vector { return d.a * z + d.c; },
                NormSpec::max_abs(), d.beta};
    const Vector a = pam::deep_solve(map, 10.0 * rng.normal_vector(3), kNoParams, tol);
    const Vector b = pam::deep_solve(map, 10.0 * rng.normal_vector(3), kNoParams, tol);
    EXPECT_LE(pam::norm(NormSpec::max_abs(), a - b), 2.0 * tol);
  }
}

}  // namespace
