#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <sstream>

namespace {

using pam::AdjointState;
using pam::Vector;
using pam::testing::ClosedFormScalar;

Vector scalar(double v) { return Vector::Constant(1, v); }

pam::RunConfig empirical(double eps, double delta, std::size_t iters) {
  pam::RunConfig rc;
  rc.mode = pam::EmpiricalSchedule{eps, delta, 1.0};
  rc.max_outer_iterations = iters;
  return rc;
}

TEST(Run, VanishingReadOutTakesOneStepAndNeverMoves) {
  auto p = pam::models::make_scalar_problem();
  p.system.vjp_w = [](const Vector&, const Vector&, const Vector& y) -> Vector {
    return Vector::Zero(1) * y[0];
  };
  auto rc = empirical(0.4, 0.01, 20);
  rc.w0 = scalar(1.0);
  rc.z0 = {scalar(-3.0), scalar(5.0)};  // far from equilibrium on purpose
  const auto r = pam::run(p.system, p.loss, rc);
  ASSERT_TRUE(r.ok());
  ASSERT_EQ(r.trace.size(), 20u);
  for (const auto& row : r.trace.rows) {
    EXPECT_EQ(row.c_n, 0.0);
    EXPECT_EQ(row.inner_steps, 1u);
  }
  EXPECT_EQ(r.w[0], 1.0);
}

TEST(Run, ScalarEmpiricalDescendsToZero) {
  const auto p = pam::models::make_scalar_problem(0.5);
  const ClosedFormScalar ref{0.5};
  auto rc = empirical(0.1, 0.1, 400);
  rc.w0 = scalar(1.0);
  rc.z0 = {scalar(ref.fixed_point(1.0)), scalar(ref.adjoint_fixed_point(1.0))};
  const auto r = pam::run(p.system, p.loss, rc);
  ASSERT_TRUE(r.ok()) << r.message;
  // The covector update reads the pre-step state, so the first step after w
  // moves still returns the old read-out; the decrease is strict after that.
  EXPECT_EQ(r.trace.rows[1].grad_norm, r.trace.rows[0].grad_norm);
  for (std::size_t n = 2; n < r.trace.size(); ++n) {
    EXPECT_LT(r.trace.rows[n].grad_norm, r.trace.rows[n - 1].grad_norm) << "iteration " << n + 1;
  }
  EXPECT_LT(std::abs(r.w[0]), 1e-12);
}

TEST(Run, TraceIsSelfConsistent) {
  const auto d = pam::models::generate_dataset(pam::models::ModelKind::crn, 3, 2, 9);
  const auto p = pam::models::make_problem(d);
  auto rc = empirical(0.4, 0.01, 200);
  rc.w0 = d.w0;
  rc.z0 = AdjointState::zeros(6);
  std::vector<Vector> ws{d.w0};
  std::vector<Vector> gs;
  const auto r = pam::run(p.system, p.loss, rc, [&](const pam::IterationView& v) {
    ws.push_back(v.w);
    gs.push_back(v.g);
  });
  ASSERT_TRUE(r.ok());
  ASSERT_EQ(r.trace.size(), 200u);
  for (std::size_t n = 0; n < r.trace.size(); ++n) {
    const auto& row = r.trace.rows[n];
    EXPECT_EQ(row.iter, n + 1);
    EXPECT_EQ(row.grad_norm, pam::norm(p.system.param_norm, gs[n]));
    EXPECT_EQ(ws[n + 1], ws[n] - 0.4 * gs[n]);
    EXPECT_EQ(row.param_norm, pam::norm(p.system.param_norm, ws[n + 1]));
    if (n > 0) EXPECT_EQ(row.c_n, 0.01 * r.trace.rows[n - 1].grad_norm);
  }
}

TEST(Run, Deterministic) {
  const auto d = pam::models::generate_dataset(pam::models::ModelKind::nn, 3, 2, 4);
  const auto p = pam::models::make_problem(d);
  auto rc = empirical(0.4, 0.01, 300);
  rc.w0 = d.w0;
  rc.z0 = AdjointState::zeros(6);
  std::ostringstream a, b;
  pam::write_trace_csv(a, pam::run(p.system, p.loss, rc).trace);
  pam::write_trace_csv(b, pam::run(p.system, p.loss, rc).trace);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Run, GradientToleranceStops) {
  const auto p = pam::models::make_scalar_problem(0.5);
  auto rc = empirical(0.1, 0.1, 10000);
  rc.w0 = scalar(1.0);
  rc.z0 = {scalar(2.0), scalar(4.0)};
  rc.gradient_tolerance = 1e-6;
  const auto r = pam::run(p.system, p.loss, rc);
  EXPECT_EQ(r.status, pam::RunStatus::gradient_tolerance);
  EXPECT_LT(r.trace.rows.back().grad_norm, 1e-6);
  EXPECT_GE(r.trace.rows[r.trace.size() - 2].grad_norm, 1e-6);
}

TEST(Run, ExpandingMapIsReportedAsDivergence) {
  auto p = pam::models::make_scalar_problem(0.5);
  p.system.step = [](const Vector& x, const Vector& w) -> Vector { return 2.0 * x + w; };
  auto rc = empirical(0.1, 0.1, 10);
  rc.w0 = scalar(1.0);
  rc.z0 = {scalar(1.0), scalar(1.0)};
  rc.check_initial_condition = false;
  const auto r = pam::run(p.system, p.loss, rc);
  EXPECT_EQ(r.status, pam::RunStatus::divergence);
  EXPECT_FALSE(r.ok());
}

TEST(Run, OscillatingMapExhaustsInnerBudget) {
  auto p = pam::models::make_scalar_problem(0.5);
  p.system.step = [](const Vector& x, const Vector& w) -> Vector { return -x + w; };
  auto rc = empirical(0.1, 0.1, 10);
  rc.w0 = scalar(1.0);
  rc.z0 = {scalar(3.0), scalar(1.0)};
  rc.inner_max_steps = 100;
  const auto r = pam::run(p.system, p.loss, rc);
  EXPECT_EQ(r.status, pam::RunStatus::inner_nonconvergence);
  EXPECT_NE(r.message.find("iteration"), std::string::npos);
}

TEST(Run, InitialConditionRecorded) {
  const auto p = pam::models::make_scalar_problem(0.5, 2.0);
  const auto k = pam::certified_constants(*p.system.lipschitz, 0.4, 0.5, 0.5);
  pam::RunConfig rc;
  rc.mode = k;
  rc.max_outer_iterations = 1;
  rc.w0 = scalar(1.0);
  rc.z0 = {scalar(2.0), scalar(4.0)};
  auto r = pam::run(p.system, p.loss, rc);
  ASSERT_TRUE(r.initial_condition);
  EXPECT_LE(r.initial_condition->distance, 1e-11);
  EXPECT_EQ(r.initial_condition->satisfied(), true);

  rc.z0 = AdjointState::zeros(1);
  r = pam::run(p.system, p.loss, rc);
  EXPECT_EQ(r.initial_condition->satisfied(), false);

  auto e = empirical(0.1, 0.1, 1);
  e.w0 = scalar(1.0);
  e.z0 = AdjointState::zeros(1);
  r = pam::run(p.system, p.loss, e);
  ASSERT_TRUE(r.initial_condition);
  EXPECT_FALSE(r.initial_condition->satisfied().has_value());
}

TEST(Run, RejectsBadConfig) {
  const auto p = pam::models::make_scalar_problem();
  auto rc = empirical(0.0, 0.1, 10);
  rc.w0 = scalar(1.0);
  rc.z0 = AdjointState::zeros(1);
  EXPECT_THROW(pam::run(p.system, p.loss, rc), std::invalid_argument);
  rc = empirical(0.1, 0.1, 0);
  rc.w0 = scalar(1.0);
  rc.z0 = AdjointState::zeros(1);
  EXPECT_THROW(pam::run(p.system, p.loss, rc), std::invalid_argument);
  rc = empirical(0.1, 0.1, 10);
  rc.w0 = Vector::Zero(2);
  rc.z0 = AdjointState::zeros(1);
  EXPECT_THROW(pam::run(p.system, p.loss, rc), std::invalid_argument);
}

TEST(Run, CertifiedScalarTracksEquilibrium) {
  const auto p = pam::models::make_scalar_problem(0.5, 2.0);
  const ClosedFormScalar ref{0.5};
  const auto k = pam::certified_constants(*p.system.lipschitz, 0.4, 0.5, 0.5);
  pam::RunConfig rc;
  rc.mode = k;
  rc.max_outer_iterations = 300;
  rc.w0 = scalar(1.0);
  rc.z0 = {scalar(2.0), scalar(4.0)};
  const auto z_norm = pam::adjoint_norm(p.system.state_norm, k.p1);
  std::size_t checked = 0;
  pam::run(p.system, p.loss, rc, [&](const pam::IterationView& v) {
    // Closed-form equilibrium of the adjoint system at w_{n-1}.
    const double w = v.w_prev[0];
    const Vector z_star = AdjointState{scalar(ref.fixed_point(w)), scalar(ref.adjoint_fixed_point(w))}.packed();
    EXPECT_LE(pam::norm(z_norm, v.z.packed() - z_star), k.c * pam::norm(p.system.param_norm, v.g))
        << "iteration " << v.n;
    ++checked;
  });
  EXPECT_EQ(checked, 300u);
}

TEST(Run, ReadOutAtEquilibriumIsExactGradient) {
  // g(z*(w), w) reproduces gradient descent on E step by step.
  const auto p = pam::models::make_scalar_problem(0.5);
  const ClosedFormScalar ref{0.5};
  const pam::StepMap adj = pam::make_adjoint_map(p.system, p.loss, 1.0);
  double w_oracle = 1.0;
  double w_exact = 1.0;
  Vector z = Vector::Zero(2);
  for (int n = 0; n < 100; ++n) {
    z = pam::deep_solve(adj, z, scalar(w_oracle), 1e-14);
    w_oracle -= 0.1 * pam::adjoint_gradient(p.system, AdjointState::unpack(z), scalar(w_oracle))[0];
    w_exact -= 0.1 * ref.gradient(w_exact);
    EXPECT_NEAR(w_oracle, w_exact, 1e-10 * (n + 1));
  }
}

TEST(Descent, ConstantObjectiveHasNoViolations) {
  std::vector<pam::DescentSample> s(10, pam::DescentSample{3.0, 0.0});
  EXPECT_TRUE(pam::check_descent(s, 0.1, 1.0, 0.2).ok());
}

TEST(Descent, IncreasesAreFlagged) {
  const std::vector<pam::DescentSample> s{{1.0, 0.0}, {2.0, 0.0}, {1.5, 0.0}, {3.0, 0.0}};
  const auto r = pam::check_descent(s, 0.1, 1.0, 0.2);
  EXPECT_EQ(r.violations, (std::vector<std::size_t>{0, 2}));
}

TEST(Descent, ConstantFormula) {
  // eps (1-a) (1 - L/2 eps (1-a)) with eps = 0.5, L = 2, a = 0.5: 0.25 * 0.75
  EXPECT_DOUBLE_EQ(pam::descent_constant(0.5, 2.0, 0.5), 0.1875);
}

TEST(Descent, CertifiedScalarRunDecreasesByTheBound) {
  const auto p = pam::models::make_scalar_problem(0.5, 2.0);
  const ClosedFormScalar ref{0.5};
  const auto k = pam::certified_constants(*p.system.lipschitz, 0.4, 0.5, 0.5);
  pam::RunConfig rc;
  rc.mode = k;
  rc.max_outer_iterations = 500;
  rc.w0 = scalar(1.0);
  rc.z0 = {scalar(2.0), scalar(4.0)};
  std::vector<pam::DescentSample> samples{{ref.objective(1.0), std::abs(ref.gradient(1.0))}};
  pam::run(p.system, p.loss, rc, [&](const pam::IterationView& v) {
    samples.push_back({ref.objective(v.w[0]), std::abs(ref.gradient(v.w[0]))});
  });
  const double alpha = k.alpha_c / (1.0 - k.alpha_c);
  EXPECT_TRUE(pam::check_descent(samples, k.epsilon, k.gradient_lipschitz(), alpha).ok());
}

TEST(DirectionQuality, Examples) {
  const Vector g = scalar(2.0);
  EXPECT_TRUE(pam::check_direction_quality(g, g, 0.0));
  EXPECT_FALSE(pam::check_direction_quality(g, scalar(0.0), 0.4));
  EXPECT_TRUE(pam::check_direction_quality(1.1 * g, g, 0.1));
  EXPECT_THROW(pam::check_direction_quality(g, Vector::Zero(2), 0.1), std::invalid_argument);
}

TEST(TraceCsv, RoundTrip) {
  pam::OptimizationTrace t;
  t.rows.push_back({1, 0.0, 1, 0.25, 3.5, 1.75, 0.9});
  t.rows.push_back({2, 0.0025, 3, 1e-300, 0.1, std::nullopt, std::nullopt});
  t.rows.push_back({3, 1e-17, 1, 0.3, 0.1, std::numeric_limits<double>::quiet_NaN(), 1.25});
  std::stringstream ss;
  pam::write_trace_csv(ss, t);
  const auto back = pam::read_trace_csv(ss);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back.rows[0].c_n, 0.0);
  EXPECT_EQ(back.rows[0].objective, 1.75);
  EXPECT_EQ(back.rows[1].grad_norm, 1e-300);
  EXPECT_FALSE(back.rows[1].objective.has_value());
  EXPECT_FALSE(back.rows[1].contraction_bound.has_value());
  EXPECT_TRUE(std::isnan(*back.rows[2].objective));
  EXPECT_EQ(back.rows[2].c_n, 1e-17);
  EXPECT_EQ(back.total_inner_steps(), 5u);
}

TEST(TraceCsv, HeaderIsFixed) {
  std::stringstream ss;
  pam::write_trace_csv(ss, {});
  EXPECT_EQ(ss.str(), "iter,c_n,inner_steps,grad_norm,param_norm,objective,contraction_bound\n");
}

TEST(TraceCsv, ErrorsCarryLineNumbers) {
  const std::string header = std::string(pam::kTraceHeader) + "\n";
  auto line_of = [](const std::string& text) -> std::size_t {
    std::stringstream ss(text);
    try {
      pam::read_trace_csv(ss);
    } catch (const pam::TraceFormatError& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(line_of(""), 1u);
  EXPECT_EQ(line_of("iter,c_n\n"), 1u);
  EXPECT_EQ(line_of(header + "1,0,1,0.5,1,,\n2,0,1,x,1,,\n"), 3u);
  EXPECT_EQ(line_of(header + "1,0,1,0.5,1\n"), 2u);
  EXPECT_EQ(line_of(header + "1,0,-1,0.5,1,,\n"), 2u);
}

}  // namespace
