#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "gconc/conditions.hpp"
#include "gconc/interpolation.hpp"
#include "gconc/quadrature.hpp"
#include "test_support.hpp"

using namespace gconc;

namespace {

const char* const kSigma = "y1 - log(1 + exp(y1))";

EstimatorConfig monte_carlo(std::uint64_t n) {
  EstimatorConfig c;
  c.strategy = Strategy::MonteCarlo;
  c.sampler.sample_count = n;
  return c;
}

// T(y) from the original t-integral, clipped to [eps, 1] and integrated on
// geometrically graded Gauss-Legendre panels. One-dimensional f only.
double naive_T(const FunctionModel& m, double y, double eps) {
  const auto& gh = gauss_hermite_rule(40);
  const auto& gl = gauss_legendre_unit_rule(16);
  const double fy = m.gradient(std::vector<double>{y})[0];
  double total = 0.0;
  for (double a = eps; a < 1.0;) {
    const double b = std::min(1.0, a * 10.0);
    for (int p = 0; p < gl.order; ++p) {
      const double t = a + (b - a) * gl.nodes[p];
      double inner = 0.0;
      for (int q = 0; q < gh.order; ++q) {
        const double w = std::sqrt(t) * y + std::sqrt(1.0 - t) * gh.nodes[q];
        inner += gh.weights[q] * m.gradient(std::vector<double>{w})[0];
      }
      total += (b - a) * gl.weights[p] * fy * inner / (2.0 * std::sqrt(t));
    }
    a = b;
  }
  return total;
}

}  // namespace

TEST(ComputeT, LinearIsSquaredNorm) {
  const auto m = make_model("3*y1 - 1.5*y2 + 0.5*y3", 3);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z(0.0, 2.0);
  for (int k = 0; k < 10; ++k) {
    const std::vector<double> y{z(rng), z(rng), z(rng)};
    EXPECT_NEAR(compute_T(m, y).value, 9.0 + 2.25 + 0.25, 1e-10);
  }
  EXPECT_NEAR(compute_T(make_model("y1 + 2*y2", 2), std::vector<double>{0.3, -1.0}).value, 5.0, 1e-10);
}

TEST(ComputeT, Square) {
  const auto m = make_model("y1^2", 1);
  for (double y : {-1.5, 0.0, 1.0, 2.0}) {
    const std::vector<double> p{y};
    EXPECT_NEAR(compute_T(m, p).value, 2 * y * y, 1e-10);
    EXPECT_NEAR(grad_T(m, p, 0).value, 4 * y, 1e-10);
    EXPECT_NEAR(compute_T_bar(m, p).value, 4 * y * y, 1e-9);
  }
  const auto mc = compute_T(m, std::vector<double>{1.0}, monte_carlo(200000));
  EXPECT_LE(std::fabs(mc.value - 2.0), 4 * mc.uncertainty);
}

TEST(ComputeT, QuadraticForm) {
  // f = y'Ay/2 gives T(y) = |Ay|^2 / 2.
  const auto m = make_model("y1^2 + 0.5*y2^2 + y1*y2", 2);  // A = [[2,1],[1,1]]
  const std::vector<double> y{0.7, -1.3};
  const double a1 = 2 * y[0] + y[1], a2 = y[0] + y[1];
  EXPECT_NEAR(compute_T(m, y).value, (a1 * a1 + a2 * a2) / 2, 1e-10);
  const auto g = grad_T_all(m, y);
  // grad of |Ay|^2/2 is A^2 y
  EXPECT_NEAR(g[0].value, 2 * a1 + a2, 1e-10);
  EXPECT_NEAR(g[1].value, a1 + a2, 1e-10);
}

TEST(ComputeT, ReportsMethod) {
  const auto e = compute_T(make_model(kSigma, 1), std::vector<double>{0.1});
  EXPECT_EQ(e.method, "u-substituted Gauss-Legendre");
  EXPECT_EQ(e.t_quadrature_order, 32);
  EXPECT_FALSE(e.inner_expectation_spec.empty());
  EXPECT_GE(e.uncertainty, 0.0);
  EXPECT_TRUE(std::isfinite(e.uncertainty));
}

TEST(GradT, LinearIsZero) {
  const auto m = make_model("2*y1 - y2", 2);
  for (const auto& g : grad_T_all(m, std::vector<double>{0.4, 1.1})) EXPECT_EQ(g.value, 0.0);
  EXPECT_EQ(compute_T_bar(m, std::vector<double>{0.4, 1.1}).value, 0.0);
}

TEST(GradT, MatchesFiniteDifference) {
  const auto m = make_model(kSigma, 1);
  const double h = 1e-3;
  const auto plus = compute_T(m, std::vector<double>{0.3 + h});
  const auto minus = compute_T(m, std::vector<double>{0.3 - h});
  const double fd = (plus.value - minus.value) / (2 * h);
  const auto g = grad_T(m, std::vector<double>{0.3}, 0);
  const double unc = std::hypot(g.uncertainty, std::hypot(plus.uncertainty, minus.uncertainty) / (2 * h));
  // O(h^2) truncation of the central difference on top of estimator noise.
  EXPECT_LE(std::fabs(fd - g.value), 4 * unc + 1e-6);
  EXPECT_NEAR(fd, g.value, 1e-6);
}

TEST(GradT, RandomTreesMatchFiniteDifference) {
  gconc::testing::ExpressionGenerator gen(2, 99);
  for (int k = 0; k < 10; ++k) {
    const auto m = make_model(gen(3), 2);
    const auto y = gen.point(1.0);
    const auto g = grad_T_all(m, y);
    for (int j = 0; j < 2; ++j) {
      auto yp = y, ym = y;
      yp[j] += 1e-4;
      ym[j] -= 1e-4;
      const double fd = (compute_T(m, yp).value - compute_T(m, ym).value) / 2e-4;
      EXPECT_NEAR(fd, g[j].value, 1e-5 * (1 + std::fabs(fd))) << m.tree().to_string();
    }
  }
}

TEST(ComputeT, NaiveGridConvergesToSubstitutedForm) {
  for (const char* text : {kSigma, "sin(y1)", "y1^2"}) {
    const auto m = make_model(text, 1);
    const double y = 0.6;
    const double target = compute_T(m, std::vector<double>{y}).value;
    double previous = INFINITY;
    for (double eps : {1e-2, 1e-4, 1e-6}) {
      const double gap = std::fabs(naive_T(m, y, eps) - target);
      EXPECT_LT(gap, previous) << text << " eps " << eps;
      previous = gap;
    }
    EXPECT_LT(previous, 2e-3) << text;
  }
}

TEST(ComputeTBar, SignUnderConditionTwo) {
  const std::vector<std::pair<std::string, int>> suite{
      {kSigma, 1}, {"-exp(-0.5*y1)", 1}, {"y1 - log(1 + exp(y1 + 0.5*y2)) + 0.5*y2", 2}};
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  for (const auto& [text, n] : suite) {
    const auto m = make_model(text, n);
    ASSERT_EQ(check_condition_ii(m).verdict, ConditionIIVerdict::VerifiedOnSample) << text;
    const int points = n == 1 ? 20 : 4;
    for (int k = 0; k < points; ++k) {
      std::vector<double> y(n);
      for (double& v : y) v = z(rng);
      const auto e = compute_T_bar(m, y);
      EXPECT_LE(e.value, 2 * e.uncertainty) << text;
    }
  }
}

TEST(ComputeTBar, QuadratureAndMonteCarloAgree) {
  const auto m = make_model(kSigma, 1);
  const std::vector<double> y{0.5};
  const auto q = compute_T_bar(m, y);
  EXPECT_LT(q.value, 0.0);
  const auto mc = compute_T_bar(m, y, monte_carlo(1));
  EXPECT_LE(std::fabs(q.value - mc.value), 4 * std::hypot(q.uncertainty, mc.uncertainty));
}

TEST(ComputeTBar, BudgetExceeded) {
  EstimatorConfig c;
  c.evaluation_budget = 1000;
  EXPECT_THROW(compute_T_bar(make_model(kSigma, 1), std::vector<double>{0.0}, c), BudgetExceededError);
}

TEST(Lemma, LinearClosedForm) {
  const auto m = make_model("0.8*y1 - 0.6*y2", 2);  // |a| = 1
  for (double l : {0.0, 0.1, 0.5, 1.0}) {
    const auto r = verify_lemma_identity(m, l);
    const double exact = l * std::exp(l * l / 2);
    EXPECT_TRUE(r.pass) << l;
    EXPECT_NEAR(r.lhs, exact, 1e-9 * (1 + exact));
    EXPECT_NEAR(r.rhs, exact, 1e-9 * (1 + exact));
  }
}

TEST(Lemma, LambdaZeroCenters) {
  const auto r = verify_lemma_identity(make_model(kSigma, 1), 0.0);
  EXPECT_NEAR(r.lhs, 0.0, 1e-12);
  EXPECT_EQ(r.rhs, 0.0);
  EXPECT_TRUE(r.pass);
}

TEST(Lemma, SuitePasses) {
  const std::vector<double> lambdas{0.0, 0.1, 0.5, 1.0};
  for (const char* text : {kSigma, "sin(y1)", "tanh(y1)", "atan(y1)", "sqrt(1 + y1^2)", "-exp(-0.5*y1)"}) {
    const auto m = make_model(text, 1);
    for (const auto& r : verify_lemma_identities(m, lambdas)) {
      EXPECT_TRUE(r.pass) << text << " lambda " << r.lambda << " residual " << r.residual;
    }
  }
  const auto mc = verify_lemma_identity(make_model(kSigma, 1), 0.5, monte_carlo(1'000'000));
  EXPECT_TRUE(mc.pass);
  EXPECT_GT(mc.combined_uncertainty, 0.0);
  EXPECT_EQ(mc.lhs_method.rfind("monte_carlo", 0), 0U) << mc.lhs_method;
}

TEST(Lemma, Errors) {
  EXPECT_THROW(verify_lemma_identity(make_model(kSigma, 1), -0.1), Error);
  EXPECT_THROW(verify_lemma_identity(make_model("1000*y1", 1), 1.0), OverflowError);
}

TEST(MeanT, EqualsVariance) {
  const auto lin = verify_mean_T_equals_variance(make_model("y1 - 2*y2", 2));
  EXPECT_NEAR(lin.lhs, 5.0, 1e-10);
  EXPECT_NEAR(lin.rhs, 5.0, 1e-10);
  const auto sq = verify_mean_T_equals_variance(make_model("y1^2", 1));
  EXPECT_NEAR(sq.lhs, 2.0, 1e-9);
  EXPECT_NEAR(sq.rhs, 2.0, 1e-9);
  for (const auto& text : gconc::testing::kSteinSuite) {
    const auto r = verify_mean_T_equals_variance(make_model(text, 1));
    EXPECT_TRUE(r.pass) << text << " " << r.lhs << " vs " << r.rhs;
  }
  const auto mc = verify_mean_T_equals_variance(make_model(kSigma, 1), monte_carlo(1'000'000));
  EXPECT_TRUE(mc.pass);
  EXPECT_TRUE(std::isnan(mc.lambda));
}
