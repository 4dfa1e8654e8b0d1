#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "gconc/autodiff.hpp"
#include "test_support.hpp"

using namespace gconc;

TEST(Gradient, Examples) {
  const auto lin = make_model("y1 + 2*y2", 2);
  for (auto p : {std::vector<double>{0.0, 0.0}, std::vector<double>{-3.0, 7.5}}) {
    const auto g = lin.gradient(p);
    ASSERT_EQ(g.size(), 2U);
    EXPECT_DOUBLE_EQ(g[0], 1.0);
    EXPECT_DOUBLE_EQ(g[1], 2.0);
  }
  EXPECT_DOUBLE_EQ(make_model("y1^2", 1).gradient(std::vector<double>{3.0})[0], 6.0);

  const auto sig = make_model("y1 - log(1 + exp(y1))", 1);
  EXPECT_DOUBLE_EQ(sig.gradient(std::vector<double>{0.0})[0], 0.5);
  const double h = 1e-5;
  const double fd = (sig.value(std::vector<double>{h}) - sig.value(std::vector<double>{-h})) / (2 * h);
  EXPECT_NEAR(fd, 0.5, 1e-10);
}

TEST(Hessian, Examples) {
  const Matrix lin = make_model("3*y1 - y2 + 4", 2).hessian(std::vector<double>{0.4, -1.0});
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_EQ(lin(i, j), 0.0);

  for (double x : {-2.0, 0.0, 5.0}) {
    const Matrix h = make_model("y1^2", 1).hessian(std::vector<double>{x});
    EXPECT_DOUBLE_EQ(h(0, 0), 2.0);
  }
  const Matrix m = make_model("y1*y2", 2).hessian(std::vector<double>{1.3, -0.2});
  EXPECT_DOUBLE_EQ(m(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(m(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(m(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(m(1, 1), 0.0);
}

// Closed-form first and second derivatives of every primitive.
TEST(Derivatives, EveryPrimitive) {
  struct Case {
    const char* text;
    double x;
    double d1, d2;
  };
  const double x = 0.7;
  const double s = 1.0 / (1.0 + std::exp(-x));
  const double t = std::tanh(x);
  const double pi = 3.14159265358979323846;
  const Case cases[] = {
      {"exp(y1)", x, std::exp(x), std::exp(x)},
      {"log(y1)", x, 1 / x, -1 / (x * x)},
      {"sqrt(y1)", x, 0.5 / std::sqrt(x), -0.25 * std::pow(x, -1.5)},
      {"sin(y1)", x, std::cos(x), -std::sin(x)},
      {"cos(y1)", x, -std::sin(x), -std::cos(x)},
      {"tanh(y1)", x, 1 - t * t, -2 * t * (1 - t * t)},
      {"logistic(y1)", x, s * (1 - s), s * (1 - s) * (1 - 2 * s)},
      {"erf(y1)", x, 2 / std::sqrt(pi) * std::exp(-x * x), -4 * x / std::sqrt(pi) * std::exp(-x * x)},
      {"atan(y1)", x, 1 / (1 + x * x), -2 * x / ((1 + x * x) * (1 + x * x))},
      {"y1^3", x, 3 * x * x, 6 * x},
      {"y1^-2", x, -2 / (x * x * x), 6 / (x * x * x * x)},
      {"y1^2.5", x, 2.5 * std::pow(x, 1.5), 3.75 * std::pow(x, 0.5)},
      {"1/y1", x, -1 / (x * x), 2 / (x * x * x)},
      {"-y1", x, -1, 0},
  };
  for (const auto& c : cases) {
    const auto m = make_model(c.text, 1);
    const std::vector<double> p{c.x};
    EXPECT_NEAR(m.gradient(p)[0], c.d1, 1e-13 * (1 + std::fabs(c.d1))) << c.text;
    EXPECT_NEAR(m.hessian(p)(0, 0), c.d2, 1e-13 * (1 + std::fabs(c.d2))) << c.text;
  }
}

TEST(Derivatives, DomainViolationPropagates) {
  const auto m = make_model("log(y1)", 1);
  EXPECT_THROW(m.gradient(std::vector<double>{-1.0}), DomainError);
  EXPECT_THROW(m.hessian(std::vector<double>{0.0}), DomainError);
  // sqrt is finite at 0 but its derivative is not.
  EXPECT_THROW(make_model("sqrt(y1)", 1).gradient(std::vector<double>{0.0}), DomainError);
}

TEST(Derivatives, DimensionsAgree) {
  for (int n = 1; n <= kMaxDimension; ++n) {
    std::string text = "0";
    for (int i = 1; i <= n; ++i) text += " + sin(y" + std::to_string(i) + ")";
    const auto m = make_model(text, n);
    const std::vector<double> p(n, 0.3);
    EXPECT_EQ(m.gradient(p).size(), static_cast<std::size_t>(n));
    EXPECT_EQ(m.hessian(p).size(), n);
  }
  EXPECT_THROW(make_model("y1", 9), Error);
  EXPECT_THROW(make_model("y1", 2).gradient(std::vector<double>{1.0}), Error);
}

TEST(FiniteDifference, Examples) {
  auto sin_report = finite_difference_check(make_model("sin(y1)", 1), std::vector<double>{1.0}, 1e-5);
  EXPECT_LT(sin_report.gradient_max_abs_deviation, 1e-6);
  EXPECT_LT(sin_report.hessian_max_abs_deviation, 1e-6);
  EXPECT_FALSE(sin_report.flagged);

  for (double step : {1e-2, 1e-5, 0.5}) {
    const auto lin = finite_difference_check(make_model("2*y1 - 3*y2", 2),
                                             std::vector<double>{0.1, 0.2}, step);
    EXPECT_LT(lin.gradient_max_abs_deviation, 1e-10) << step;
    EXPECT_EQ(lin.hessian_max_abs_deviation, 0.0);
  }

  const auto e = finite_difference_check(make_model("exp(y1)", 1), std::vector<double>{0.0});
  EXPECT_LT(e.gradient_max_abs_deviation, 1e-6);
  EXPECT_THROW(finite_difference_check(make_model("y1", 1), std::vector<double>{0.0}, 0.0), Error);
}

TEST(FiniteDifference, FlagsWrongDerivativesOnlyAboveThreshold) {
  // A large step makes the central difference of sin visibly wrong.
  const auto r = finite_difference_check(make_model("sin(y1)", 1), std::vector<double>{1.0}, 0.5);
  EXPECT_TRUE(r.flagged);
}

TEST(FiniteDifference, RandomTreesAgreeWithAutodiff) {
  int trees = 0;
  for (int n = 1; n <= 3; ++n) {
    gconc::testing::ExpressionGenerator gen(n, 77 + n);
    const int count = n == 1 ? 334 : 333;
    for (int t = 0; t < count; ++t, ++trees) {
      const std::string text = gen(4);
      const auto model = make_model(text, n);
      for (int k = 0; k < 10; ++k) {
        const auto p = gen.point();
        const auto r = finite_difference_check(model, p);
        EXPECT_LE(r.gradient_max_rel_deviation, 1e-4) << text;
        EXPECT_LE(r.hessian_max_rel_deviation, 1e-4) << text;
        EXPECT_FALSE(r.flagged) << text;
      }
    }
  }
  EXPECT_EQ(trees, 1000);
}

TEST(Hessian, SymmetricOnRandomTrees) {
  gconc::testing::ExpressionGenerator gen(3, 4242);
  for (int t = 0; t < 300; ++t) {
    const auto model = make_model(gen(5), 3);
    for (int k = 0; k < 5; ++k) {
      const auto p = gen.point();
      const Matrix h = model.hessian(p);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          EXPECT_LE(std::fabs(h(i, j) - h(j, i)), 1e-12 * (1 + std::fabs(h(i, j))));
        }
    }
  }
}

TEST(Gradient, MatchesValueOfNestedDual) {
  const auto m = make_model("exp(y1) * sin(y2) + y1^2 * y2", 2);
  const std::vector<double> p{0.3, -1.1};
  Grad<2> g1, g2;
  Hess<2> h;
  const double v1 = m.value_gradient<2>(p, g1);
  const double v2 = m.value_gradient_hessian<2>(p, g2, h);
  EXPECT_DOUBLE_EQ(v1, m.value(p));
  EXPECT_DOUBLE_EQ(v2, m.value(p));
  EXPECT_DOUBLE_EQ(g1[0], g2[0]);
  EXPECT_DOUBLE_EQ(g1[1], g2[1]);
}
