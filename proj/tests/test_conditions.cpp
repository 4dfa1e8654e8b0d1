#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "gconc/conditions.hpp"

using namespace gconc;

namespace {

const char* const kSigma = "y1 - log(1 + exp(y1))";

ConditionIResult cond_i(const std::string& text, int n = 1) {
  return check_condition_i(parse_expression(text, n));
}

ConditionIIResult cond_ii(const std::string& text, int n = 1, ConditionConfig c = {}) {
  return check_condition_ii(make_model(text, n), c);
}

// Recomputes the witness product through autodiff.
double recompute(const FunctionModel& m, const ConditionWitness& w) {
  const auto gx = m.gradient(w.x);
  const auto gy = m.gradient(w.y);
  const Matrix hz = m.hessian(w.z);
  return gx[w.i] * gy[w.j] * hz(w.j, w.i);
}

}  // namespace

TEST(ConditionI, LipschitzExampleIsStructural) {
  const auto r = cond_i(kSigma);
  EXPECT_EQ(r.verdict, ConditionIVerdict::VerifiedStructural);
  EXPECT_TRUE(r.derivatives_subexponential);
  EXPECT_TRUE(r.admits_lambda(100.0));
}

TEST(ConditionI, LinearIsStructural) {
  EXPECT_EQ(cond_i("3*y1 - y2 + 1", 2).verdict, ConditionIVerdict::VerifiedStructural);
  EXPECT_EQ(cond_i("sqrt(1 + y1^2 + y2^2)", 2).verdict, ConditionIVerdict::VerifiedStructural);
  EXPECT_EQ(cond_i("exp(-y1^2)").verdict, ConditionIVerdict::VerifiedStructural);
}

TEST(ConditionI, BilinearHasFiniteLambdaRange) {
  // E exp(l |Y1 Y2|) is finite exactly for l < 1.
  const auto r = cond_i("y1*y2", 2);
  EXPECT_EQ(r.verdict, ConditionIVerdict::PlausibleEmpirical);
  EXPECT_DOUBLE_EQ(r.lambda_limit, 1.0);
  EXPECT_TRUE(r.admits_lambda(0.9));
  EXPECT_FALSE(r.admits_lambda(1.0));
}

TEST(ConditionI, QuarticProductFlagsDivergence) {
  const auto r = cond_i("y1^2 * y2^2", 2);
  EXPECT_EQ(r.verdict, ConditionIVerdict::PlausibleEmpirical);
  EXPECT_FALSE(r.admits_lambda(0.1));
  bool divergent_at_one = false;
  for (const auto& d : r.diagnostics) divergent_at_one |= d.lambda == 1.0 && d.divergent;
  EXPECT_TRUE(divergent_at_one);
}

TEST(ConditionI, SquareGatedAtOneHalf) {
  const auto r = cond_i("y1^2");
  EXPECT_NE(r.verdict, ConditionIVerdict::VerifiedStructural);
  EXPECT_TRUE(r.admits_lambda(0.1));
  EXPECT_TRUE(r.admits_lambda(0.49));
  EXPECT_FALSE(r.admits_lambda(0.5));
  EXPECT_FALSE(r.admits_lambda(1.0));
  // Weighted sum of squares: the largest coefficient sets the limit.
  EXPECT_NEAR(cond_i("y1^2 + 2*y2^2", 2).lambda_limit, 0.25, 1e-12);
}

TEST(ConditionI, ExponentialGrowthRejected) {
  for (const char* text : {"exp(y1)", "exp(y1^2)", "exp(y1) + y1"}) {
    const auto r = cond_i(text);
    EXPECT_EQ(r.verdict, ConditionIVerdict::Rejected) << text;
    EXPECT_FALSE(r.admits_lambda(0.0)) << text;
  }
  EXPECT_FALSE(cond_i("exp(y1^2)").derivatives_subexponential);
}

TEST(ConditionI, PartialDomainRejected) {
  const auto r = cond_i("log(y1)");
  EXPECT_EQ(r.verdict, ConditionIVerdict::Rejected);
}

TEST(ConditionII, AcceptsMonotoneConcave) {
  const auto r = cond_ii(kSigma);
  EXPECT_EQ(r.verdict, ConditionIIVerdict::VerifiedOnSample);
  EXPECT_FALSE(r.witness);
  ASSERT_EQ(r.gradient_signs.size(), 1U);
  EXPECT_EQ(r.gradient_signs[0], Sign::Positive);
  EXPECT_EQ(r.points_checked, 1U + 20000U + 3 * 2000U);
}

TEST(ConditionII, AcceptsLinear) {
  const auto r = cond_ii("2*y1 - y2 + 0*y3", 3);
  EXPECT_EQ(r.verdict, ConditionIIVerdict::VerifiedOnSample);
  EXPECT_EQ(r.gradient_signs[0], Sign::Positive);
  EXPECT_EQ(r.gradient_signs[1], Sign::Negative);
  EXPECT_EQ(r.gradient_signs[2], Sign::Zero);
}

TEST(ConditionII, RejectsTanhWithValidWitness) {
  const auto m = make_model("tanh(y1)", 1);
  const auto r = check_condition_ii(m);
  ASSERT_EQ(r.verdict, ConditionIIVerdict::Rejected);
  ASSERT_TRUE(r.witness);
  EXPECT_LT(r.witness->z[0], 0.0);  // tanh'' > 0 only on the negative axis
  EXPECT_GT(recompute(m, *r.witness), 1e-12);
  EXPECT_NEAR(recompute(m, *r.witness), r.witness->product, 1e-12 * (1 + r.witness->product));
}

TEST(ConditionII, WitnessesAreValid) {
  const std::vector<std::pair<std::string, int>> bad{
      {"tanh(y1)", 1}, {"sin(y1)", 1},       {"y1^2", 1},          {"exp(y1)", 1},
      {"y1^3", 1},     {"y1*y2", 2},         {"y1 - y2^2", 2},     {"atan(y1 + y2)", 2},
      {"log(1 + exp(y1)) + y2", 2},          {"y1 + y2 + y3^3", 3}};
  for (const auto& [text, n] : bad) {
    const auto m = make_model(text, n);
    const auto r = check_condition_ii(m);
    ASSERT_EQ(r.verdict, ConditionIIVerdict::Rejected) << text;
    ASSERT_TRUE(r.witness) << text;
    EXPECT_EQ(r.witness->x.size(), static_cast<std::size_t>(n));
    EXPECT_GT(recompute(m, *r.witness), 1e-12) << text;
  }
}

TEST(ConditionII, RandomIncreasingConcaveCompositions) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> coef(0.1, 2.0);
  std::uniform_int_distribution<int> dim(1, 3), kind(0, 4);
  for (int t = 0; t < 50; ++t) {
    const int n = dim(rng);
    std::string u = "(0";
    for (int i = 1; i <= n; ++i) {
      u += " + " + std::to_string(std::uniform_real_distribution<double>(0.0, 2.0)(rng)) + "*y" +
           std::to_string(i);
    }
    u += ")";
    std::string g;
    for (int term = 0; term < 2; ++term) {
      const std::string c = std::to_string(coef(rng));
      switch (kind(rng)) {
        case 0: g += " + " + c + "*(" + u + " - log(1 + exp(" + u + ")))"; break;
        case 1: g += " - " + c + "*exp(-0.2*" + u + ")"; break;
        case 2: g += " - " + c + "*log(1 + exp(-" + u + "))"; break;
        case 3: g += " + " + c + "*" + u; break;
        default: g += " - " + c + "*sqrt(1 + (" + u + ")^2) + " + c + "*" + u; break;
      }
    }
    const auto r = cond_ii(g, n);
    EXPECT_EQ(r.verdict, ConditionIIVerdict::VerifiedOnSample) << g << " : " << r.evidence;
  }
}

TEST(ConditionII, NestedSamplesNeverFlipVerdict) {
  const std::vector<std::pair<std::string, int>> suite{
      {kSigma, 1}, {"3*y1 + y2", 2}, {"-exp(-y1 - y2)", 2}, {"tanh(y1)", 1}, {"y1^2", 1}};
  for (const auto& [text, n] : suite) {
    bool verified_before = true;
    for (std::uint64_t count : {500ULL, 5000ULL, 20000ULL, 40000ULL}) {
      ConditionConfig c;
      c.sample_count = count;
      const bool verified = cond_ii(text, n, c).verdict == ConditionIIVerdict::VerifiedOnSample;
      EXPECT_FALSE(verified && !verified_before) << text << " flipped at " << count;
      verified_before = verified;
    }
  }
}

TEST(ProbePoints, NestedAcrossCounts) {
  ConditionConfig small, large;
  small.sample_count = 100;
  large.sample_count = 1000;
  const auto a = probe_points(2, small);
  const auto b = probe_points(2, large);
  // Origin plus the main box are a prefix.
  for (std::size_t k = 0; k < 101 * 2; ++k) EXPECT_EQ(a.data[k], b.data[k]);
  // Tail groups coincide.
  const std::size_t tail = 3 * small.tail_sample_count * 2;
  for (std::size_t k = 0; k < tail; ++k) {
    EXPECT_EQ(a.data[a.data.size() - tail + k], b.data[b.data.size() - tail + k]);
  }
  for (std::size_t k = 0; k < b.rows(); ++k) {
    for (double v : b.row(k)) EXPECT_LE(std::fabs(v), 48.0);
  }
}

TEST(Conditions, ReportCombinesBoth) {
  const auto r = check_conditions(make_model("tanh(y1)", 1));
  EXPECT_TRUE(r.any_rejected());
  EXPECT_EQ(r.sample_box_radius, 6.0);
  EXPECT_EQ(r.sample_count, 20000U);
  EXPECT_FALSE(check_conditions(make_model(kSigma, 1)).any_rejected());
}

TEST(ConditionII, SkipsPointsWhereDerivativesOverflow) {
  const auto r = cond_ii("exp(y1^2)");
  EXPECT_EQ(r.verdict, ConditionIIVerdict::Rejected);
  EXPECT_GT(r.points_skipped, 0U);
  EXPECT_EQ(r.points_checked + r.points_skipped, 1U + 20000U + 3 * 2000U);
  EXPECT_NE(r.evidence.find("not evaluable"), std::string::npos);
  EXPECT_EQ(cond_ii(kSigma).points_skipped, 0U);
}
