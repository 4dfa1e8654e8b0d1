#pragma once

// Checks of the two hypotheses of the improved concentration bound:
//   (i)  E[exp(lambda |f(Y)|)] < infinity for all lambda >= 0;
//   (ii) df/dy_i(x) df/dy_j(y) d2f/dy_j dy_i(z) <= 0 for all x, y, z, i, j.
// Condition (i) is decided structurally where possible. Condition (ii) can
// only be refuted by sampling; "verified-on-sample" is never a proof.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gconc/autodiff.hpp"
#include "gconc/gaussian.hpp"
#include "gconc/growth.hpp"
#include "gconc/random.hpp"

namespace gconc {

enum class ConditionIVerdict { VerifiedStructural, PlausibleEmpirical, Rejected };
enum class ConditionIIVerdict { VerifiedOnSample, Rejected };
enum class Sign { Zero, Positive, Negative, Mixed };

inline std::string to_string(ConditionIVerdict v) {
  switch (v) {
    case ConditionIVerdict::VerifiedStructural: return "verified-structural";
    case ConditionIVerdict::PlausibleEmpirical: return "plausible-empirical";
    case ConditionIVerdict::Rejected: return "rejected";
  }
  return "";
}

inline std::string to_string(ConditionIIVerdict v) {
  return v == ConditionIIVerdict::VerifiedOnSample ? "verified-on-sample" : "rejected";
}

inline std::string to_string(Sign s) {
  switch (s) {
    case Sign::Zero: return "0";
    case Sign::Positive: return "+";
    case Sign::Negative: return "-";
    case Sign::Mixed: return "mixed";
  }
  return "";
}

struct ConditionConfig {
  double box_radius = 6.0;
  std::uint64_t sample_count = 20'000;
  std::uint64_t seed = 42;
  std::array<double, 3> tail_multipliers{2.0, 4.0, 8.0};
  std::uint64_t tail_sample_count = 2'000;  // per multiplier
  double sign_tolerance = 1e-10;
  double witness_tolerance = 1e-12;
  std::uint64_t diagnostic_samples = 100'000;
  std::array<double, 3> diagnostic_lambdas{1.0, 2.0, 4.0};
  double divergence_share = 0.5;
};

// Empirical E[exp(lambda |f|)] from Gaussian samples, in log space.
struct TailDiagnostic {
  double lambda = 0.0;
  double log_mean = 0.0;
  double top_share = 0.0;  // share of the sum carried by the largest sample
  bool divergent = false;
};

struct ConditionIResult {
  ConditionIVerdict verdict = ConditionIVerdict::PlausibleEmpirical;
  std::string evidence;
  std::string growth;
  // Exponential moments are only used for lambda < lambda_limit.
  double lambda_limit = std::numeric_limits<double>::infinity();
  std::vector<TailDiagnostic> diagnostics;
  bool derivatives_subexponential = false;
  std::string derivative_evidence;

  bool admits_lambda(double lambda) const {
    return verdict != ConditionIVerdict::Rejected && lambda < lambda_limit;
  }
};

struct ConditionWitness {
  std::vector<double> x, y, z;
  int i = 0;
  int j = 0;  // 0-based
  double product = 0.0;
};

struct ConditionIIResult {
  ConditionIIVerdict verdict = ConditionIIVerdict::VerifiedOnSample;
  std::string evidence;
  std::vector<Sign> gradient_signs;
  std::optional<ConditionWitness> witness;
  std::uint64_t points_checked = 0;
  std::uint64_t points_skipped = 0;  // probe points where f or its derivatives are not finite
};

struct ConditionReport {
  ConditionIResult condition_i;
  ConditionIIResult condition_ii;
  double sample_box_radius = 0.0;
  std::uint64_t sample_count = 0;

  bool any_rejected() const {
    return condition_i.verdict == ConditionIVerdict::Rejected ||
           condition_ii.verdict == ConditionIIVerdict::Rejected;
  }
};

// Origin, then sample_count uniform points in [-r, r]^n, then
// tail_sample_count points in each enlarged box. Each group reads its own
// stream by index, so a larger count only appends points.
inline SampleMatrix probe_points(int n, const ConditionConfig& config) {
  SampleMatrix pts;
  pts.dimension = n;
  pts.data.assign(n, 0.0);
  auto append = [&](std::uint32_t offset, std::uint64_t count, double radius) {
    const CounterStream s(config.seed, StreamLabel::ConditionProbe, offset);
    std::vector<double> p(n);
    for (std::uint64_t k = 0; k < count; ++k) {
      s.uniform_vector(k, p, -radius, radius);
      pts.data.insert(pts.data.end(), p.begin(), p.end());
    }
  };
  append(0, config.sample_count, config.box_radius);
  for (std::size_t t = 0; t < config.tail_multipliers.size(); ++t) {
    append(static_cast<std::uint32_t>(t + 1), config.tail_sample_count,
           config.box_radius * config.tail_multipliers[t]);
  }
  return pts;
}

namespace detail {

inline std::vector<TailDiagnostic> exponential_moment_diagnostics(const ExpressionTree& tree,
                                                                  const ConditionConfig& config) {
  const int n = tree.dimension();
  SamplerConfig sampler;
  sampler.seed = config.seed;
  sampler.sample_count = config.diagnostic_samples;
  const SampleMatrix ys = sample_standard_normal(sampler, n, {StreamLabel::ConditionProbe, 100});
  std::vector<double> magnitude(ys.rows());
  for (std::size_t k = 0; k < ys.rows(); ++k) magnitude[k] = std::fabs(evaluate(tree, ys.row(k)));
  const double biggest = *std::max_element(magnitude.begin(), magnitude.end());

  std::vector<TailDiagnostic> out;
  for (double lambda : config.diagnostic_lambdas) {
    TailDiagnostic d;
    d.lambda = lambda;
    const double top = lambda * biggest;
    std::vector<double> scaled(magnitude.size());
    for (std::size_t k = 0; k < magnitude.size(); ++k) {
      scaled[k] = std::exp(lambda * magnitude[k] - top);
    }
    const double total = pairwise_sum(scaled);
    d.log_mean = top + std::log(total) - std::log(static_cast<double>(magnitude.size()));
    d.top_share = 1.0 / total;
    d.divergent = d.top_share > config.divergence_share;
    out.push_back(d);
  }
  return out;
}

// Looks for exp-type growth of |f| along coordinate and diagonal rays:
// log|f| at radii 8, 16, 32 whose increments at least grow like r.
inline std::optional<std::string> exponential_ray(const ExpressionTree& tree) {
  const int n = tree.dimension();
  std::vector<std::vector<double>> directions;
  for (int i = 0; i < n; ++i) {
    for (double s : {1.0, -1.0}) {
      std::vector<double> d(n, 0.0);
      d[i] = s;
      directions.push_back(d);
    }
  }
  for (double s : {1.0, -1.0}) directions.emplace_back(n, s / std::sqrt(double(n)));

  auto log_abs = [&](const std::vector<double>& dir, double r) {
    std::vector<double> p(n);
    for (int i = 0; i < n; ++i) p[i] = r * dir[i];
    try {
      return std::log(std::fabs(evaluate(tree, p)));
    } catch (const DomainError& e) {
      if (std::string(e.what()).find("non-finite") != std::string::npos) {
        return std::numeric_limits<double>::infinity();
      }
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  for (const auto& dir : directions) {
    const double l8 = log_abs(dir, 8.0), l16 = log_abs(dir, 16.0), l32 = log_abs(dir, 32.0);
    if (std::isnan(l8) || std::isnan(l16) || std::isnan(l32)) continue;
    const bool overflow = std::isinf(l32) && l32 > 0 && std::isfinite(l16);
    const double inc1 = l16 - l8, inc2 = l32 - l16;
    const bool grows = std::isfinite(l32) && inc1 > 0.0 && inc2 >= 1.0 && inc2 >= 1.5 * inc1;
    if (overflow || grows) {
      std::ostringstream os;
      os << "log|f| along direction (";
      for (int i = 0; i < n; ++i) os << (i ? ", " : "") << dir[i];
      os << ") at radii 8, 16, 32: " << l8 << ", " << l16 << ", " << l32;
      return os.str();
    }
  }
  return std::nullopt;
}

// For a Poly bound of total degree exactly 2, |f| <= C + sum_i c_i y_i^2 +
// o(|y|^2) by weighted AM-GM, so E[exp(lambda |f|)] < inf for
// lambda < 1 / (2 max_i c_i).
inline double quadratic_lambda_limit(const GrowthBound& g, int n) {
  std::vector<double> c(n, 0.0);
  for (const auto& [e, coef] : g.polynomial()) {
    double total = 0.0;
    for (double b : e) total += b;
    if (std::fabs(total - 2.0) > 1e-12) continue;
    for (int i = 0; i < n; ++i) c[i] += coef * e[i] / 2.0;
  }
  const double worst = *std::max_element(c.begin(), c.end());
  return worst > 0.0 ? 1.0 / (2.0 * worst) : std::numeric_limits<double>::infinity();
}

}  // namespace detail

inline ConditionIResult check_condition_i(const ExpressionTree& tree,
                                          const ConditionConfig& config = {}) {
  ConditionIResult r;
  const int n = tree.dimension();
  const GrowthAnalysis growth = analyze_growth(tree);
  const GrowthBound& g = growth.value;
  r.growth = g.describe();

  r.derivatives_subexponential = true;
  int worst = -1;
  for (std::size_t k = 0; k < growth.gradient.size() + growth.hessian.size(); ++k) {
    const GrowthBound& d =
        k < growth.gradient.size() ? growth.gradient[k] : growth.hessian[k - growth.gradient.size()];
    if (!d.subexponential()) {
      r.derivatives_subexponential = false;
      worst = static_cast<int>(k);
      break;
    }
  }
  if (r.derivatives_subexponential) {
    r.derivative_evidence = "first and second derivatives have at most exp(c|y|) growth";
  } else {
    std::ostringstream os;
    if (worst < n) {
      os << "df/dy" << worst + 1 << ": " << growth.gradient[worst].describe();
    } else {
      const int k = worst - n;
      os << "d2f/dy" << k / n + 1 << "dy" << k % n + 1 << ": " << growth.hessian[k].describe();
    }
    r.derivative_evidence = "subexponential growth not established; " + os.str();
  }

  const bool poly = g.kind() == GrowthBound::Kind::Poly;
  const double degree = g.max_total_degree();
  if (poly && degree < 2.0 - 1e-12) {
    r.verdict = ConditionIVerdict::VerifiedStructural;
    std::ostringstream os;
    os << "|f(y)| <= M(1 + |y|^" << degree << ") with degree < 2";
    r.evidence = os.str();
    return r;
  }

  try {
    r.diagnostics = detail::exponential_moment_diagnostics(tree, config);
  } catch (const DomainError& e) {
    r.verdict = ConditionIVerdict::Rejected;
    r.lambda_limit = 0.0;
    r.evidence = std::string("f is not defined on all of R^n: ") + e.what();
    return r;
  }
  double empirical_limit = std::numeric_limits<double>::infinity();
  for (const auto& d : r.diagnostics) {
    if (d.divergent) {
      empirical_limit = d.lambda;
      break;
    }
  }

  std::ostringstream os;
  if (g.kind() == GrowthBound::Kind::ExpPoly) {
    if (auto ray = detail::exponential_ray(tree)) {
      r.verdict = ConditionIVerdict::Rejected;
      r.lambda_limit = 0.0;
      r.evidence = "exponential growth of |f|: " + *ray;
      return r;
    }
    r.verdict = ConditionIVerdict::PlausibleEmpirical;
    r.lambda_limit = 0.0;
    os << "exponential-type bound not excluded; no structural lambda range";
  } else if (poly) {
    r.verdict = ConditionIVerdict::PlausibleEmpirical;
    if (degree <= 2.0 + 1e-12) {
      r.lambda_limit = std::min(detail::quadratic_lambda_limit(g, n), empirical_limit);
      os << "quadratic growth: exponential moments finite for lambda < " << r.lambda_limit;
    } else {
      r.lambda_limit = 0.0;
      os << "growth of total degree " << degree << " > 2: exponential moments not established";
    }
  } else {
    r.verdict = ConditionIVerdict::PlausibleEmpirical;
    r.lambda_limit = empirical_limit;
    os << "structural bound unavailable; empirical limit lambda < " << r.lambda_limit;
  }
  for (const auto& d : r.diagnostics) {
    if (d.divergent) os << "; sample mean of exp(" << d.lambda << "|f|) dominated by top sample";
  }
  r.evidence = os.str();
  return r;
}

inline ConditionIIResult check_condition_ii(const FunctionModel& model,
                                            const ConditionConfig& config = {}) {
  const int n = model.dimension();
  const SampleMatrix pts = probe_points(n, config);
  const double tol = config.sign_tolerance;

  return dispatch_dimension(n, [&]<int N>() {
    struct Extreme {
      double value = 0.0;
      std::size_t at = 0;
      bool set = false;
    };
    std::array<Extreme, N> g_max{}, g_min{};
    std::array<std::array<Extreme, N>, N> h_max{}, h_min{};
    auto update = [](Extreme& e, double v, std::size_t at, bool larger) {
      if (!e.set || (larger ? v > e.value : v < e.value)) e = {v, at, true};
    };

    Grad<N> g;
    Hess<N> h;
    std::uint64_t skipped = 0;
    std::string skip_note;
    for (std::size_t k = 0; k < pts.rows(); ++k) {
      try {
        model.template value_gradient_hessian<N>(pts.row(k), g, h);
      } catch (const DomainError& e) {
        if (skipped++ == 0) skip_note = e.what();
        continue;
      }
      for (int i = 0; i < N; ++i) {
        const double gi = std::fabs(g[i]) <= tol ? 0.0 : g[i];
        update(g_max[i], gi, k, true);
        update(g_min[i], gi, k, false);
        for (int j = 0; j < N; ++j) {
          const double hij = std::fabs(h[i][j]) <= tol ? 0.0 : h[i][j];
          update(h_max[i][j], hij, k, true);
          update(h_min[i][j], hij, k, false);
        }
      }
    }

    ConditionIIResult r;
    r.points_checked = pts.rows() - skipped;
    r.points_skipped = skipped;
    const std::string skip_evidence =
        skipped ? "; " + std::to_string(skipped) + " probe points not evaluable (" + skip_note + ")"
                : std::string();
    for (int i = 0; i < N; ++i) {
      const bool pos = g_max[i].value > 0.0, neg = g_min[i].value < 0.0;
      r.gradient_signs.push_back(pos && neg ? Sign::Mixed
                                 : pos      ? Sign::Positive
                                 : neg      ? Sign::Negative
                                            : Sign::Zero);
    }

    // The sampled maximum of the triple product is attained at extremes of
    // each factor.
    double best = 0.0;
    std::optional<std::array<std::size_t, 3>> where;
    int best_i = 0, best_j = 0;
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < N; ++j) {
        for (const Extreme* a : {&g_max[i], &g_min[i]}) {
          for (const Extreme* b : {&g_max[j], &g_min[j]}) {
            for (const Extreme* c : {&h_max[i][j], &h_min[i][j]}) {
              const double p = a->value * b->value * c->value;
              if (p > best) {
                best = p;
                where = std::array<std::size_t, 3>{a->at, b->at, c->at};
                best_i = i;
                best_j = j;
              }
            }
          }
        }
      }
    }

    if (r.points_checked == 0) throw Error("no probe point is evaluable" + skip_evidence);
    if (!where || best <= config.witness_tolerance) {
      r.verdict = ConditionIIVerdict::VerifiedOnSample;
      std::ostringstream os;
      os << "triple product <= 0 at all " << r.points_checked << " sampled points (box radius "
         << config.box_radius << " plus tail probes); gradient signs (";
      for (int i = 0; i < N; ++i) os << (i ? ", " : "") << to_string(r.gradient_signs[i]);
      os << ")" << skip_evidence;
      r.evidence = os.str();
      return r;
    }

    ConditionWitness w;
    auto copy = [&](std::size_t k) {
      const auto row = pts.row(k);
      return std::vector<double>(row.begin(), row.end());
    };
    w.x = copy((*where)[0]);
    w.y = copy((*where)[1]);
    w.z = copy((*where)[2]);
    w.i = best_i;
    w.j = best_j;
    const std::vector<double> gx = model.gradient(w.x);
    const std::vector<double> gy = model.gradient(w.y);
    const Matrix hz = model.hessian(w.z);
    w.product = gx[w.i] * gy[w.j] * hz(w.j, w.i);
    r.verdict = ConditionIIVerdict::Rejected;
    std::ostringstream os;
    os.precision(6);
    os << "df/dy" << w.i + 1 << "(x) * df/dy" << w.j + 1 << "(y) * d2f/dy" << w.j + 1 << "dy"
       << w.i + 1 << "(z) = " << w.product << " > 0" << skip_evidence;
    r.evidence = os.str();
    r.witness = std::move(w);
    return r;
  });
}

inline ConditionReport check_conditions(const FunctionModel& model,
                                        const ConditionConfig& config = {}) {
  ConditionReport report;
  report.condition_i = check_condition_i(model.tree(), config);
  report.condition_ii = check_condition_ii(model, config);
  report.sample_box_radius = config.box_radius;
  report.sample_count = config.sample_count;
  return report;
}

}  // namespace gconc
