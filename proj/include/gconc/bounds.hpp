#pragma once

// Lipschitz constant, mean and variance, centred MGF curve and empirical
// tails of f(Y), compared against the classical bound exp(-x^2 / 2K^2) and
// the variance bound exp(-x^2 / 2Var).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "gconc/autodiff.hpp"
#include "gconc/conditions.hpp"
#include "gconc/errors.hpp"
#include "gconc/gaussian.hpp"
#include "gconc/interpolation.hpp"

namespace gconc {

struct BoundsConfig {
  EstimatorConfig estimator;
  ConditionConfig conditions;
  std::optional<double> analytic_K;
  std::vector<double> lambdas{0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
  double confidence = 0.99;
  int lipschitz_starts = 20;
  std::uint64_t min_resolvable_count = 5;
  double heavy_tail_fraction = 0.01;
  double heavy_tail_share = 0.5;
};

struct LipschitzEstimate {
  double value = 0.0;
  std::string method;
  std::vector<double> argmax;
};

struct MgfPoint {
  double lambda = 0.0;
  double phi = 0.0;
  double standard_error = 0.0;
  double bound = 0.0;  // exp(V lambda^2 / 2)
  bool dominated = false;
  bool heavy_tail = false;
  bool skipped = false;
  std::string skip_reason;
};

struct MgfCurve {
  std::vector<MgfPoint> points;
  double lambda_cap = std::numeric_limits<double>::infinity();
  std::string method;
};

struct TailRow {
  double x = 0.0;
  std::uint64_t count = 0;
  double empirical = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 1.0;
  double classical = 1.0;
  double improved = 1.0;
  std::optional<double> improved_example;
  bool resolvable = false;
  bool violation = false;
};

struct BoundReport {
  std::string expression;
  int dimension = 0;
  LipschitzEstimate K;
  bool K_analytic = false;
  Estimate mean;
  Estimate variance;
  MgfCurve mgf_curve;
  std::uint64_t tail_samples = 0;
  double confidence = 0.99;
  std::vector<TailRow> tail_table;
  ConditionReport condition_report;
  bool improved_certified = false;
  std::optional<double> sigma_sup;
  std::vector<std::string> warnings;
};

inline const char* const kLowerBoundTag = "lower-bound-estimate";
inline const char* const kAnalyticTag = "analytic";

// ---- Lipschitz constant ---------------------------------------------------

// max |grad f| over the condition-checker probe points, then coordinate
// ascent on |grad f|^2 from the best starts. Never more than the supremum.
inline LipschitzEstimate estimate_lipschitz(const FunctionModel& model,
                                            const ConditionConfig& probes = {}, int starts = 20) {
  const int n = model.dimension();
  const SampleMatrix pts = probe_points(n, probes);
  auto norm2 = [&](std::span<const double> y) {
    const std::vector<double> g = model.gradient(y);
    return std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
  };

  std::vector<std::pair<double, std::size_t>> scored(pts.rows());
  for (std::size_t k = 0; k < pts.rows(); ++k) scored[k] = {norm2(pts.row(k)), k};
  const std::size_t top = std::min<std::size_t>(std::max(starts, 1), scored.size());
  std::partial_sort(scored.begin(), scored.begin() + top, scored.end(),
                    [](const auto& a, const auto& b) {
                      return a.first > b.first || (a.first == b.first && a.second < b.second);
                    });

  double best = scored[0].first;
  std::vector<double> best_point(pts.row(scored[0].second).begin(),
                                 pts.row(scored[0].second).end());
  for (std::size_t s = 0; s < top; ++s) {
    std::vector<double> y(pts.row(scored[s].second).begin(), pts.row(scored[s].second).end());
    double value = scored[s].first;
    double step = probes.box_radius / 8.0;
    for (int iter = 0; iter < 400 && step > 1e-9; ++iter) {
      bool improved = false;
      for (int i = 0; i < n; ++i) {
        for (double dir : {1.0, -1.0}) {
          const double old = y[i];
          y[i] = old + dir * step;
          double v = -1.0;
          try {
            v = norm2(y);
          } catch (const Error&) {
          }
          if (std::isfinite(v) && v > value) {
            value = v;
            improved = true;
            break;
          }
          y[i] = old;
        }
      }
      if (!improved) step *= 0.5;
    }
    if (value > best) {
      best = value;
      best_point = y;
    }
  }
  return {std::sqrt(best), kLowerBoundTag, best_point};
}

// ---- mean and variance ----------------------------------------------------

inline MeanVariance estimate_mean_variance(const FunctionModel& model,
                                           const EstimatorConfig& config = {}) {
  const int n = model.dimension();
  return mean_and_variance([&](std::span<const double> y) { return model.value(y); }, n,
                           resolve_method(config, n, n, 1.0), StreamId{StreamLabel::Variance});
}

namespace detail {

// f(Y_k) for k < sample_count, in index order.
inline std::vector<double> sample_values(const FunctionModel& model, const SamplerConfig& sampler,
                                         StreamId stream) {
  const int n = model.dimension();
  const std::uint64_t chunk = std::max<std::uint64_t>(1, sampler.chunk_size);
  const std::uint64_t chunks = (sampler.sample_count + chunk - 1) / chunk;
  const CounterStream s(sampler.seed, stream.label, stream.offset);
  std::vector<double> values(sampler.sample_count);
  for_each_chunk(chunks, sampler.workers, [&](std::uint64_t c) {
    std::vector<double> y(n);
    const std::uint64_t end = std::min(sampler.sample_count, (c + 1) * chunk);
    for (std::uint64_t k = c * chunk; k < end; ++k) {
      s.normal_vector(k, y);
      values[k] = model.value(y);
      if (!std::isfinite(values[k])) report_non_finite(y, 0);
    }
  });
  return values;
}

inline double gaussian_exponent_bound(double x, double scale2) {
  if (x <= 0.0) return 1.0;
  if (!(scale2 > 0.0)) return 0.0;
  return std::exp(-x * x / (2.0 * scale2));
}

}  // namespace detail

// Exact binomial interval for k successes in n trials.
inline std::pair<double, double> clopper_pearson(std::uint64_t k, std::uint64_t n,
                                                 double confidence) {
  if (n == 0) return {0.0, 1.0};
  const double alpha = 1.0 - confidence;
  const double kd = static_cast<double>(k), nd = static_cast<double>(n);
  const double lo = k == 0 ? 0.0 : boost::math::ibeta_inv(kd, nd - kd + 1.0, alpha / 2.0);
  const double hi = k == n ? 1.0 : boost::math::ibeta_inv(kd + 1.0, nd - kd, 1.0 - alpha / 2.0);
  return {lo, hi};
}

// ---- MGF ------------------------------------------------------------------

// Centred MGF phi(l) = E[exp(l (f - mean))] on `lambdas`, checked against
// exp(variance l^2 / 2). The caller gates lambdas by condition (i).
inline MgfCurve estimate_mgf_curve(const FunctionModel& model, std::span<const double> lambdas,
                                   double mean, double variance,
                                   const BoundsConfig& config = {}) {
  for (double l : lambdas) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw Error("lambda must be finite and non-negative");
  }
  const int n = model.dimension();
  const std::size_t k = lambdas.size();
  MgfCurve curve;
  curve.points.resize(k);
  const ExpectationMethod method = resolve_method(config.estimator, n, n, 1.0);
  curve.method = describe(method);

  if (std::holds_alternative<QuadratureMethod>(method)) {
    const auto est = expect_many(
        GaussianDomain{n, {StreamId{StreamLabel::Mgf}}}, k,
        [&](std::span<const double> y, std::span<double> out) {
          const double d = model.value(y) - mean;
          for (std::size_t i = 0; i < k; ++i) {
            if (lambdas[i] * d > detail::kMaxExponent) detail::report_overflow(lambdas[i], y, d);
            out[i] = std::exp(lambdas[i] * d);
          }
        },
        method);
    for (std::size_t i = 0; i < k; ++i) {
      curve.points[i].phi = est[i].value;
      curve.points[i].standard_error = est[i].uncertainty;
    }
  } else {
    const SamplerConfig& sampler = std::get<MonteCarloMethod>(method).sampler;
    std::vector<double> dev = detail::sample_values(model, sampler, {StreamLabel::Mgf});
    for (double& d : dev) d -= mean;
    const auto top = std::max_element(dev.begin(), dev.end());
    if (*top > 0.0) curve.lambda_cap = detail::kMaxExponent / *top;
    std::vector<double> e(dev.size());
    for (std::size_t i = 0; i < k; ++i) {
      if (lambdas[i] >= curve.lambda_cap) {
        std::vector<double> y(n);
        CounterStream(sampler.seed, StreamLabel::Mgf, 0)
            .normal_vector(static_cast<std::uint64_t>(top - dev.begin()), y);
        detail::report_overflow(lambdas[i], y, *top);
      }
      for (std::size_t s = 0; s < dev.size(); ++s) e[s] = std::exp(lambdas[i] * dev[s]);
      const Moments m = Moments::of(e);
      curve.points[i].phi = m.mean;
      curve.points[i].standard_error = m.standard_error();
      const std::size_t heavy = std::max<std::size_t>(
          1, static_cast<std::size_t>(config.heavy_tail_fraction * double(e.size())));
      std::nth_element(e.begin(), e.begin() + heavy, e.end(), std::greater<>());
      std::sort(e.begin(), e.begin() + heavy);
      const double share = detail::pairwise_sum(std::span<const double>(e.data(), heavy)) /
                           (m.mean * m.count);
      curve.points[i].heavy_tail = share > config.heavy_tail_share;
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    MgfPoint& p = curve.points[i];
    p.lambda = lambdas[i];
    if (lambdas[i] == 0.0) {
      p.phi = 1.0;
      p.standard_error = 0.0;
    }
    p.bound = std::exp(variance * lambdas[i] * lambdas[i] / 2.0);
    p.dominated = p.phi <= p.bound + 4.0 * p.standard_error;
  }
  return curve;
}

inline MgfCurve estimate_mgf_curve(const FunctionModel& model, std::span<const double> lambdas,
                                   const BoundsConfig& config = {}) {
  const MeanVariance mv = estimate_mean_variance(model, config.estimator);
  return estimate_mgf_curve(model, lambdas, mv.mean.value, mv.variance.value, config);
}

// ---- tail report ----------------------------------------------------------

inline BoundReport tail_report(const FunctionModel& model, std::span<const double> xs,
                               const BoundsConfig& config = {}) {
  for (double x : xs) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw Error("x values must be finite and non-negative");
  }
  BoundReport r;
  r.expression = model.tree().source_text();
  r.dimension = model.dimension();
  r.confidence = config.confidence;
  r.condition_report = check_conditions(model, config.conditions);
  r.improved_certified = !r.condition_report.any_rejected();

  if (config.analytic_K) {
    if (!(*config.analytic_K > 0.0)) throw Error("analytic K must be positive");
    r.K = {*config.analytic_K, kAnalyticTag, {}};
    r.K_analytic = true;
  } else {
    r.K = estimate_lipschitz(model, config.conditions, config.lipschitz_starts);
  }

  const MeanVariance mv = estimate_mean_variance(model, config.estimator);
  r.mean = mv.mean;
  r.variance = mv.variance;

  std::vector<double> admitted;
  for (double l : config.lambdas) {
    if (r.condition_report.condition_i.admits_lambda(l)) admitted.push_back(l);
  }
  const MgfCurve curve =
      estimate_mgf_curve(model, admitted, r.mean.value, r.variance.value, config);
  r.mgf_curve.method = curve.method;
  r.mgf_curve.lambda_cap = curve.lambda_cap;
  std::size_t next = 0;
  for (double l : config.lambdas) {
    if (next < admitted.size() && admitted[next] == l) {
      r.mgf_curve.points.push_back(curve.points[next++]);
      if (r.mgf_curve.points.back().heavy_tail) {
        std::ostringstream os;
        os << "heavy-tailed MGF sample at lambda = " << l;
        r.warnings.push_back(os.str());
      }
    } else {
      MgfPoint p;
      p.lambda = l;
      p.skipped = true;
      p.skip_reason = "exponential integrability not established at this lambda";
      r.mgf_curve.points.push_back(p);
    }
  }

  const SamplerConfig& sampler = config.estimator.sampler;
  std::vector<double> dev = detail::sample_values(model, sampler, {StreamLabel::Tail});
  for (double& d : dev) d -= r.mean.value;
  std::sort(dev.begin(), dev.end());
  r.tail_samples = dev.size();
  for (double x : xs) {
    TailRow row;
    row.x = x;
    row.count = static_cast<std::uint64_t>(dev.end() - std::lower_bound(dev.begin(), dev.end(), x));
    row.empirical = dev.empty() ? 0.0 : double(row.count) / double(dev.size());
    std::tie(row.ci_lo, row.ci_hi) = clopper_pearson(row.count, dev.size(), config.confidence);
    row.classical = detail::gaussian_exponent_bound(x, r.K.value * r.K.value);
    row.improved = detail::gaussian_exponent_bound(x, r.variance.value);
    row.resolvable = row.count >= config.min_resolvable_count;
    row.violation = row.resolvable && row.ci_lo > row.improved;
    r.tail_table.push_back(row);
  }
  return r;
}

// ---- one-dimensional sigma example ----------------------------------------

// f(x) = int_0^x sigma(z) dz for a non-negative, non-increasing sigma.
struct SigmaExampleSpec {
  ExpressionTree sigma;
  ExpressionTree f_tree;
  double sigma_sup = 1.0;
};

inline SigmaExampleSpec builtin_sigma_example() {
  return {parse_expression("logistic(-y1)", 1),
          parse_expression("y1 - log(1 + exp(y1)) + log(2)", 1), 1.0};
}

inline constexpr double kAntiderivativeTolerance = 1e-8;

// Throws Error naming the worst point when sigma violates its invariants or
// f' differs from sigma.
inline void validate_sigma_example(const SigmaExampleSpec& spec, const ConditionConfig& probes) {
  if (spec.sigma.dimension() != 1 || spec.f_tree.dimension() != 1) {
    throw Error("sigma example needs one-dimensional sigma and f");
  }
  const FunctionModel sigma(spec.sigma);
  const FunctionModel f(spec.f_tree);
  const SampleMatrix pts = probe_points(1, probes);
  auto fail = [](const std::string& what, double y, double v) {
    std::ostringstream os;
    os.precision(17);
    os << what << " at y = " << y << " (value " << v << ")";
    throw Error(os.str());
  };
  double worst = 0.0, worst_y = 0.0;
  for (std::size_t k = 0; k < pts.rows(); ++k) {
    const double y = pts.row(k)[0];
    Grad<1> gs, gf;
    const double s = sigma.value_gradient<1>(pts.row(k), gs);
    f.value_gradient<1>(pts.row(k), gf);
    if (s < 0.0) fail("sigma is negative", y, s);
    if (s > spec.sigma_sup) fail("sigma exceeds sigma_sup", y, s);
    if (gs[0] > probes.sign_tolerance) fail("sigma is increasing", y, gs[0]);
    const double mismatch = std::fabs(gf[0] - s);
    if (mismatch > worst) {
      worst = mismatch;
      worst_y = y;
    }
  }
  if (worst > kAntiderivativeTolerance) fail("f' differs from sigma", worst_y, worst);
  const double zero = 0.0;
  const double f0 = f.value(std::span<const double>(&zero, 1));
  if (std::fabs(f0) > kAntiderivativeTolerance) fail("f(0) is not zero", 0.0, f0);
}

// tail_report for f with K = sigma_sup (unless overridden) and the extra
// column exp(-x^2 / (2 sigma_sup^2 - 2 mean^2)).
inline BoundReport sigma_example(const SigmaExampleSpec& spec, std::span<const double> xs,
                                 const BoundsConfig& config = {}) {
  if (!(spec.sigma_sup > 0.0)) throw Error("sigma_sup must be positive");
  validate_sigma_example(spec, config.conditions);
  BoundsConfig c = config;
  if (!c.analytic_K) c.analytic_K = spec.sigma_sup;
  BoundReport r = tail_report(FunctionModel(spec.f_tree), xs, c);
  r.sigma_sup = spec.sigma_sup;
  const double denom = spec.sigma_sup * spec.sigma_sup - r.mean.value * r.mean.value;
  for (TailRow& row : r.tail_table) row.improved_example = detail::gaussian_exponent_bound(row.x, denom);
  return r;
}

}  // namespace gconc
