#pragma once

// The interpolation operator
//
//   T(y) = int_0^1 E[ sum_i d_i f(y) d_i f(u y + sqrt(1 - u^2) Y') ] du,
//
// its partial derivatives, the second-level operator T-bar, and residual
// checks of the identities E[e^{lf} (f - Ef)] = l E[e^{lf} T] and
// E[T] = Var f. All u- and s-integrals use Gauss-Legendre on [0, 1].

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "gconc/autodiff.hpp"
#include "gconc/errors.hpp"
#include "gconc/gaussian.hpp"
#include "gconc/quadrature.hpp"

namespace gconc {

struct InterpolationEstimate {
  double value = 0.0;
  double uncertainty = 0.0;
  std::string method;
  int t_quadrature_order = 0;
  std::string inner_expectation_spec;
};

// Residual of an identity lhs = rhs between two independent estimates.
struct IdentityReport {
  std::string identity;
  double lambda = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double lhs_uncertainty = 0.0;
  double rhs_uncertainty = 0.0;
  double residual = 0.0;
  double combined_uncertainty = 0.0;
  bool pass = false;
  std::string lhs_method;
  std::string rhs_method;

  static constexpr double kPassFactor = 4.0;
};

namespace detail {

inline const char* const kUMethodTag = "u-substituted Gauss-Legendre";

template <int N>
std::span<const double> block(std::span<const double> point, int b) {
  return point.subspan(static_cast<std::size_t>(b) * N, N);
}

// sum_q w_q sum_i gy_i d_i f(u_q y + sqrt(1 - u_q^2) y').
template <int N>
double t_kernel(const FunctionModel& model, std::span<const double> y, const Grad<N>& gy,
                std::span<const double> yp, const QuadratureRule& rule) {
  double acc = 0.0;
  std::array<double, N> w;
  Grad<N> gw;
  for (int q = 0; q < rule.order; ++q) {
    const double u = rule.nodes[q];
    const double c = std::sqrt(std::max(0.0, 1.0 - u * u));
    for (int i = 0; i < N; ++i) w[i] = u * y[i] + c * yp[i];
    model.value_gradient<N>(w, gw);
    double dot = 0.0;
    for (int i = 0; i < N; ++i) dot += gy[i] * gw[i];
    acc += rule.weights[q] * dot;
  }
  return acc;
}

// out_j = sum_q w_q sum_i [ H_ji(y) d_i f(w_q) + u_q d_i f(y) H_ji(w_q) ].
template <int N>
void grad_t_kernel(const FunctionModel& model, std::span<const double> y, const Grad<N>& gy,
                   const Hess<N>& hy, std::span<const double> yp, const QuadratureRule& rule,
                   std::array<double, N>& out) {
  out.fill(0.0);
  std::array<double, N> w;
  Grad<N> gw;
  Hess<N> hw;
  for (int q = 0; q < rule.order; ++q) {
    const double u = rule.nodes[q];
    const double c = std::sqrt(std::max(0.0, 1.0 - u * u));
    for (int i = 0; i < N; ++i) w[i] = u * y[i] + c * yp[i];
    model.value_gradient_hessian<N>(w, gw, hw);
    for (int j = 0; j < N; ++j) {
      double s = 0.0;
      for (int i = 0; i < N; ++i) s += hy[j][i] * gw[i] + u * gy[i] * hw[j][i];
      out[j] += rule.weights[q] * s;
    }
  }
}

template <int N>
double t_bar_kernel(const FunctionModel& model, std::span<const double> y, const Grad<N>& gy,
                    std::span<const double> ypp, std::span<const double> yp,
                    const QuadratureRule& s_rule, const QuadratureRule& t_rule) {
  double acc = 0.0;
  std::array<double, N> v;
  Grad<N> gv;
  Hess<N> hv;
  std::array<double, N> dt;
  for (int p = 0; p < s_rule.order; ++p) {
    const double s = s_rule.nodes[p];
    const double c = std::sqrt(std::max(0.0, 1.0 - s * s));
    for (int i = 0; i < N; ++i) v[i] = s * y[i] + c * ypp[i];
    model.value_gradient_hessian<N>(v, gv, hv);
    grad_t_kernel<N>(model, v, gv, hv, yp, t_rule, dt);
    double dot = 0.0;
    for (int j = 0; j < N; ++j) dot += gy[j] * dt[j];
    acc += s_rule.weights[p] * dot;
  }
  return acc;
}

inline void check_point(const FunctionModel& model, std::span<const double> y) {
  if (y.size() != static_cast<std::size_t>(model.dimension())) {
    throw Error("point has length " + std::to_string(y.size()) + ", expected " +
                std::to_string(model.dimension()));
  }
}

inline InterpolationEstimate wrap(const Estimate& e, int order) {
  return {e.value, e.uncertainty, kUMethodTag, order, e.method};
}

}  // namespace detail

inline InterpolationEstimate compute_T(const FunctionModel& model, std::span<const double> y,
                                       const EstimatorConfig& config = {}) {
  detail::check_point(model, y);
  const int n = model.dimension();
  const QuadratureRule& rule = gauss_legendre_unit_rule(config.u_order);
  const ExpectationMethod method = resolve_method(config, n, n, config.u_order);
  return dispatch_dimension(n, [&]<int N>() {
    Grad<N> gy;
    model.value_gradient<N>(y, gy);
    const GaussianDomain domain{n, {StreamId{StreamLabel::YPrime}}};
    const Estimate e = expect_many(
        domain, 1,
        [&](std::span<const double> yp, std::span<double> out) {
          out[0] = detail::t_kernel<N>(model, y, gy, yp, rule);
        },
        method)[0];
    return detail::wrap(e, config.u_order);
  });
}

// All partial derivatives of T at y, estimated jointly.
inline std::vector<InterpolationEstimate> grad_T_all(const FunctionModel& model,
                                                     std::span<const double> y,
                                                     const EstimatorConfig& config = {}) {
  detail::check_point(model, y);
  const int n = model.dimension();
  const QuadratureRule& rule = gauss_legendre_unit_rule(config.u_order);
  const ExpectationMethod method = resolve_method(config, n, n, config.u_order);
  return dispatch_dimension(n, [&]<int N>() {
    Grad<N> gy;
    Hess<N> hy;
    model.value_gradient_hessian<N>(y, gy, hy);
    const GaussianDomain domain{n, {StreamId{StreamLabel::YPrime}}};
    const auto est = expect_many(
        domain, N,
        [&](std::span<const double> yp, std::span<double> out) {
          std::array<double, N> d;
          detail::grad_t_kernel<N>(model, y, gy, hy, yp, rule, d);
          for (int j = 0; j < N; ++j) out[j] = d[j];
        },
        method);
    std::vector<InterpolationEstimate> r;
    for (const auto& e : est) r.push_back(detail::wrap(e, config.u_order));
    return r;
  });
}

inline InterpolationEstimate grad_T(const FunctionModel& model, std::span<const double> y, int j,
                                    const EstimatorConfig& config = {}) {
  if (j < 0 || j >= model.dimension()) {
    throw Error("index " + std::to_string(j) + " outside 0.." +
                std::to_string(model.dimension() - 1));
  }
  return grad_T_all(model, y, config)[j];
}

// Number of Hessian evaluations per (Y'', Y') pair in the T-bar integrand.
inline double t_bar_cost_per_point(const EstimatorConfig& config) {
  return static_cast<double>(config.u_order) * (1.0 + config.u_order);
}

inline InterpolationEstimate compute_T_bar(const FunctionModel& model, std::span<const double> y,
                                           const EstimatorConfig& config = {}) {
  detail::check_point(model, y);
  const int n = model.dimension();
  const QuadratureRule& rule = gauss_legendre_unit_rule(config.u_order);
  const double cost = t_bar_cost_per_point(config);

  EstimatorConfig nested = config;
  nested.sampler.sample_count = config.nested_samples;
  const ExpectationMethod method = resolve_method(nested, n, 2 * n, cost);
  double points = 0.0;
  if (const auto* q = std::get_if<QuadratureMethod>(&method)) {
    points = std::pow(double(q->order), 2 * n) + std::pow(double(q->order - 1), 2 * n);
  } else {
    points = static_cast<double>(nested.sampler.sample_count);
  }
  if (points * cost > static_cast<double>(config.evaluation_budget)) {
    throw BudgetExceededError("T-bar needs " + std::to_string(points * cost) +
                              " gradient evaluations, budget is " +
                              std::to_string(config.evaluation_budget));
  }

  return dispatch_dimension(n, [&]<int N>() {
    Grad<N> gy;
    model.value_gradient<N>(y, gy);
    const GaussianDomain domain{
        n, {StreamId{StreamLabel::YDoublePrime}, StreamId{StreamLabel::YPrime}}};
    const Estimate e = expect_many(
        domain, 1,
        [&](std::span<const double> p, std::span<double> out) {
          out[0] = detail::t_bar_kernel<N>(model, y, gy, detail::block<N>(p, 0),
                                           detail::block<N>(p, 1), rule, rule);
        },
        method)[0];
    return detail::wrap(e, config.u_order);
  });
}

namespace detail {

inline IdentityReport finish(IdentityReport r) {
  r.residual = r.lhs - r.rhs;
  r.combined_uncertainty = std::hypot(r.lhs_uncertainty, r.rhs_uncertainty);
  r.pass = std::fabs(r.residual) <= IdentityReport::kPassFactor * r.combined_uncertainty;
  return r;
}

[[noreturn]] inline void report_overflow(double lambda, std::span<const double> y, double f) {
  std::ostringstream os;
  os.precision(17);
  os << "exp(lambda * f) overflows at lambda = " << lambda << ", f = " << f << ", y = (";
  for (std::size_t i = 0; i < y.size(); ++i) os << (i ? ", " : "") << y[i];
  os << ")";
  throw OverflowError(os.str());
}

inline constexpr double kMaxExponent = 700.0;

}  // namespace detail

// Mean of f used for centering: quadrature when cheap, else a pilot run on
// its own stream.
inline Estimate centering_mean(const FunctionModel& model, const EstimatorConfig& config) {
  const int n = model.dimension();
  const ExpectationMethod method = resolve_method(config, n, n, 1.0);
  return expect([&](std::span<const double> y) { return model.value(y); }, n, method,
                StreamId{StreamLabel::Pilot});
}

// One report per lambda. The two sides use independent streams.
inline std::vector<IdentityReport> verify_lemma_identities(const FunctionModel& model,
                                                           std::span<const double> lambdas,
                                                           const EstimatorConfig& config = {}) {
  for (double l : lambdas) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw Error("lambda must be finite and non-negative");
  }
  const int n = model.dimension();
  const std::size_t k = lambdas.size();
  const double mu = centering_mean(model, config).value;
  const QuadratureRule& rule = gauss_legendre_unit_rule(config.u_order);

  auto weight = [&](double lambda, std::span<const double> y, double f) {
    if (lambda * f > detail::kMaxExponent) detail::report_overflow(lambda, y, f);
    return std::exp(lambda * f);
  };

  const ExpectationMethod lhs_method = resolve_method(config, n, n, 1.0);
  const auto lhs = expect_many(
      GaussianDomain{n, {StreamId{StreamLabel::LemmaLhs}}}, k,
      [&](std::span<const double> y, std::span<double> out) {
        const double f = model.value(y);
        for (std::size_t i = 0; i < k; ++i) out[i] = weight(lambdas[i], y, f) * (f - mu);
      },
      lhs_method);

  const ExpectationMethod rhs_method = resolve_method(config, n, 2 * n, config.u_order + 1.0);
  const auto rhs = dispatch_dimension(n, [&]<int N>() {
    return expect_many(
        GaussianDomain{n, {StreamId{StreamLabel::Y}, StreamId{StreamLabel::YPrime}}}, k,
        [&](std::span<const double> p, std::span<double> out) {
          const auto y = detail::block<N>(p, 0);
          Grad<N> gy;
          const double f = model.value_gradient<N>(y, gy);
          const double t = detail::t_kernel<N>(model, y, gy, detail::block<N>(p, 1), rule);
          for (std::size_t i = 0; i < k; ++i) out[i] = lambdas[i] * weight(lambdas[i], y, f) * t;
        },
        rhs_method);
  });

  std::vector<IdentityReport> reports;
  for (std::size_t i = 0; i < k; ++i) {
    IdentityReport r;
    r.identity = "E[exp(lambda f) (f - E f)] = lambda E[exp(lambda f) T]";
    r.lambda = lambdas[i];
    r.lhs = lhs[i].value;
    r.rhs = rhs[i].value;
    r.lhs_uncertainty = lhs[i].uncertainty;
    r.rhs_uncertainty = rhs[i].uncertainty;
    r.lhs_method = lhs[i].method;
    r.rhs_method = rhs[i].method;
    reports.push_back(detail::finish(r));
  }
  return reports;
}

inline IdentityReport verify_lemma_identity(const FunctionModel& model, double lambda,
                                            const EstimatorConfig& config = {}) {
  return verify_lemma_identities(model, std::span<const double>(&lambda, 1), config)[0];
}

inline IdentityReport verify_mean_T_equals_variance(const FunctionModel& model,
                                                    const EstimatorConfig& config = {}) {
  const int n = model.dimension();
  const QuadratureRule& rule = gauss_legendre_unit_rule(config.u_order);
  const ExpectationMethod t_method = resolve_method(config, n, 2 * n, config.u_order + 1.0);
  const Estimate mean_t = dispatch_dimension(n, [&]<int N>() {
    return expect_many(
        GaussianDomain{n, {StreamId{StreamLabel::Y}, StreamId{StreamLabel::YPrime}}}, 1,
        [&](std::span<const double> p, std::span<double> out) {
          const auto y = detail::block<N>(p, 0);
          Grad<N> gy;
          model.value_gradient<N>(y, gy);
          out[0] = detail::t_kernel<N>(model, y, gy, detail::block<N>(p, 1), rule);
        },
        t_method)[0];
  });
  const ExpectationMethod v_method = resolve_method(config, n, n, 1.0);
  const MeanVariance mv = mean_and_variance([&](std::span<const double> y) { return model.value(y); },
                                            n, v_method, StreamId{StreamLabel::Variance});
  IdentityReport r;
  r.identity = "E[T] = Var f";
  r.lambda = std::numeric_limits<double>::quiet_NaN();
  r.lhs = mean_t.value;
  r.rhs = mv.variance.value;
  r.lhs_uncertainty = mean_t.uncertainty;
  r.rhs_uncertainty = mv.variance.uncertainty;
  r.lhs_method = mean_t.method;
  r.rhs_method = mv.variance.method;
  return detail::finish(r);
}

}  // namespace gconc
