#pragma once

// Expectations under the standard Gaussian measure N(0, I_n): seeded Monte
// Carlo over counter-based streams, tensor-grid Gauss-Hermite quadrature, and
// a Stein-identity residual checker.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <exception>
#include <limits>
#include <mutex>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "gconc/autodiff.hpp"
#include "gconc/errors.hpp"
#include "gconc/quadrature.hpp"
#include "gconc/random.hpp"

namespace gconc {

struct SamplerConfig {
  std::uint64_t seed = 42;
  std::uint64_t sample_count = 1'000'000;
  std::uint64_t chunk_size = 1 << 14;
  unsigned workers = 0;  // 0: std::thread::hardware_concurrency()
};

// One block of n Gaussian coordinates drawn from a labelled stream. The
// offset separates repeated independent runs on the same label.
struct StreamId {
  StreamLabel label = StreamLabel::Y;
  std::uint32_t offset = 0;
};

// Row-major samples, one row of `dimension` coordinates per sample.
struct SampleMatrix {
  int dimension = 0;
  std::vector<double> data;

  std::size_t rows() const { return dimension == 0 ? 0 : data.size() / dimension; }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * dimension, static_cast<std::size_t>(dimension)};
  }
};

inline SampleMatrix sample_standard_normal(const SamplerConfig& config, int dimension,
                                           StreamId stream) {
  if (dimension < 1) throw Error("dimension must be positive");
  SampleMatrix out;
  out.dimension = dimension;
  out.data.resize(config.sample_count * dimension);
  const CounterStream s(config.seed, stream.label, stream.offset);
  for (std::uint64_t i = 0; i < config.sample_count; ++i) {
    s.normal_vector(i, std::span<double>(out.data.data() + i * dimension, dimension));
  }
  return out;
}

// ---- deterministic reduction ----------------------------------------------

namespace detail {

inline double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 8) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t half = x.size() / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

// Runs body(chunk) for chunk in [0, chunks) on a worker pool. Results are
// addressed by chunk index, so scheduling never affects them.
template <typename Body>
void for_each_chunk(std::uint64_t chunks, unsigned workers, Body&& body) {
  unsigned w = workers != 0 ? workers : std::max(1U, std::thread::hardware_concurrency());
  w = static_cast<unsigned>(std::min<std::uint64_t>(w, chunks));
  if (w <= 1) {
    for (std::uint64_t c = 0; c < chunks; ++c) body(c);
    return;
  }
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (unsigned t = 0; t < w; ++t) {
    pool.emplace_back([&] {
      for (std::uint64_t c = next++; c < chunks; c = next++) {
        try {
          body(c);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = chunks;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

// Central moments up to order four, mergeable in a fixed order.
struct Moments {
  double count = 0.0;
  double mean = 0.0;
  double m2 = 0.0;  // sum of squared deviations
  double m3 = 0.0;
  double m4 = 0.0;

  static Moments of(std::span<const double> x) {
    Moments r;
    if (x.empty()) return r;
    r.count = static_cast<double>(x.size());
    r.mean = detail::pairwise_sum(x) / r.count;
    std::vector<double> d2(x.size()), d3(x.size()), d4(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - r.mean;
      d2[i] = d * d;
      d3[i] = d2[i] * d;
      d4[i] = d2[i] * d2[i];
    }
    r.m2 = detail::pairwise_sum(d2);
    r.m3 = detail::pairwise_sum(d3);
    r.m4 = detail::pairwise_sum(d4);
    return r;
  }

  static Moments merge(const Moments& a, const Moments& b) {
    if (a.count == 0.0) return b;
    if (b.count == 0.0) return a;
    Moments r;
    r.count = a.count + b.count;
    const double delta = b.mean - a.mean;
    const double na = a.count, nb = b.count, n = r.count;
    r.mean = a.mean + delta * nb / n;
    r.m2 = a.m2 + b.m2 + delta * delta * na * nb / n;
    r.m3 = a.m3 + b.m3 + delta * delta * delta * na * nb * (na - nb) / (n * n) +
           3.0 * delta * (na * b.m2 - nb * a.m2) / n;
    r.m4 = a.m4 + b.m4 +
           delta * delta * delta * delta * na * nb * (na * na - na * nb + nb * nb) / (n * n * n) +
           6.0 * delta * delta * (na * na * b.m2 + nb * nb * a.m2) / (n * n) +
           4.0 * delta * (na * b.m3 - nb * a.m3) / n;
    return r;
  }

  // Pairwise merge in index order.
  static Moments merge_all(std::span<const Moments> parts) {
    if (parts.empty()) return {};
    if (parts.size() == 1) return parts[0];
    const std::size_t half = parts.size() / 2;
    return merge(merge_all(parts.first(half)), merge_all(parts.subspan(half)));
  }

  double sample_variance() const { return count > 1.0 ? m2 / (count - 1.0) : 0.0; }
  double standard_error() const { return count > 1.0 ? std::sqrt(sample_variance() / count) : 0.0; }

  // Standard error of the unbiased sample variance (large-sample form).
  double variance_standard_error() const {
    if (count < 4.0) return std::numeric_limits<double>::infinity();
    const double s2 = m2 / count;
    const double mu4 = m4 / count;
    const double v = (mu4 - s2 * s2 * (count - 3.0) / (count - 1.0)) / count;
    return std::sqrt(std::max(v, 0.0));
  }
};

// ---- expectation engine ---------------------------------------------------

struct QuadratureMethod {
  int order = 20;
};

struct MonteCarloMethod {
  SamplerConfig sampler;
};

using ExpectationMethod = std::variant<QuadratureMethod, MonteCarloMethod>;

inline std::string describe(const ExpectationMethod& method) {
  std::ostringstream os;
  if (const auto* q = std::get_if<QuadratureMethod>(&method)) {
    os << "quadrature(order=" << q->order << ")";
  } else {
    const auto& s = std::get<MonteCarloMethod>(method).sampler;
    os << "monte_carlo(samples=" << s.sample_count << ", seed=" << s.seed << ")";
  }
  return os.str();
}

struct Estimate {
  double value = 0.0;
  // Monte Carlo: standard error. Quadrature: |Q_m - Q_{m-1}| plus a
  // rounding floor.
  double uncertainty = 0.0;
  std::string method;
  std::uint64_t evaluations = 0;
};

// Integration domain: `blocks` independent copies of N(0, I_dimension),
// concatenated into a single point of dimension * blocks.size() coordinates.
struct GaussianDomain {
  int dimension = 1;
  std::vector<StreamId> blocks{StreamId{}};

  int total_dimension() const { return dimension * static_cast<int>(blocks.size()); }
};

// kernel(point, out) writes `outputs` values of the integrand at `point`.
using VectorKernel = std::function<void(std::span<const double>, std::span<double>)>;

namespace detail {

[[noreturn]] inline void report_non_finite(std::span<const double> point, std::size_t output) {
  std::ostringstream os;
  os.precision(17);
  os << "non-finite integrand value (output " << output << ") at point (";
  for (std::size_t i = 0; i < point.size(); ++i) os << (i ? ", " : "") << point[i];
  os << ")";
  throw NonFiniteError(os.str());
}

inline std::uint64_t grid_size(int order, int dims) {
  double s = std::pow(static_cast<double>(order), dims);
  return s > 1e18 ? std::numeric_limits<std::uint64_t>::max() : static_cast<std::uint64_t>(s);
}

// Weighted tensor-grid sums; also returns sum of |w h| for the rounding floor.
inline void tensor_quadrature(const QuadratureRule& rule, int dims, std::size_t outputs,
                              const VectorKernel& kernel, std::vector<double>& sums,
                              std::vector<double>& abs_sums) {
  const int m = rule.order;
  const std::uint64_t total = grid_size(m, dims);
  sums.assign(outputs, 0.0);
  abs_sums.assign(outputs, 0.0);
  std::vector<double> comp(outputs, 0.0);
  std::vector<double> point(dims), out(outputs);
  std::vector<int> idx(dims, 0);
  for (std::uint64_t k = 0; k < total; ++k) {
    double w = 1.0;
    for (int d = 0; d < dims; ++d) {
      point[d] = rule.nodes[idx[d]];
      w *= rule.weights[idx[d]];
    }
    kernel(point, out);
    for (std::size_t o = 0; o < outputs; ++o) {
      if (!std::isfinite(out[o])) report_non_finite(point, o);
      // Neumaier compensated summation.
      const double term = w * out[o];
      const double t = sums[o] + term;
      if (std::fabs(sums[o]) >= std::fabs(term)) {
        comp[o] += (sums[o] - t) + term;
      } else {
        comp[o] += (term - t) + sums[o];
      }
      sums[o] = t;
      abs_sums[o] += std::fabs(term);
    }
    for (int d = dims - 1; d >= 0; --d) {
      if (++idx[d] < m) break;
      idx[d] = 0;
    }
  }
  for (std::size_t o = 0; o < outputs; ++o) sums[o] += comp[o];
}

}  // namespace detail

inline constexpr double kQuadratureRoundingFactor = 64.0 * std::numeric_limits<double>::epsilon();

// Per-sample Monte Carlo moments for each kernel output.
inline std::vector<Moments> monte_carlo_moments(const SamplerConfig& sampler,
                                                const GaussianDomain& domain, std::size_t outputs,
                                                const VectorKernel& kernel) {
  if (sampler.sample_count < 2) throw Error("Monte Carlo needs at least two samples");
  const std::uint64_t chunk = std::max<std::uint64_t>(1, sampler.chunk_size);
  const std::uint64_t chunks = (sampler.sample_count + chunk - 1) / chunk;
  const int n = domain.dimension;
  std::vector<CounterStream> streams;
  for (const auto& b : domain.blocks) streams.emplace_back(sampler.seed, b.label, b.offset);

  std::vector<std::vector<Moments>> per_chunk(chunks, std::vector<Moments>(outputs));
  detail::for_each_chunk(chunks, sampler.workers, [&](std::uint64_t c) {
    const std::uint64_t begin = c * chunk;
    const std::uint64_t end = std::min(sampler.sample_count, begin + chunk);
    const std::size_t len = end - begin;
    std::vector<double> values(outputs * len);
    std::vector<double> point(domain.total_dimension()), out(outputs);
    for (std::uint64_t i = begin; i < end; ++i) {
      for (std::size_t b = 0; b < streams.size(); ++b) {
        streams[b].normal_vector(i, std::span<double>(point.data() + b * n, n));
      }
      kernel(point, out);
      for (std::size_t o = 0; o < outputs; ++o) {
        if (!std::isfinite(out[o])) detail::report_non_finite(point, o);
        values[o * len + (i - begin)] = out[o];
      }
    }
    for (std::size_t o = 0; o < outputs; ++o) {
      per_chunk[c][o] = Moments::of(std::span<const double>(values.data() + o * len, len));
    }
  });

  std::vector<Moments> result(outputs);
  std::vector<Moments> column(chunks);
  for (std::size_t o = 0; o < outputs; ++o) {
    for (std::uint64_t c = 0; c < chunks; ++c) column[c] = per_chunk[c][o];
    result[o] = Moments::merge_all(column);
  }
  return result;
}

// E[kernel(Y)] for each output, Y distributed on `domain`.
inline std::vector<Estimate> expect_many(const GaussianDomain& domain, std::size_t outputs,
                                         const VectorKernel& kernel,
                                         const ExpectationMethod& method) {
  std::vector<Estimate> est(outputs);
  const std::string tag = describe(method);
  const int dims = domain.total_dimension();
  if (const auto* q = std::get_if<QuadratureMethod>(&method)) {
    std::vector<double> hi, hi_abs, lo, lo_abs;
    detail::tensor_quadrature(gauss_hermite_rule(q->order), dims, outputs, kernel, hi, hi_abs);
    std::uint64_t evals = detail::grid_size(q->order, dims);
    if (q->order > 1) {
      detail::tensor_quadrature(gauss_hermite_rule(q->order - 1), dims, outputs, kernel, lo,
                                lo_abs);
      evals += detail::grid_size(q->order - 1, dims);
    }
    for (std::size_t o = 0; o < outputs; ++o) {
      est[o].value = hi[o];
      const double delta = q->order > 1 ? std::fabs(hi[o] - lo[o]) : 0.0;
      est[o].uncertainty = delta + kQuadratureRoundingFactor * hi_abs[o];
      est[o].method = tag;
      est[o].evaluations = evals;
    }
    return est;
  }
  const auto& sampler = std::get<MonteCarloMethod>(method).sampler;
  const std::vector<Moments> moments = monte_carlo_moments(sampler, domain, outputs, kernel);
  for (std::size_t o = 0; o < outputs; ++o) {
    est[o].value = moments[o].mean;
    est[o].uncertainty = moments[o].standard_error();
    est[o].method = tag;
    est[o].evaluations = sampler.sample_count;
  }
  return est;
}

inline Estimate expect(const std::function<double(std::span<const double>)>& h, int dimension,
                       const ExpectationMethod& method, StreamId stream = {}) {
  GaussianDomain domain{dimension, {stream}};
  return expect_many(domain, 1,
                     [&](std::span<const double> y, std::span<double> out) { out[0] = h(y); },
                     method)[0];
}

struct MeanVariance {
  Estimate mean;
  Estimate variance;
};

// E[h(Y)] and Var(h(Y)). Quadrature: E[h^2] - E[h]^2. Monte Carlo: the
// unbiased sample variance and its large-sample standard error.
inline MeanVariance mean_and_variance(const std::function<double(std::span<const double>)>& h,
                                      int dimension, const ExpectationMethod& method,
                                      StreamId stream = {}) {
  const GaussianDomain domain{dimension, {stream}};
  MeanVariance mv;
  if (std::holds_alternative<QuadratureMethod>(method)) {
    const auto est = expect_many(
        domain, 2,
        [&](std::span<const double> y, std::span<double> out) {
          const double v = h(y);
          out[0] = v;
          out[1] = v * v;
        },
        method);
    mv.mean = est[0];
    mv.variance = est[1];
    mv.variance.value = std::max(est[1].value - est[0].value * est[0].value, 0.0);
    mv.variance.uncertainty = est[1].uncertainty + 2.0 * std::fabs(est[0].value) * est[0].uncertainty;
    return mv;
  }
  const auto& sampler = std::get<MonteCarloMethod>(method).sampler;
  const Moments m = monte_carlo_moments(
      sampler, domain, 1, [&](std::span<const double> y, std::span<double> out) { out[0] = h(y); })[0];
  const std::string tag = describe(method);
  mv.mean = {m.mean, m.standard_error(), tag, sampler.sample_count};
  mv.variance = {m.sample_variance(), m.variance_standard_error(), tag, sampler.sample_count};
  return mv;
}

// ---- estimator configuration ----------------------------------------------

enum class Strategy { Auto, Quadrature, MonteCarlo };

struct EstimatorConfig {
  SamplerConfig sampler;
  int quadrature_order = 20;
  int u_order = 32;  // Gauss-Legendre order of the interpolation integrals
  Strategy strategy = Strategy::Auto;
  int quadrature_max_dimension = 3;
  std::uint64_t evaluation_budget = 10'000'000;
  // Outer-sample count of the Monte Carlo path of nested (T-bar) estimators.
  std::uint64_t nested_samples = 4096;
};

// Picks quadrature or Monte Carlo for an expectation over `domain_dims`
// Gaussian coordinates whose base problem has dimension `base_dimension`;
// `cost_per_point` counts model evaluations per integrand call.
inline ExpectationMethod resolve_method(const EstimatorConfig& config, int base_dimension,
                                        int domain_dims, double cost_per_point = 1.0) {
  switch (config.strategy) {
    case Strategy::Quadrature: return QuadratureMethod{config.quadrature_order};
    case Strategy::MonteCarlo: return MonteCarloMethod{config.sampler};
    case Strategy::Auto: break;
  }
  if (base_dimension <= config.quadrature_max_dimension) {
    const int m = config.quadrature_order;
    const double points = std::pow(double(m), domain_dims) + std::pow(double(m - 1), domain_dims);
    if (points * cost_per_point <= static_cast<double>(config.evaluation_budget)) {
      return QuadratureMethod{m};
    }
  }
  return MonteCarloMethod{config.sampler};
}

// ---- Stein's identity -----------------------------------------------------

// Returns {h(z), h'(z)}.
using SteinFunction = std::function<std::array<double, 2>(double)>;

// Estimate of E[Z h(Z)] - E[h'(Z)], which vanishes for smooth h of moderate
// growth.
inline Estimate stein_residual(const SteinFunction& h, const ExpectationMethod& method,
                               StreamId stream = {}) {
  return expect(
      [&](std::span<const double> z) {
        const auto [value, slope] = h(z[0]);
        return z[0] * value - slope;
      },
      1, method, stream);
}

inline Estimate stein_residual(const FunctionModel& h, const ExpectationMethod& method,
                               StreamId stream = {}) {
  if (h.dimension() != 1) throw Error("Stein residual needs a one-dimensional function");
  return stein_residual(
      [&](double z) {
        Grad<1> g;
        const double v = h.value_gradient<1>(std::span<const double>(&z, 1), g);
        return std::array<double, 2>{v, g[0]};
      },
      method, stream);
}

}  // namespace gconc
