#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gconc/dual.hpp"
#include "gconc/errors.hpp"
#include "gconc/expr.hpp"

namespace gconc {

inline constexpr int kMaxDimension = 8;

// Calls f.template operator()<N>() with N == n, for 1 <= n <= kMaxDimension.
template <typename F>
decltype(auto) dispatch_dimension(int n, F&& f) {
  switch (n) {
    case 1: return f.template operator()<1>();
    case 2: return f.template operator()<2>();
    case 3: return f.template operator()<3>();
    case 4: return f.template operator()<4>();
    case 5: return f.template operator()<5>();
    case 6: return f.template operator()<6>();
    case 7: return f.template operator()<7>();
    case 8: return f.template operator()<8>();
    default:
      throw Error("dimension " + std::to_string(n) + " outside 1.." +
                  std::to_string(kMaxDimension));
  }
}

// Dense row-major square matrix.
class Matrix {
 public:
  Matrix() = default;
  explicit Matrix(int n) : n_(n), data_(static_cast<std::size_t>(n) * n, 0.0) {}

  int size() const noexcept { return n_; }
  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * n_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * n_ + j]; }

 private:
  int n_ = 0;
  std::vector<double> data_;
};

template <int N>
using Grad = std::array<double, N>;
template <int N>
using Hess = std::array<std::array<double, N>, N>;

// f together with its exact first and second derivatives, computed by
// forward-mode differentiation over nested duals.
class FunctionModel {
 public:
  explicit FunctionModel(ExpressionTree tree) : tree_(std::move(tree)) {
    if (tree_.dimension() > kMaxDimension) {
      throw Error("dimension " + std::to_string(tree_.dimension()) + " exceeds " +
                  std::to_string(kMaxDimension));
    }
  }

  int dimension() const noexcept { return tree_.dimension(); }
  const ExpressionTree& tree() const noexcept { return tree_; }

  double value(std::span<const double> y) const { return evaluate(tree_, y); }

  // Returns f(y) and writes the gradient into g.
  template <int N>
  double value_gradient(std::span<const double> y, Grad<N>& g) const {
    using D = Dual<double, N>;
    std::array<D, N> seeds;
    for (int i = 0; i < N; ++i) {
      seeds[i].v = y[i];
      seeds[i].d[i] = 1.0;
    }
    const D r = evaluate_as<D>(tree_, std::span<const D>(seeds));
    for (int i = 0; i < N; ++i) {
      g[i] = r.d[i];
      if (!std::isfinite(g[i])) throw DomainError("non-finite derivative", tree_.to_string());
    }
    return r.v;
  }

  // Returns f(y) and writes gradient and Hessian.
  template <int N>
  double value_gradient_hessian(std::span<const double> y, Grad<N>& g, Hess<N>& h) const {
    using Inner = Dual<double, N>;
    using D = Dual<Inner, N>;
    std::array<D, N> seeds;
    for (int i = 0; i < N; ++i) {
      seeds[i].v.v = y[i];
      seeds[i].v.d[i] = 1.0;
      seeds[i].d[i].v = 1.0;
    }
    const D r = evaluate_as<D>(tree_, std::span<const D>(seeds));
    for (int i = 0; i < N; ++i) {
      g[i] = r.v.d[i];
      if (!std::isfinite(g[i])) throw DomainError("non-finite derivative", tree_.to_string());
      for (int j = 0; j < N; ++j) {
        h[i][j] = r.d[i].d[j];
        if (!std::isfinite(h[i][j])) {
          throw DomainError("non-finite second derivative", tree_.to_string());
        }
      }
    }
    return r.v.v;
  }

  std::vector<double> gradient(std::span<const double> y) const {
    check_length(y);
    return dispatch_dimension(dimension(), [&]<int N>() {
      Grad<N> g;
      value_gradient<N>(y, g);
      return std::vector<double>(g.begin(), g.end());
    });
  }

  Matrix hessian(std::span<const double> y) const {
    check_length(y);
    return dispatch_dimension(dimension(), [&]<int N>() {
      Grad<N> g;
      Hess<N> h;
      value_gradient_hessian<N>(y, g, h);
      Matrix m(N);
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) m(i, j) = h[i][j];
      return m;
    });
  }

 private:
  void check_length(std::span<const double> y) const {
    if (y.size() != static_cast<std::size_t>(dimension())) {
      throw Error("point has length " + std::to_string(y.size()) + ", expected " +
                  std::to_string(dimension()));
    }
  }

  ExpressionTree tree_;
};

inline FunctionModel make_model(std::string_view text, int dimension) {
  return FunctionModel(parse_expression(text, dimension));
}

struct FiniteDifferenceReport {
  double gradient_max_abs_deviation = 0.0;
  double hessian_max_abs_deviation = 0.0;
  double gradient_max_rel_deviation = 0.0;
  double hessian_max_rel_deviation = 0.0;
  bool flagged = false;  // some relative deviation exceeds kRelativeThreshold

  static constexpr double kRelativeThreshold = 1e-4;
};

inline constexpr double kDefaultFiniteDifferenceStep = 1e-5;

// Compares autodiff derivatives with central differences: the gradient
// against differences of f, the Hessian against differences of the autodiff
// gradient. Relative deviations use the scale 1 + |reference|.
inline FiniteDifferenceReport finite_difference_check(const FunctionModel& model,
                                                      std::span<const double> point,
                                                      double step = kDefaultFiniteDifferenceStep) {
  if (!(step > 0.0)) throw Error("finite-difference step must be positive");
  const int n = model.dimension();
  const std::vector<double> g = model.gradient(point);
  const Matrix h = model.hessian(point);

  FiniteDifferenceReport report;
  auto record = [](double ad, double fd, double& abs_dev, double& rel_dev) {
    const double dev = std::fabs(ad - fd);
    abs_dev = std::max(abs_dev, dev);
    rel_dev = std::max(rel_dev, dev / (1.0 + std::fabs(fd)));
  };

  std::vector<double> shifted(point.begin(), point.end());
  for (int i = 0; i < n; ++i) {
    shifted[i] = point[i] + step;
    const double f_plus = model.value(shifted);
    const std::vector<double> g_plus = model.gradient(shifted);
    shifted[i] = point[i] - step;
    const double f_minus = model.value(shifted);
    const std::vector<double> g_minus = model.gradient(shifted);
    shifted[i] = point[i];

    record(g[i], (f_plus - f_minus) / (2.0 * step), report.gradient_max_abs_deviation,
           report.gradient_max_rel_deviation);
    for (int j = 0; j < n; ++j) {
      record(h(i, j), (g_plus[j] - g_minus[j]) / (2.0 * step), report.hessian_max_abs_deviation,
             report.hessian_max_rel_deviation);
    }
  }
  report.flagged = report.gradient_max_rel_deviation > FiniteDifferenceReport::kRelativeThreshold ||
                   report.hessian_max_rel_deviation > FiniteDifferenceReport::kRelativeThreshold;
  return report;
}

}  // namespace gconc
