#pragma once

// Gaussian quadrature rules from the three-term recurrence of the
// orthonormal polynomials (Golub-Welsch). Nodes are eigenvalues of the Jacobi
// matrix, polished by Newton steps on p_m; weights are Christoffel numbers
// 1 / sum_k p_k(x)^2, which keeps small tail weights relatively accurate.

#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "gconc/errors.hpp"

namespace gconc {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;  // sum to 1
  int order = 0;
};

namespace detail {

// Orthonormal recurrence x p_k = b_{k+1} p_{k+1} + b_k p_{k-1} for a
// symmetric measure (zero diagonal); b(k) returns b_k for k >= 1.
inline QuadratureRule symmetric_gauss_rule(int m, const std::function<double(int)>& b) {
  QuadratureRule rule;
  rule.order = m;
  if (m == 1) {
    rule.nodes = {0.0};
    rule.weights = {1.0};
    return rule;
  }
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd sub(m - 1);
  for (int k = 1; k < m; ++k) sub(k - 1) = b(k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error("tridiagonal eigensolver failed");

  // p_0..p_{m-1} at x, plus p_m and its derivative.
  std::vector<double> p(m + 1);
  auto evaluate = [&](double x, double& pm, double& dpm) {
    double prev = 0.0, cur = 1.0, dprev = 0.0, dcur = 0.0;
    p[0] = 1.0;
    for (int k = 0; k < m; ++k) {
      const double bk = k > 0 ? b(k) : 0.0;
      const double next = (x * cur - bk * prev) / b(k + 1);
      const double dnext = (cur + x * dcur - bk * dprev) / b(k + 1);
      prev = cur;
      dprev = dcur;
      cur = next;
      dcur = dnext;
      p[k + 1] = cur;
    }
    pm = cur;
    dpm = dcur;
  };

  rule.nodes.resize(m);
  rule.weights.resize(m);
  for (int i = 0; i < m; ++i) {
    double x = solver.eigenvalues()(i);
    for (int it = 0; it < 3; ++it) {
      double pm, dpm;
      evaluate(x, pm, dpm);
      if (dpm == 0.0) break;
      const double step = pm / dpm;
      x -= step;
      if (std::fabs(step) <= 1e-17 * (1.0 + std::fabs(x))) break;
    }
    double pm, dpm;
    evaluate(x, pm, dpm);
    double s = 0.0;
    for (int k = 0; k < m; ++k) s += p[k] * p[k];
    rule.nodes[i] = x;
    rule.weights[i] = 1.0 / s;
  }

  // Enforce exact symmetry about zero.
  for (int i = 0; i < m / 2; ++i) {
    const int j = m - 1 - i;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    rule.weights[i] = rule.weights[j] = w;
  }
  if (m % 2 == 1) rule.nodes[m / 2] = 0.0;

  double total = 0.0;
  for (double w : rule.weights) total += w;
  for (double& w : rule.weights) w /= total;
  return rule;
}

template <typename Build>
const QuadratureRule& cached_rule(const char* family, int order, Build build) {
  static std::mutex mutex;
  static std::map<std::pair<std::string, int>, QuadratureRule> cache;
  std::lock_guard lock(mutex);
  auto key = std::make_pair(std::string(family), order);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, build()).first;
  return it->second;
}

}  // namespace detail

inline constexpr int kMaxHermiteOrder = 64;
inline constexpr int kMaxLegendreOrder = 128;

// Probabilists' Gauss-Hermite rule: sum_i w_i h(x_i) ~ E[h(Z)], Z ~ N(0,1),
// exact for polynomials of degree <= 2*order - 1.
inline const QuadratureRule& gauss_hermite_rule(int order) {
  if (order < 1 || order > kMaxHermiteOrder) {
    throw Error("Gauss-Hermite order " + std::to_string(order) + " outside 1.." +
                std::to_string(kMaxHermiteOrder));
  }
  return detail::cached_rule("hermite", order, [order] {
    return detail::symmetric_gauss_rule(order, [](int k) { return std::sqrt(double(k)); });
  });
}

// Gauss-Legendre rule on [0, 1] with weights summing to 1.
inline const QuadratureRule& gauss_legendre_unit_rule(int order) {
  if (order < 1 || order > kMaxLegendreOrder) {
    throw Error("Gauss-Legendre order " + std::to_string(order) + " outside 1.." +
                std::to_string(kMaxLegendreOrder));
  }
  return detail::cached_rule("legendre01", order, [order] {
    QuadratureRule rule = detail::symmetric_gauss_rule(order, [](int k) {
      const double kk = k;
      return kk / std::sqrt(4.0 * kk * kk - 1.0);
    });
    for (double& x : rule.nodes) x = 0.5 * (x + 1.0);
    return rule;
  });
}

}  // namespace gconc
