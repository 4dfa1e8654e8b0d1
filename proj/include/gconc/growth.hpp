#pragma once

// Abstract interpretation of expressions into conservative growth bounds.
//
// A GrowthBound for an expression e over y in R^n is one of
//   Poly:    |e(y)| <= sum_m c_m prod_i |y_i|^{beta_mi}
//   ExpPoly: |e(y)| <= K exp(sum_m c_m prod_i |y_i|^{beta_mi})
//   Unknown: no bound established,
// together with an interval enclosing the range of e. A finite range
// collapses to a constant Poly bound. Running the ordinary evaluator over
// Dual<GrowthBound, N> bounds the derivatives as well.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "gconc/autodiff.hpp"
#include "gconc/dual.hpp"
#include "gconc/expr.hpp"

namespace gconc {

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool finite() const { return std::isfinite(lo) && std::isfinite(hi); }
  bool contains_zero() const { return lo <= 0.0 && hi >= 0.0; }
  double magnitude() const { return std::max(std::fabs(lo), std::fabs(hi)); }
};

namespace detail {

// Product with the interval-arithmetic convention 0 * inf = 0.
inline double bound_mul(double a, double b) {
  if (a == 0.0 || b == 0.0) return 0.0;
  return a * b;
}

inline Interval interval_mul(Interval a, Interval b) {
  const double p[] = {bound_mul(a.lo, b.lo), bound_mul(a.lo, b.hi), bound_mul(a.hi, b.lo),
                      bound_mul(a.hi, b.hi)};
  return {*std::min_element(p, p + 4), *std::max_element(p, p + 4)};
}

inline Interval interval_square(Interval a) {
  const double lo2 = bound_mul(a.lo, a.lo), hi2 = bound_mul(a.hi, a.hi);
  if (a.contains_zero()) return {0.0, std::max(lo2, hi2)};
  return {std::min(lo2, hi2), std::max(lo2, hi2)};
}

inline Interval interval_reciprocal(Interval a) {
  // Caller guarantees 0 is not in the interval.
  return {1.0 / a.hi, 1.0 / a.lo};
}

template <typename F>
Interval monotone(Interval a, F f) {
  return {f(a.lo), f(a.hi)};
}

}  // namespace detail

using Exponents = std::array<double, kMaxDimension>;

class GrowthBound {
 public:
  enum class Kind { Poly, ExpPoly, Unknown };
  using Polynomial = std::map<Exponents, double>;

  static constexpr std::size_t kMaxTerms = 512;

  GrowthBound() : GrowthBound(constant(0.0)) {}

  static GrowthBound constant(double c) {
    GrowthBound g(Kind::Poly);
    g.range_ = {c, c};
    g.poly_[Exponents{}] = std::fabs(c);
    return g;
  }

  static GrowthBound variable(int index) {
    GrowthBound g(Kind::Poly);
    Exponents e{};
    e[index] = 1.0;
    g.poly_[e] = 1.0;
    return g;
  }

  static GrowthBound unknown(Interval range = {}) {
    GrowthBound g(Kind::Unknown);
    g.range_ = range;
    return g.normalized();
  }

  Kind kind() const { return kind_; }
  const Interval& range() const { return range_; }
  const Polynomial& polynomial() const { return poly_; }
  double factor() const { return factor_; }

  // Largest total degree sum_i beta_i among the monomials of the
  // (exponent) polynomial.
  double max_total_degree() const {
    double d = 0.0;
    for (const auto& [e, c] : poly_) {
      if (c == 0.0) continue;
      double s = 0.0;
      for (double b : e) s += b;
      d = std::max(d, s);
    }
    return d;
  }

  // Growth at most exp(c |y|): polynomial, or exponential of a polynomial
  // of total degree <= 1.
  bool subexponential() const {
    if (kind_ == Kind::Poly) return true;
    if (kind_ == Kind::ExpPoly) return max_total_degree() <= 1.0 + 1e-12;
    return false;
  }

  std::string describe() const {
    std::ostringstream os;
    switch (kind_) {
      case Kind::Poly:
        if (range_.finite()) {
          os << "bounded in [" << range_.lo << ", " << range_.hi << "]";
        } else {
          os << "polynomial growth of total degree " << max_total_degree();
        }
        break;
      case Kind::ExpPoly:
        os << "exponential growth with exponent of total degree " << max_total_degree();
        break;
      case Kind::Unknown: os << "growth not established"; break;
    }
    return os.str();
  }

  // ---- arithmetic ---------------------------------------------------------

  friend GrowthBound operator+(const GrowthBound& a, const GrowthBound& b) {
    return combine_additive(a, b, {a.range_.lo + b.range_.lo, a.range_.hi + b.range_.hi});
  }
  friend GrowthBound operator-(const GrowthBound& a, const GrowthBound& b) {
    return combine_additive(a, b, {a.range_.lo - b.range_.hi, a.range_.hi - b.range_.lo});
  }
  friend GrowthBound operator-(const GrowthBound& a) {
    GrowthBound r = a;
    r.range_ = {-a.range_.hi, -a.range_.lo};
    return r;
  }
  friend GrowthBound operator*(const GrowthBound& a, const GrowthBound& b) {
    return combine_multiplicative(a, b, detail::interval_mul(a.range_, b.range_));
  }
  friend GrowthBound operator/(const GrowthBound& a, const GrowthBound& b) {
    if (b.range_.contains_zero() || a.kind_ == Kind::Unknown) return unknown();
    const Interval inv = detail::interval_reciprocal(b.range_);
    GrowthBound r = a.scaled(inv.magnitude());
    r.range_ = detail::interval_mul(a.range_, inv);
    return r.normalized();
  }

  friend GrowthBound operator+(const GrowthBound& a, double b) { return a + constant(b); }
  friend GrowthBound operator+(double a, const GrowthBound& b) { return constant(a) + b; }
  friend GrowthBound operator-(const GrowthBound& a, double b) { return a - constant(b); }
  friend GrowthBound operator-(double a, const GrowthBound& b) { return constant(a) - b; }
  friend GrowthBound operator*(const GrowthBound& a, double b) { return a * constant(b); }
  friend GrowthBound operator*(double a, const GrowthBound& b) { return constant(a) * b; }
  friend GrowthBound operator/(const GrowthBound& a, double b) { return a / constant(b); }
  friend GrowthBound operator/(double a, const GrowthBound& b) { return constant(a) / b; }

  // ---- primitives ---------------------------------------------------------

  friend GrowthBound sq(const GrowthBound& a) {
    GrowthBound r = a * a;
    r.range_ = detail::interval_square(a.range_);
    return r.normalized();
  }

  friend GrowthBound exp(const GrowthBound& a) {
    const Interval range = detail::monotone(a.range_, [](double x) { return std::exp(x); });
    if (std::isfinite(a.range_.hi)) return bounded(range);
    if (a.kind_ != Kind::Poly) return unknown(range);
    GrowthBound r(Kind::ExpPoly);
    r.poly_ = a.poly_;
    r.factor_ = 1.0;
    r.range_ = range;
    return r.normalized();
  }

  friend GrowthBound log(const GrowthBound& a) {
    if (!(a.range_.lo > 0.0)) return unknown();
    const Interval range = detail::monotone(a.range_, [](double x) { return std::log(x); });
    if (a.kind_ == Kind::Unknown) return unknown(range);
    // |log a| <= |log lo| + a for a >= lo, and log a <= log K + P for
    // a <= K exp(P).
    GrowthBound r(Kind::Poly);
    r.poly_ = a.poly_;
    double shift = std::fabs(std::log(a.range_.lo));
    if (a.kind_ == Kind::ExpPoly) shift += std::fabs(std::log(a.factor_));
    r.poly_[Exponents{}] += shift;
    r.range_ = range;
    return r.normalized();
  }

  friend GrowthBound sqrt(const GrowthBound& a) { return pow(a, 0.5); }

  friend GrowthBound pow(const GrowthBound& a, double p) {
    if (a.range_.lo < 0.0 || a.kind_ == Kind::Unknown) return unknown();
    if (p == 0.0) return constant(1.0);
    Interval range;
    if (p > 0.0) {
      range = detail::monotone(a.range_, [p](double x) { return std::pow(x, p); });
    } else {
      if (!(a.range_.lo > 0.0)) return unknown();
      range = {std::pow(a.range_.hi, p), std::pow(a.range_.lo, p)};
      return bounded(range);
    }
    GrowthBound r(a.kind_);
    if (a.kind_ == Kind::Poly) {
      // (sum_m t_m)^p <= M^{max(p-1,0)} sum_m t_m^p for M terms.
      const double spread =
          std::pow(static_cast<double>(a.poly_.size()), std::max(p - 1.0, 0.0));
      for (const auto& [e, c] : a.poly_) r.poly_[scale_exponents(e, p)] += spread * std::pow(c, p);
    } else {
      for (const auto& [e, c] : a.poly_) r.poly_[e] = c * p;
      r.factor_ = std::pow(a.factor_, p);
    }
    r.range_ = range;
    return r.normalized();
  }

  friend GrowthBound sin(const GrowthBound&) { return bounded({-1.0, 1.0}); }
  friend GrowthBound cos(const GrowthBound&) { return bounded({-1.0, 1.0}); }
  friend GrowthBound tanh(const GrowthBound& a) {
    return bounded(detail::monotone(a.range_, [](double x) { return std::tanh(x); }));
  }
  friend GrowthBound erf(const GrowthBound& a) {
    return bounded(detail::monotone(a.range_, [](double x) { return std::erf(x); }));
  }
  friend GrowthBound atan(const GrowthBound& a) {
    return bounded(detail::monotone(a.range_, [](double x) { return std::atan(x); }));
  }
  friend GrowthBound logistic(const GrowthBound& a) {
    return bounded(detail::monotone(a.range_, [](double x) { return gconc::logistic(x); }));
  }

 private:
  explicit GrowthBound(Kind kind) : kind_(kind) {}

  static GrowthBound bounded(Interval range) {
    GrowthBound g(Kind::Poly);
    g.range_ = range;
    return g.normalized();
  }

  static Exponents scale_exponents(const Exponents& e, double p) {
    Exponents r = e;
    for (double& b : r) b *= p;
    return r;
  }

  GrowthBound scaled(double s) const {
    GrowthBound r = *this;
    if (kind_ == Kind::Poly) {
      for (auto& [e, c] : r.poly_) c *= s;
    } else if (kind_ == Kind::ExpPoly) {
      r.factor_ *= s;
    }
    return r;
  }

  // Poly p <= exp(p) since p >= 0.
  GrowthBound as_exp() const {
    if (kind_ != Kind::Poly) return *this;
    GrowthBound r = *this;
    r.kind_ = Kind::ExpPoly;
    r.factor_ = 1.0;
    return r;
  }

  static GrowthBound combine_additive(const GrowthBound& a, const GrowthBound& b, Interval range) {
    if (a.kind_ == Kind::Unknown || b.kind_ == Kind::Unknown) return unknown(range);
    GrowthBound r(Kind::Poly);
    if (a.kind_ == Kind::Poly && b.kind_ == Kind::Poly) {
      r.poly_ = a.poly_;
      for (const auto& [e, c] : b.poly_) r.poly_[e] += c;
    } else {
      // K1 e^P1 + K2 e^P2 <= (K1 + K2) e^(P1 + P2).
      const GrowthBound ea = a.as_exp(), eb = b.as_exp();
      r.kind_ = Kind::ExpPoly;
      r.factor_ = ea.factor_ + eb.factor_;
      r.poly_ = ea.poly_;
      for (const auto& [e, c] : eb.poly_) r.poly_[e] += c;
    }
    r.range_ = range;
    return r.normalized();
  }

  static GrowthBound combine_multiplicative(const GrowthBound& a, const GrowthBound& b,
                                            Interval range) {
    if (a.kind_ == Kind::Unknown || b.kind_ == Kind::Unknown) return unknown(range);
    GrowthBound r(Kind::Poly);
    if (a.kind_ == Kind::Poly && b.kind_ == Kind::Poly) {
      for (const auto& [ea, ca] : a.poly_) {
        for (const auto& [eb, cb] : b.poly_) {
          Exponents e;
          for (int i = 0; i < kMaxDimension; ++i) e[i] = ea[i] + eb[i];
          r.poly_[e] += ca * cb;
        }
      }
    } else {
      const GrowthBound ea = a.as_exp(), eb = b.as_exp();
      r.kind_ = Kind::ExpPoly;
      r.factor_ = ea.factor_ * eb.factor_;
      r.poly_ = ea.poly_;
      for (const auto& [e, c] : eb.poly_) r.poly_[e] += c;
    }
    r.range_ = range;
    return r.normalized();
  }

  GrowthBound normalized() && { return static_cast<const GrowthBound&>(*this).normalized(); }
  GrowthBound normalized() const& {
    GrowthBound r = *this;
    if (r.range_.finite()) {
      r.kind_ = Kind::Poly;
      r.factor_ = 1.0;
      r.poly_.clear();
      r.poly_[Exponents{}] = r.range_.magnitude();
      return r;
    }
    if (r.kind_ == Kind::Unknown) {
      r.poly_.clear();
      return r;
    }
    if (r.poly_.size() > kMaxTerms || !std::isfinite(r.factor_)) {
      r.kind_ = Kind::Unknown;
      r.poly_.clear();
      return r;
    }
    for (const auto& [e, c] : r.poly_) {
      if (!std::isfinite(c)) {
        r.kind_ = Kind::Unknown;
        r.poly_.clear();
        return r;
      }
    }
    return r;
  }

  Kind kind_;
  Interval range_{};
  Polynomial poly_;
  double factor_ = 1.0;
};

struct GrowthAnalysis {
  GrowthBound value;
  std::vector<GrowthBound> gradient;
  std::vector<GrowthBound> hessian;  // row-major n x n
};

// Growth bounds of f and of its first and second partial derivatives.
inline GrowthAnalysis analyze_growth(const ExpressionTree& tree) {
  const int n = tree.dimension();
  return dispatch_dimension(n, [&]<int N>() {
    using Inner = Dual<GrowthBound, N>;
    using D = Dual<Inner, N>;
    std::array<D, N> seeds;
    for (int i = 0; i < N; ++i) {
      seeds[i].v.v = GrowthBound::variable(i);
      seeds[i].v.d[i] = GrowthBound::constant(1.0);
      seeds[i].d[i].v = GrowthBound::constant(1.0);
    }
    const D r = evaluate_as<D>(tree, std::span<const D>(seeds));
    GrowthAnalysis a;
    a.value = r.v.v;
    for (int i = 0; i < N; ++i) {
      a.gradient.push_back(r.v.d[i]);
      for (int j = 0; j < N; ++j) a.hessian.push_back(r.d[i].d[j]);
    }
    return a;
  });
}

}  // namespace gconc
