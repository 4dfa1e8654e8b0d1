#pragma once

// Forward-mode dual numbers with a fixed number of tangent directions.
//
// Dual<double, N> carries a value and its gradient with respect to N seeds.
// Nesting, Dual<Dual<double, N>, N>, yields value, gradient and Hessian in a
// single sweep: r.v.v is the value, r.v.d[j] the gradient, r.d[i].d[j] the
// Hessian.

#include <array>
#include <cmath>
#include <numbers>
#include <type_traits>

namespace gconc {

// Numerically stable logistic function 1 / (1 + exp(-x)).
inline double logistic(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double sq(double x) { return x * x; }

template <typename T, int N>
struct Dual {
  static_assert(N >= 1);
  using value_type = T;
  static constexpr int size = N;

  T v{};
  std::array<T, N> d{};

  Dual() = default;
  explicit Dual(T value) : v(value) {}
  Dual(T value, const std::array<T, N>& tangent) : v(value), d(tangent) {}

  Dual& operator+=(const Dual& o) {
    v = v + o.v;
    for (int i = 0; i < N; ++i) d[i] = d[i] + o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v = v - o.v;
    for (int i = 0; i < N; ++i) d[i] = d[i] - o.d[i];
    return *this;
  }
};

template <typename T>
struct is_dual : std::false_type {};
template <typename T, int N>
struct is_dual<Dual<T, N>> : std::true_type {};
template <typename T>
inline constexpr bool is_dual_v = is_dual<T>::value;

// A scalar for which domain checks on the primal value make sense.
template <typename T>
struct is_numeric_scalar : std::is_same<T, double> {};
template <typename T, int N>
struct is_numeric_scalar<Dual<T, N>> : is_numeric_scalar<T> {};
template <typename T>
inline constexpr bool is_numeric_scalar_v = is_numeric_scalar<T>::value;

inline double primal(double x) { return x; }
template <typename T, int N>
double primal(const Dual<T, N>& x) {
  return primal(x.v);
}

// ---- arithmetic -----------------------------------------------------------

template <typename T, int N>
Dual<T, N> operator-(const Dual<T, N>& a) {
  Dual<T, N> r;
  r.v = -a.v;
  for (int i = 0; i < N; ++i) r.d[i] = -a.d[i];
  return r;
}

template <typename T, int N>
Dual<T, N> operator+(Dual<T, N> a, const Dual<T, N>& b) {
  a += b;
  return a;
}
template <typename T, int N>
Dual<T, N> operator-(Dual<T, N> a, const Dual<T, N>& b) {
  a -= b;
  return a;
}
template <typename T, int N>
Dual<T, N> operator+(Dual<T, N> a, double b) {
  a.v = a.v + b;
  return a;
}
template <typename T, int N>
Dual<T, N> operator+(double a, Dual<T, N> b) {
  b.v = a + b.v;
  return b;
}
template <typename T, int N>
Dual<T, N> operator-(Dual<T, N> a, double b) {
  a.v = a.v - b;
  return a;
}
template <typename T, int N>
Dual<T, N> operator-(double a, const Dual<T, N>& b) {
  Dual<T, N> r = -b;
  r.v = a + r.v;
  return r;
}

template <typename T, int N>
Dual<T, N> operator*(const Dual<T, N>& a, const Dual<T, N>& b) {
  Dual<T, N> r;
  r.v = a.v * b.v;
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
  return r;
}
template <typename T, int N>
Dual<T, N> operator*(Dual<T, N> a, double b) {
  a.v = a.v * b;
  for (int i = 0; i < N; ++i) a.d[i] = a.d[i] * b;
  return a;
}
template <typename T, int N>
Dual<T, N> operator*(double a, const Dual<T, N>& b) {
  return b * a;
}

template <typename T, int N>
Dual<T, N> operator/(const Dual<T, N>& a, const Dual<T, N>& b) {
  Dual<T, N> r;
  const T inv = 1.0 / b.v;
  r.v = a.v * inv;
  for (int i = 0; i < N; ++i) r.d[i] = (a.d[i] - r.v * b.d[i]) * inv;
  return r;
}
template <typename T, int N>
Dual<T, N> operator/(Dual<T, N> a, double b) {
  return a * (1.0 / b);
}
template <typename T, int N>
Dual<T, N> operator/(double a, const Dual<T, N>& b) {
  Dual<T, N> r;
  const T inv = 1.0 / b.v;
  r.v = a * inv;
  const T slope = -(r.v * inv);
  for (int i = 0; i < N; ++i) r.d[i] = slope * b.d[i];
  return r;
}

// ---- elementary functions -------------------------------------------------

namespace detail {
// Applies the chain rule given the already-computed outer value and slope.
template <typename T, int N>
Dual<T, N> chain(const Dual<T, N>& x, const T& value, const T& slope) {
  Dual<T, N> r;
  r.v = value;
  for (int i = 0; i < N; ++i) r.d[i] = slope * x.d[i];
  return r;
}
}  // namespace detail

template <typename T, int N>
Dual<T, N> sq(const Dual<T, N>& x) {
  Dual<T, N> r;
  r.v = sq(x.v);
  const T twice = 2.0 * x.v;
  for (int i = 0; i < N; ++i) r.d[i] = twice * x.d[i];
  return r;
}

template <typename T, int N>
Dual<T, N> exp(const Dual<T, N>& x) {
  using std::exp;
  const T e = exp(x.v);
  return detail::chain(x, e, e);
}

template <typename T, int N>
Dual<T, N> log(const Dual<T, N>& x) {
  using std::log;
  return detail::chain(x, T(log(x.v)), T(1.0 / x.v));
}

template <typename T, int N>
Dual<T, N> sqrt(const Dual<T, N>& x) {
  using std::sqrt;
  const T s = sqrt(x.v);
  return detail::chain(x, s, T(0.5 / s));
}

template <typename T, int N>
Dual<T, N> sin(const Dual<T, N>& x) {
  using std::cos;
  using std::sin;
  return detail::chain(x, T(sin(x.v)), T(cos(x.v)));
}

template <typename T, int N>
Dual<T, N> cos(const Dual<T, N>& x) {
  using std::cos;
  using std::sin;
  return detail::chain(x, T(cos(x.v)), T(-sin(x.v)));
}

template <typename T, int N>
Dual<T, N> tanh(const Dual<T, N>& x) {
  using std::tanh;
  const T t = tanh(x.v);
  return detail::chain(x, t, T(1.0 - sq(t)));
}

template <typename T, int N>
Dual<T, N> logistic(const Dual<T, N>& x) {
  const T s = logistic(x.v);
  return detail::chain(x, s, T(s * (1.0 - s)));
}

template <typename T, int N>
Dual<T, N> erf(const Dual<T, N>& x) {
  using std::erf;
  using std::exp;
  const double c = 2.0 / std::sqrt(std::numbers::pi);
  return detail::chain(x, T(erf(x.v)), T(c * exp(-sq(x.v))));
}

template <typename T, int N>
Dual<T, N> atan(const Dual<T, N>& x) {
  using std::atan;
  return detail::chain(x, T(atan(x.v)), T(1.0 / (1.0 + sq(x.v))));
}

// x^p for real p; the caller guarantees x > 0 (or x == 0 with p >= 1).
template <typename T, int N>
Dual<T, N> pow(const Dual<T, N>& x, double p) {
  using std::pow;
  return detail::chain(x, T(pow(x.v, p)), T(p * pow(x.v, p - 1.0)));
}

}  // namespace gconc
