#pragma once

// Forward-mode differentiable scalar with a fixed tangent capacity.
//
// Dual<N> carries a value and N tangent components. A session selects P <= N
// active parameters; components P..N-1 stay zero. Every other module is
// templated on the scalar type, so the same code runs on plain double (fast
// rendering) and on Dual<N> (gradients).

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <type_traits>

#include "rwsim/core/error.hpp"

namespace rwsim {

template <std::size_t N>
struct Dual {
  static constexpr std::size_t capacity = N;

  double value = 0.0;
  std::array<double, N> tangent{};

  constexpr Dual() = default;
  constexpr Dual(double v) : value(v) {}  // NOLINT: constants promote implicitly
  constexpr Dual(double v, const std::array<double, N>& t) : value(v), tangent(t) {}

  constexpr double d(std::size_t k) const { return k < N ? tangent[k] : 0.0; }

  Dual& operator+=(const Dual& b) {
    value += b.value;
    for (std::size_t k = 0; k < N; ++k) tangent[k] += b.tangent[k];
    return *this;
  }
  Dual& operator-=(const Dual& b) {
    value -= b.value;
    for (std::size_t k = 0; k < N; ++k) tangent[k] -= b.tangent[k];
    return *this;
  }
  Dual& operator*=(const Dual& b) {
    for (std::size_t k = 0; k < N; ++k) tangent[k] = tangent[k] * b.value + value * b.tangent[k];
    value *= b.value;
    return *this;
  }
  Dual& operator/=(const Dual& b);
  Dual& operator+=(double b) {
    value += b;
    return *this;
  }
  Dual& operator-=(double b) {
    value -= b;
    return *this;
  }
  Dual& operator*=(double b) {
    value *= b;
    for (auto& t : tangent) t *= b;
    return *this;
  }
  Dual& operator/=(double b) {
    if (b == 0.0) throw NumericDomainError("division");
    value /= b;
    for (auto& t : tangent) t /= b;
    return *this;
  }
};

template <class T>
struct is_dual : std::false_type {};
template <std::size_t N>
struct is_dual<Dual<N>> : std::true_type {};
template <class T>
inline constexpr bool is_dual_v = is_dual<T>::value;

template <class T>
concept Scalar = std::is_same_v<T, double> || is_dual_v<T>;

constexpr double value_of(double x) { return x; }
template <std::size_t N>
constexpr double value_of(const Dual<N>& x) {
  return x.value;
}

// Tangent width of a scalar type (0 for double).
template <class T>
inline constexpr std::size_t tangent_width_v = 0;
template <std::size_t N>
inline constexpr std::size_t tangent_width_v<Dual<N>> = N;

template <class T>
constexpr double tangent_of(const T& x, std::size_t k) {
  if constexpr (is_dual_v<T>) {
    return x.d(k);
  } else {
    (void)x;
    (void)k;
    return 0.0;
  }
}

// Drops the tangent: the result is a constant of the same type.
template <class T>
constexpr T detach(const T& x) {
  return T(value_of(x));
}

// Seeds a parameter. `width` is the session's active parameter count P.
template <class T>
T lift(double value, std::optional<std::size_t> parameter_index, std::size_t width) {
  T out(value);
  if (!parameter_index) return out;
  if (*parameter_index >= width || *parameter_index >= tangent_width_v<T>) {
    throw ConfigError("parameter index " + std::to_string(*parameter_index) +
                      " out of range for tangent width " + std::to_string(width));
  }
  if constexpr (is_dual_v<T>) out.tangent[*parameter_index] = 1.0;
  return out;
}

namespace detail {
// Result of applying f with derivative df at a.value: chain rule.
template <std::size_t N>
constexpr Dual<N> chain(const Dual<N>& a, double f, double df) {
  Dual<N> out(f);
  for (std::size_t k = 0; k < N; ++k) out.tangent[k] = df * a.tangent[k];
  return out;
}
}  // namespace detail

template <std::size_t N>
constexpr Dual<N> operator-(const Dual<N>& a) {
  return detail::chain(a, -a.value, -1.0);
}

template <std::size_t N>
constexpr Dual<N> operator+(Dual<N> a, const Dual<N>& b) {
  return a += b;
}
template <std::size_t N>
constexpr Dual<N> operator-(Dual<N> a, const Dual<N>& b) {
  return a -= b;
}
template <std::size_t N>
constexpr Dual<N> operator*(Dual<N> a, const Dual<N>& b) {
  return a *= b;
}
template <std::size_t N>
Dual<N> operator/(Dual<N> a, const Dual<N>& b) {
  return a /= b;
}

template <std::size_t N>
Dual<N>& Dual<N>::operator/=(const Dual<N>& b) {
  if (b.value == 0.0) throw NumericDomainError("division");
  // Exact division keeps the value part identical to plain double arithmetic.
  const double q = value / b.value;
  for (std::size_t k = 0; k < N; ++k) tangent[k] = (tangent[k] - q * b.tangent[k]) / b.value;
  value = q;
  return *this;
}

template <std::size_t N>
constexpr Dual<N> operator+(Dual<N> a, double b) {
  return a += b;
}
template <std::size_t N>
constexpr Dual<N> operator+(double a, Dual<N> b) {
  return b += a;
}
template <std::size_t N>
constexpr Dual<N> operator-(Dual<N> a, double b) {
  return a -= b;
}
template <std::size_t N>
constexpr Dual<N> operator-(double a, const Dual<N>& b) {
  return detail::chain(b, a - b.value, -1.0);
}
template <std::size_t N>
constexpr Dual<N> operator*(Dual<N> a, double b) {
  return a *= b;
}
template <std::size_t N>
constexpr Dual<N> operator*(double a, Dual<N> b) {
  return b *= a;
}
template <std::size_t N>
Dual<N> operator/(Dual<N> a, double b) {
  return a /= b;
}
template <std::size_t N>
Dual<N> operator/(double a, const Dual<N>& b) {
  if (b.value == 0.0) throw NumericDomainError("division");
  const double q = a / b.value;
  return detail::chain(b, q, -q / b.value);
}

// Comparisons look at values only.
template <std::size_t N>
constexpr bool operator==(const Dual<N>& a, const Dual<N>& b) {
  return a.value == b.value;
}
template <std::size_t N>
constexpr auto operator<=>(const Dual<N>& a, const Dual<N>& b) {
  return a.value <=> b.value;
}
template <std::size_t N>
constexpr bool operator==(const Dual<N>& a, double b) {
  return a.value == b;
}
template <std::size_t N>
constexpr auto operator<=>(const Dual<N>& a, double b) {
  return a.value <=> b;
}

template <std::size_t N>
Dual<N> sqrt(const Dual<N>& a) {
  if (a.value < 0.0) throw NumericDomainError("sqrt");
  const double s = std::sqrt(a.value);
  if (s == 0.0) {
    for (double t : a.tangent) {
      if (t != 0.0) throw NumericDomainError("sqrt (derivative at 0)");
    }
    return Dual<N>(0.0);
  }
  return detail::chain(a, s, 0.5 / s);
}

template <std::size_t N>
Dual<N> sin(const Dual<N>& a) {
  return detail::chain(a, std::sin(a.value), std::cos(a.value));
}
template <std::size_t N>
Dual<N> cos(const Dual<N>& a) {
  return detail::chain(a, std::cos(a.value), -std::sin(a.value));
}
template <std::size_t N>
Dual<N> tan(const Dual<N>& a) {
  const double t = std::tan(a.value);
  return detail::chain(a, t, 1.0 + t * t);
}
template <std::size_t N>
Dual<N> exp(const Dual<N>& a) {
  const double e = std::exp(a.value);
  return detail::chain(a, e, e);
}
template <std::size_t N>
Dual<N> log(const Dual<N>& a) {
  if (a.value <= 0.0) throw NumericDomainError("log");
  return detail::chain(a, std::log(a.value), 1.0 / a.value);
}
template <std::size_t N>
Dual<N> abs(const Dual<N>& a) {
  return a.value < 0.0 ? -a : a;
}
template <std::size_t N>
Dual<N> atan(const Dual<N>& a) {
  return detail::chain(a, std::atan(a.value), 1.0 / (1.0 + a.value * a.value));
}
template <std::size_t N>
Dual<N> asin(const Dual<N>& a) {
  if (a.value <= -1.0 || a.value >= 1.0) throw NumericDomainError("asin");
  return detail::chain(a, std::asin(a.value), 1.0 / std::sqrt(1.0 - a.value * a.value));
}
template <std::size_t N>
Dual<N> acos(const Dual<N>& a) {
  if (a.value <= -1.0 || a.value >= 1.0) throw NumericDomainError("acos");
  return detail::chain(a, std::acos(a.value), -1.0 / std::sqrt(1.0 - a.value * a.value));
}
template <std::size_t N>
Dual<N> atan2(const Dual<N>& y, const Dual<N>& x) {
  const double r2 = x.value * x.value + y.value * y.value;
  if (r2 == 0.0) throw NumericDomainError("atan2");
  Dual<N> out(std::atan2(y.value, x.value));
  for (std::size_t k = 0; k < N; ++k) {
    out.tangent[k] = (x.value * y.tangent[k] - y.value * x.tangent[k]) / r2;
  }
  return out;
}
template <std::size_t N>
Dual<N> pow(const Dual<N>& a, double p) {
  if (a.value < 0.0 && p != std::floor(p)) throw NumericDomainError("pow");
  if (a.value == 0.0 && p < 1.0) throw NumericDomainError("pow");
  const double v = std::pow(a.value, p);
  return detail::chain(a, v, p * std::pow(a.value, p - 1.0));
}
template <std::size_t N>
Dual<N> pow(const Dual<N>& a, const Dual<N>& b) {
  if (a.value <= 0.0) throw NumericDomainError("pow");
  return exp(b * log(a));
}

template <std::size_t N>
bool isfinite(const Dual<N>& a) {
  if (!std::isfinite(a.value)) return false;
  for (double t : a.tangent) {
    if (!std::isfinite(t)) return false;
  }
  return true;
}

template <std::size_t N>
std::ostream& operator<<(std::ostream& os, const Dual<N>& a) {
  os << a.value << " [";
  for (std::size_t k = 0; k < N; ++k) os << (k ? ", " : "") << a.tangent[k];
  return os << "]";
}

// Tangent capacities the runtime dispatch instantiates.
inline constexpr std::size_t kMaxParameters = 128;

// Calls fn.template operator()<N>() with the smallest capacity N >= width.
template <class Fn>
decltype(auto) dispatch_tangent_width(std::size_t width, Fn&& fn) {
  if (width <= 4) return fn.template operator()<4>();
  if (width <= 8) return fn.template operator()<8>();
  if (width <= 16) return fn.template operator()<16>();
  if (width <= 32) return fn.template operator()<32>();
  if (width <= 64) return fn.template operator()<64>();
  if (width <= kMaxParameters) return fn.template operator()<kMaxParameters>();
  throw ConfigError("at most " + std::to_string(kMaxParameters) +
                    " optimizable parameters are supported, got " + std::to_string(width));
}

}  // namespace rwsim
