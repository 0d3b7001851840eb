#pragma once

#include <cmath>
#include <type_traits>

#include "rwsim/core/dual.hpp"

namespace rwsim {

// Complex number over any scalar (std::complex is unspecified for non-float T).
template <class T>
struct Complex {
  T re{};
  T im{};

  constexpr Complex() = default;
  constexpr Complex(T r, T i = T(0.0)) : re(std::move(r)), im(std::move(i)) {}

  Complex& operator+=(const Complex& b) {
    re += b.re;
    im += b.im;
    return *this;
  }
  Complex& operator-=(const Complex& b) {
    re -= b.re;
    im -= b.im;
    return *this;
  }
  Complex& operator*=(const Complex& b) {
    T r = re * b.re - im * b.im;
    im = re * b.im + im * b.re;
    re = std::move(r);
    return *this;
  }
  Complex& operator*=(const T& s) {
    re *= s;
    im *= s;
    return *this;
  }
};

template <class T>
Complex<T> operator+(Complex<T> a, const Complex<T>& b) {
  return a += b;
}
template <class T>
Complex<T> operator-(Complex<T> a, const Complex<T>& b) {
  return a -= b;
}
template <class T>
Complex<T> operator*(Complex<T> a, const Complex<T>& b) {
  return a *= b;
}
template <class T>
Complex<T> operator*(Complex<T> a, const std::type_identity_t<T>& s) {
  return a *= s;
}
template <class T>
Complex<T> operator*(const std::type_identity_t<T>& s, Complex<T> a) {
  return a *= s;
}

template <class T>
Complex<T> conj(const Complex<T>& z) {
  return {z.re, -z.im};
}

template <class T>
T norm2(const Complex<T>& z) {
  return z.re * z.re + z.im * z.im;
}

template <class T>
T modulus(const Complex<T>& z) {
  using std::sqrt;
  return sqrt(norm2(z));
}

template <class T>
T argument(const Complex<T>& z) {
  using std::atan2;
  return atan2(z.im, z.re);
}

// exp(j * phase)
template <class T>
Complex<T> cexp_i(const T& phase) {
  using std::cos;
  using std::sin;
  return {cos(phase), sin(phase)};
}

template <class T>
Complex<double> value_of(const Complex<T>& z) {
  return {value_of(z.re), value_of(z.im)};
}

}  // namespace rwsim
