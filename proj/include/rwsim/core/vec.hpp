#pragma once

#include <cmath>
#include <type_traits>

#include "rwsim/core/dual.hpp"

namespace rwsim {

template <class T>
struct Vec2 {
  T x{};
  T y{};
};

template <class T>
struct Vec3 {
  T x{};
  T y{};
  T z{};

  Vec3& operator+=(const Vec3& b) {
    x += b.x;
    y += b.y;
    z += b.z;
    return *this;
  }
  Vec3& operator-=(const Vec3& b) {
    x -= b.x;
    y -= b.y;
    z -= b.z;
    return *this;
  }
  Vec3& operator*=(const T& s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }
};

template <class T>
Vec3<T> operator+(Vec3<T> a, const Vec3<T>& b) {
  return a += b;
}
template <class T>
Vec3<T> operator-(Vec3<T> a, const Vec3<T>& b) {
  return a -= b;
}
template <class T>
Vec3<T> operator-(const Vec3<T>& a) {
  return {-a.x, -a.y, -a.z};
}
template <class T>
Vec3<T> operator*(Vec3<T> a, const std::type_identity_t<T>& s) {
  return a *= s;
}
template <class T>
Vec3<T> operator*(const std::type_identity_t<T>& s, Vec3<T> a) {
  return a *= s;
}

template <class T>
T dot(const Vec3<T>& a, const Vec3<T>& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <class T>
Vec3<T> cross(const Vec3<T>& a, const Vec3<T>& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

template <class T>
T norm(const Vec3<T>& a) {
  using std::sqrt;
  return sqrt(dot(a, a));
}

template <class T>
Vec3<T> normalized(const Vec3<T>& a) {
  const T n = norm(a);
  if (value_of(n) == 0.0) throw NumericDomainError("normalize (zero vector)");
  const T inv = T(1.0) / n;
  return a * inv;
}

template <class T>
Vec3<double> value_of(const Vec3<T>& a) {
  return {value_of(a.x), value_of(a.y), value_of(a.z)};
}

template <class T>
Vec3<T> promote(const Vec3<double>& a) {
  return {T(a.x), T(a.y), T(a.z)};
}

}  // namespace rwsim
