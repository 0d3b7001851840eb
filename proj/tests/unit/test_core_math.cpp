#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include "rwsim/core/complex.hpp"
#include "rwsim/core/dual.hpp"
#include "rwsim/core/vec.hpp"

using namespace rwsim;
using D2 = Dual<2>;
using D1 = Dual<1>;

TEST(Lift, ConstantHasZeroTangent) {
  const auto x = lift<D2>(2.0, std::nullopt, 2);
  EXPECT_EQ(x.value, 2.0);
  EXPECT_EQ(x.tangent[0], 0.0);
  EXPECT_EQ(x.tangent[1], 0.0);
}

TEST(Lift, SeedsUnitBasisVector) {
  const auto a = lift<D2>(3.5, 0, 2);
  EXPECT_EQ(a.value, 3.5);
  EXPECT_EQ(a.tangent[0], 1.0);
  EXPECT_EQ(a.tangent[1], 0.0);
  const auto b = lift<D2>(0.0, 1, 2);
  EXPECT_EQ(b.tangent[0], 0.0);
  EXPECT_EQ(b.tangent[1], 1.0);
}

TEST(Lift, IndexOutOfRangeIsConfigError) {
  EXPECT_THROW(lift<D2>(1.0, 2, 2), ConfigError);
  EXPECT_THROW(lift<Dual<4>>(1.0, 3, 3), ConfigError);
}

TEST(DualArith, ProductRule) {
  const auto x = lift<D1>(3.0, 0, 1);
  const auto y = x * x;
  EXPECT_EQ(y.value, 9.0);
  EXPECT_EQ(y.tangent[0], 6.0);
}

TEST(DualArith, SqrtAndSin) {
  const auto s = sqrt(lift<D1>(4.0, 0, 1));
  EXPECT_EQ(s.value, 2.0);
  EXPECT_DOUBLE_EQ(s.tangent[0], 0.25);
  const auto t = sin(lift<D1>(0.0, 0, 1));
  EXPECT_EQ(t.value, 0.0);
  EXPECT_EQ(t.tangent[0], 1.0);
}

TEST(DualArith, DomainErrorsNameTheOperation) {
  try {
    (void)sqrt(D1(-1.0));
    FAIL();
  } catch (const NumericDomainError& e) {
    EXPECT_EQ(e.op(), "sqrt");
  }
  try {
    (void)(D1(1.0) / D1(0.0));
    FAIL();
  } catch (const NumericDomainError& e) {
    EXPECT_EQ(e.op(), "division");
  }
}

namespace {
struct Probe {
  template <std::size_t N>
  std::size_t operator()() const {
    return N;
  }
};
}  // namespace

TEST(DispatchWidth, PicksSmallestCapacity) {
  EXPECT_EQ(dispatch_tangent_width(1, Probe{}), 4u);
  EXPECT_EQ(dispatch_tangent_width(5, Probe{}), 8u);
  EXPECT_EQ(dispatch_tangent_width(100, Probe{}), 128u);
  EXPECT_THROW(dispatch_tangent_width(129, Probe{}), ConfigError);
}

// Composite functions built from every op: forward tangent against central
// differences with h = 1e-6 max(1, |x|).
TEST(DualProperty, TangentsMatchCentralDifferences) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ux(0.3, 2.5);
  std::uniform_real_distribution<double> uy(-1.5, 1.5);
  auto f = [](auto x, auto y) {
    using std::atan2, std::cos, std::exp, std::sin, std::sqrt, std::tan, std::abs, std::pow;
    return sqrt(x * x + y * y) * sin(x) + cos(y) / (1.0 + x) + atan2(y, x) + exp(0.3 * y) +
           tan(0.2 * x) + abs(y - 0.1) * x + pow(x, 1.7) - x / y;
  };
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const double x0 = ux(rng);
    double y0 = uy(rng);
    if (std::abs(y0) < 0.2 || std::abs(y0 - 0.1) < 0.05) y0 += 0.4;
    const auto r = f(lift<D2>(x0, 0, 2), lift<D2>(y0, 1, 2));
    const double hx = 1e-6 * std::max(1.0, std::abs(x0));
    const double hy = 1e-6 * std::max(1.0, std::abs(y0));
    const double gx = (f(x0 + hx, y0) - f(x0 - hx, y0)) / (2 * hx);
    const double gy = (f(x0, y0 + hy) - f(x0, y0 - hy)) / (2 * hy);
    EXPECT_NEAR(r.tangent[0], gx, 1e-5 * std::max(1.0, std::abs(gx)));
    EXPECT_NEAR(r.tangent[1], gy, 1e-5 * std::max(1.0, std::abs(gy)));
    ++checked;
  }
  EXPECT_EQ(checked, 100);
}

TEST(DualProperty, FiniteInsideDomain) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int i = 0; i < 100; ++i) {
    const auto x = lift<D2>(u(rng), 0, 2);
    const auto y = lift<D2>(u(rng), 1, 2);
    EXPECT_TRUE(isfinite(log(x) * sqrt(y) / (x + y) + exp(-x) * atan(y)));
  }
}

TEST(Cexp, Examples) {
  const auto a = cexp_i(0.0);
  EXPECT_EQ(a.re, 1.0);
  EXPECT_EQ(a.im, 0.0);
  const auto b = cexp_i(2.0 * std::numbers::pi);
  EXPECT_NEAR(b.re, 1.0, 1e-12);
  EXPECT_NEAR(b.im, 0.0, 1e-12);
  const auto c = cexp_i(std::numbers::pi / 2);
  EXPECT_NEAR(c.re, 0.0, 1e-12);
  EXPECT_NEAR(c.im, 1.0, 1e-12);
}

TEST(Cexp, TangentIsRotatedField) {
  const auto z = cexp_i(lift<D1>(0.7, 0, 1));
  EXPECT_NEAR(z.re.tangent[0], -std::sin(0.7), 1e-15);
  EXPECT_NEAR(z.im.tangent[0], std::cos(0.7), 1e-15);
}

TEST(ComplexProperty, AssociativeAndMultiplicativeModulus) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const Complex<double> a(u(rng), u(rng));
    const Complex<double> b(u(rng), u(rng));
    const Complex<double> c(u(rng), u(rng));
    const auto l = (a * b) * c;
    const auto r = a * (b * c);
    EXPECT_NEAR(l.re, r.re, 1e-12 * (1 + modulus(l)));
    EXPECT_NEAR(l.im, r.im, 1e-12 * (1 + modulus(l)));
    EXPECT_NEAR(modulus(a * b), modulus(a) * modulus(b), 1e-12 * (1 + modulus(a * b)));
    const double m = modulus(a);
    const double ph = argument(a);
    EXPECT_NEAR(m * std::cos(ph), a.re, 1e-12 * (1 + m));
    EXPECT_NEAR(m * std::sin(ph), a.im, 1e-12 * (1 + m));
  }
}

TEST(VecProperty, NormalizationUnitAndIdempotent) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int i = 0; i < 1000; ++i) {
    const Vec3<double> v{u(rng), u(rng), u(rng)};
    const auto n1 = normalized(v);
    const auto n2 = normalized(n1);
    EXPECT_NEAR(norm(n1), 1.0, 1e-12);
    EXPECT_NEAR(n1.x, n2.x, 1e-15);
    EXPECT_NEAR(n1.y, n2.y, 1e-15);
    EXPECT_NEAR(n1.z, n2.z, 1e-15);
  }
  EXPECT_THROW(normalized(Vec3<double>{0, 0, 0}), NumericDomainError);
}
