#include "oracles.hpp"
#include "rsgm/heat_kernel.hpp"
#include "rsgm/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rsgm;

namespace {

Point p1(double a) {
  Vec v(1);
  v << a;
  return Torus(1).point(v);
}

Point pole() {
  Vec v(3);
  v << 0, 0, 1;
  return Sphere(2).point(v);
}

/// Point at geodesic distance rho from the north pole.
Point at_distance(double rho) {
  Vec v(3);
  v << std::sin(rho), 0, std::cos(rho);
  return Sphere(2).point(v);
}

}  // namespace

TEST(TorusKernel, EquilibriumAtLargeTime) {
  for (double x : {0.0, 0.1, 0.37, 0.5}) EXPECT_NEAR(hk_torus(50.0, p1(0.0), p1(x)).value, 1.0, 1e-8);
}

TEST(TorusKernel, SmallTimeMatchesLongSeries) {
  // Long double oracle, |n| <= 50: 1.784286114371892912.
  const KernelEval k = hk_torus(0.05, p1(0.3), p1(0.3));
  EXPECT_NEAR(k.value, static_cast<double>(oracle::wrapped_gaussian(0.05L, 0.0L)), 1e-12);
  EXPECT_NEAR(k.value, 1.784286114371892912, 1e-12);
  EXPECT_LE(k.tail_bound, 1e-10);
  EXPECT_GT(k.truncation_terms, 0);
}

TEST(TorusKernel, SymmetricInDisplacement) {
  for (double d : {0.05, 0.2, 0.31, 0.49}) {
    EXPECT_NEAR(hk_torus(0.1, p1(0.5), p1(0.5 + d)).value, hk_torus(0.1, p1(0.5), p1(0.5 - d)).value, 1e-14);
  }
}

TEST(TorusKernel, ProductOverCoordinates) {
  const Torus t(2);
  Vec a(2), b(2);
  a << 0.1, 0.8;
  b << 0.4, 0.15;
  const double expected = static_cast<double>(oracle::wrapped_gaussian(0.3L, 0.3L) * oracle::wrapped_gaussian(0.3L, 0.35L));
  EXPECT_NEAR(hk_torus(0.3, t.point(a), t.point(b)).value, expected, 1e-12);
}

TEST(TorusKernel, RejectsNonPositiveTime) {
  EXPECT_THROW(hk_torus(0.0, p1(0), p1(0)), DomainError);
  EXPECT_THROW(hk_torus(-1.0, p1(0), p1(0)), DomainError);
}

TEST(WrappedGaussian, AgreesWithLongSeriesAcrossRegimes) {
  for (double v : {1e-4, 0.003, 0.05, 0.079, 0.081, 0.3, 2.0}) {
    for (double d : {0.0, 0.013, 0.25, 0.4999, -0.3}) {
      const WrappedGaussian w = wrapped_gaussian(v, d);
      const double ref = static_cast<double>(oracle::wrapped_gaussian(v, d));
      EXPECT_NEAR(w.value, ref, 1e-13 * std::max(1.0, ref)) << "v=" << v << " d=" << d;
      const double h = 1e-6;
      const double fd = (wrapped_gaussian(v, d + h).value - wrapped_gaussian(v, d - h).value) / (2 * h);
      EXPECT_NEAR(w.derivative, fd, 1e-6 * std::max(1.0, std::abs(fd)) / std::sqrt(v)) << "v=" << v << " d=" << d;
    }
  }
}

TEST(SphereKernel, EquilibriumAtLargeTime) {
  for (double c : {-1.0, -0.3, 0.2, 1.0}) EXPECT_NEAR(hk_sphere(50.0, c).value, 1.0 / (4.0 * kPi), 1e-10);
}

TEST(SphereKernel, MatchesLongSeriesOracle) {
  // Oracle values (L = 400, 40 digits): 0.34622951621907164958, 0.08052666438912873066,
  // 0.42700537800488708006.
  EXPECT_NEAR(hk_sphere(0.5, 1.0).value, 0.34622951621907164958, 1e-10);
  EXPECT_NEAR(hk_sphere(0.5, 0.3).value, 0.08052666438912873066, 1e-10);
  EXPECT_NEAR(hk_sphere(0.05, 0.9).value, 0.42700537800488708006, 1e-10);
  for (double t : {0.01, 0.1, 1.0})
    for (double c : {-0.99, 0.0, 0.7, 0.999})
      EXPECT_NEAR(hk_sphere(t, c).value, static_cast<double>(oracle::sphere_kernel(t, c, 1200)), 1e-10);
}

TEST(SphereKernel, TailBoundAndFloor) {
  const KernelEval k = hk_sphere(0.01, 0.99);
  EXPECT_LE(k.tail_bound, 1e-10);
  EXPECT_GE(k.truncation_terms, 100);
  // Far from the diagonal the image integral takes over.
  const KernelEval far = hk_sphere(0.01, 0.5);
  EXPECT_EQ(far.truncation_terms, 64);
  EXPECT_LE(far.tail_bound, 1e-12 * far.value);
  EXPECT_THROW(hk_sphere(5e-5, 0.5), DomainError);
  EXPECT_THROW(hk_sphere(0.1, 1.5), ContractError);
}

TEST(SphereKernel, CapQuadratureNormalizes) {
  EXPECT_LT(normalization_residual(Sphere(2), 0.5), 1e-8);
}

TEST(SphereKernel, CapMassMatchesQuadrature) {
  // Mass of {c' >= c} = 2 pi int_c^1 H dc', by Gauss-Legendre on [c, 1].
  const QuadratureRule rule = gauss_legendre(200);
  for (double t : {0.01, 0.3})
    for (double c : {-0.5, 0.5, 0.95}) {
      double mass = 0.0;
      for (int i = 0; i < 200; ++i) {
        const double x = 0.5 * (1 - c) * rule.nodes[i] + 0.5 * (1 + c);
        mass += rule.weights[i] * 0.5 * (1 - c) * hk_sphere(t, x).value;
      }
      EXPECT_NEAR(hk_sphere_cap_mass(t, c), kTwoPi * mass, 1e-9);
    }
}

TEST(GradLog, VanishesAtCoincidentPoints) {
  EXPECT_LT(hk_grad_log(Torus(1), 0.1, p1(0.3), p1(0.3)).norm(), 1e-15);
  EXPECT_LT(hk_grad_log(Sphere(2), 0.1, pole(), pole()).norm(), 1e-14);
}

TEST(GradLog, TorusMatchesFiniteDifference) {
  const Torus t(1);
  const Point x = p1(0.1), y = p1(0.3);
  const double h = 1e-5;
  const double fd = (std::log(hk_torus(0.1, x, p1(0.3 + h)).value) - std::log(hk_torus(0.1, x, p1(0.3 - h)).value)) /
                    (2 * h);
  const double g = hk_grad_log(t, 0.1, x, y).components[0];
  EXPECT_LT(std::abs(g - fd) / std::abs(fd), 1e-6);
}

TEST(GradLog, SphereMatchesGeodesicFiniteDifference) {
  const Sphere s(2);
  const Point x = pole();
  const Point y = at_distance(1.0);
  const double h = 1e-5;
  // Derivative of log H along the unit-speed geodesic away from x.
  const double fd = (std::log(heat_kernel(s, 0.5, x, at_distance(1.0 + h)).value) -
                     std::log(heat_kernel(s, 0.5, x, at_distance(1.0 - h)).value)) /
                    (2 * h);
  const TangentVec g = hk_grad_log(s, 0.5, x, y);
  Vec outward(3);
  outward << std::cos(1.0), 0, -std::sin(1.0);
  EXPECT_LT(std::abs(g.components.dot(outward) - fd) / std::abs(fd), 1e-5);
  EXPECT_LT(std::abs(g.components.dot(y.coords)), 1e-14);
}

TEST(GradLog, RandomFiniteDifferenceAgreement) {
  Rng rng(11);
  const Sphere s(2);
  const Torus t(2);
  const double h = 1e-6;
  for (int i = 0; i < 1000; ++i) {
    const double tt = std::exp(std::log(0.01) + rng.uniform() * std::log(200.0));
    {
      const Point x = t.uniform_sample(rng), y = t.uniform_sample(rng);
      const TangentVec g = hk_grad_log(t, tt, x, y);
      for (int k = 0; k < 2; ++k) {
        Vec e = Vec::Zero(2);
        e[k] = h;
        const double fd = (std::log(hk_torus(tt, x, t.exp_map(y, t.tangent(y, e))).value) -
                           std::log(hk_torus(tt, x, t.exp_map(y, t.tangent(y, -e))).value)) /
                          (2 * h);
        EXPECT_LT(std::abs(g.components[k] - fd) / std::max(1.0, std::abs(fd)), 1e-5);
      }
    }
    {
      const Point x = s.uniform_sample(rng), y = s.uniform_sample(rng);
      const TangentVec g = hk_grad_log(s, tt, x, y);
      const Frame f = s.orthonormal_frame(y);
      for (int k = 0; k < 2; ++k) {
        Vec xi = Vec::Zero(2);
        xi[k] = h;
        const double fd = (std::log(heat_kernel(s, tt, x, s.exp_map(y, f.lift(xi))).value) -
                           std::log(heat_kernel(s, tt, x, s.exp_map(y, f.lift(-xi))).value)) /
                          (2 * h);
        EXPECT_LT(std::abs(g.components.dot(f.columns.col(k)) - fd) / std::max(1.0, std::abs(fd)), 1e-5);
      }
    }
  }
}

TEST(Parametrix, TorusEqualsCentralImage) {
  const Torus t(1);
  const double tt = 0.02;
  const double d = 0.17;
  const double expected = std::exp(-d * d / (2 * tt)) / std::sqrt(kTwoPi * tt);
  EXPECT_NEAR(pushforward_gaussian(t, tt, p1(0.2), p1(0.2 + d)), expected, 1e-12);
}

TEST(Parametrix, SphereAtCoincidentPoints) {
  EXPECT_NEAR(pushforward_gaussian(Sphere(2), 0.01, pole(), pole()), 1.0 / (kTwoPi * 0.01), 1e-9);
}

TEST(Parametrix, SmallTimeRatioNearOne) {
  const double t = 1e-3;
  const double rho = std::pow(t, 5.0 / 12.0);
  const double ratio = hk_sphere(t, std::cos(rho)).value / pushforward_gaussian(Sphere(2), t, pole(), at_distance(rho));
  EXPECT_NEAR(ratio, 1.0, 0.05);
}

TEST(Parametrix, DriftShiftsTheMode) {
  const Sphere s(2);
  Vec drift(3);
  drift << 1.0, 0, 0;
  const TangentVec b = s.tangent(pole(), drift);
  const double t = 0.05;
  EXPECT_GT(pushforward_gaussian(s, t, pole(), at_distance(t), b), pushforward_gaussian(s, t, pole(), pole(), b));
}

TEST(Bounds, TorusHarnackExample) {
  // (4 pi 0.1)^{-1/2} exp(-0.09/0.4) = 0.71232602151386319799.
  const double lb = harnack_lower_bound(ManifoldDescriptor::torus(1), 0.2, 0.3);
  EXPECT_NEAR(lb, 0.71232602151386319799, 1e-14);
  EXPECT_LE(lb, hk_torus(0.2, p1(0.0), p1(0.3)).value);
}

TEST(Bounds, RandomSphereSamplesHaveNoViolations) {
  Rng rng(12);
  const Sphere s(2);
  std::vector<KernelSample> samples;
  for (int i = 0; i < 100; ++i) {
    const double t = std::exp(std::log(0.05) + rng.uniform() * std::log(100.0));
    samples.push_back({t, s.uniform_sample(rng), s.uniform_sample(rng)});
  }
  const KernelBoundReport r = check_kernel_bounds(s, std::span<const KernelSample>(samples));
  EXPECT_EQ(r.violations, 0);
  EXPECT_EQ(r.rows.size(), 100u);
  EXPECT_EQ(r.delta_sch, 1.0);
  EXPECT_EQ(r.alpha, 2.0);
}

TEST(Bounds, LargeTimeIsTriviallySatisfied) {
  const Sphere s(2);
  const std::vector<KernelSample> samples{{200.0, pole(), at_distance(2.0)}};
  const KernelBoundReport r = check_kernel_bounds(s, std::span<const KernelSample>(samples));
  EXPECT_EQ(r.violations, 0);
  EXPECT_LT(r.rows[0].lower_bound, 1e-20);
}

TEST(Bounds, InflatedKernelBreaksUpperBoundEventually) {
  const Torus t(1);
  const std::vector<KernelSample> samples{{0.1, p1(0.0), p1(0.1)}};
  EXPECT_EQ(check_kernel_bounds(t, std::span<const KernelSample>(samples), 1.0).violations, 0);
  EXPECT_EQ(check_kernel_bounds(t, std::span<const KernelSample>(samples), 1e6).violations, 1);
}

TEST(Properties, Normalization) {
  Rng rng(13);
  for (double t : {0.05, 0.5, 5.0}) {
    EXPECT_LT(normalization_residual(Torus(1), t, p1(0.3)), 1e-8);
    EXPECT_LT(normalization_residual(Sphere(2), t), 1e-8);
  }
  Vec x(2);
  x << 0.2, 0.7;
  EXPECT_LT(normalization_residual(Torus(2), 0.05, Torus(2).point(x), 256), 1e-8);
}

TEST(Properties, Semigroup) {
  Rng rng(14);
  const Sphere s(2);
  for (auto [a, b] : {std::pair{0.1, 0.1}, std::pair{0.2, 0.5}}) {
    EXPECT_LT(semigroup_residual(Torus(1), a, b, p1(0.1), p1(0.65)), 1e-6);
    EXPECT_LT(semigroup_residual(s, a, b, s.uniform_sample(rng), s.uniform_sample(rng)), 1e-6);
  }
}

TEST(Properties, SymmetryAndPositivity) {
  Rng rng(15);
  const Sphere s(2);
  const Torus t(3);
  for (int i = 0; i < 500; ++i) {
    const double tt = 0.001 + 3.0 * rng.uniform();
    const Point a = s.uniform_sample(rng), b = s.uniform_sample(rng);
    const double hab = heat_kernel(s, tt, a, b).value;
    EXPECT_NEAR(hab, heat_kernel(s, tt, b, a).value, 1e-12);
    const Point c = t.uniform_sample(rng), d = t.uniform_sample(rng);
    const double hcd = heat_kernel(t, tt, c, d).value;
    EXPECT_NEAR(hcd, heat_kernel(t, tt, d, c).value, 1e-12);
    EXPECT_GT(hcd, 0.0);
    if (tt > 0.05) EXPECT_GT(hab, 0.0);
  }
}

TEST(Quadrature, GaussLegendreIsExactForPolynomials) {
  const QuadratureRule r = gauss_legendre(12);
  double s0 = 0, s22 = 0;
  for (std::size_t i = 0; i < r.nodes.size(); ++i) {
    s0 += r.weights[i];
    s22 += r.weights[i] * std::pow(r.nodes[i], 22);
  }
  EXPECT_NEAR(s0, 2.0, 1e-14);
  EXPECT_NEAR(s22, 2.0 / 23.0, 1e-14);
}
