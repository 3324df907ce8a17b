#include "oracles.hpp"
#include "rsgm/estimators.hpp"
#include "rsgm/sampler.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>

using namespace rsgm;

namespace {

Point p1(double a) {
  Vec v(1);
  v << a;
  return Torus(1).point(v);
}

GridDensity wrapped_on_grid(int resolution, double mu, double sigma) {
  return tabulate(GridSpec::torus(1, resolution),
                  [&](const Point& x) { return static_cast<double>(oracle::wrapped_gaussian(sigma * sigma, x.coords[0] - mu)); });
}

std::vector<Point> uniform_points(int d, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Point> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(Torus(d).uniform_sample(rng));
  return out;
}

}  // namespace

TEST(Grid, NodesAndMeasures) {
  const GridSpec g = GridSpec::torus(2, 4);
  EXPECT_EQ(g.size(), 16u);
  EXPECT_DOUBLE_EQ(g.node(1).coords[1], 0.25);
  EXPECT_DOUBLE_EQ(g.node(4).coords[0], 0.25);
  const GridSpec s = GridSpec::sphere(32);
  double area = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    area += s.cell_measure(i);
    EXPECT_NEAR(s.node(i).coords.norm(), 1.0, 1e-14);
  }
  EXPECT_NEAR(area, 4 * kPi, 1e-12);
  EXPECT_THROW(make_grid_density(g, std::vector<double>(15, 1.0)), ContractError);
  EXPECT_THROW(make_grid_density(g, std::vector<double>(16, 0.0)), ContractError);
  EXPECT_THROW(default_grid_resolution(4), ContractError);
}

TEST(Kde, SingleAtomIsWrappedGaussian) {
  const PeriodicKDE kde = kde_fit(std::vector<Point>(200, p1(0.3)), Bandwidth::fixed(0.05));
  for (double x : {0.0, 0.3, 0.31, 0.8, 0.95})
    EXPECT_NEAR(kde.evaluate(p1(x)), static_cast<double>(oracle::wrapped_gaussian(0.0025L, x - 0.3L)), 1e-12);
  const GridDensity g = kde_on_grid(kde, 256);
  for (std::size_t i = 0; i < g.values.size(); i += 17)
    EXPECT_NEAR(g.values[i] * g.raw_mass, kde.evaluate(g.grid.node(i)), 1e-10);
}

TEST(Kde, GridMatchesDirectEvaluationIn2And3D) {
  for (int d : {2, 3}) {
    const PeriodicKDE kde = kde_fit(uniform_points(d, 300, 31), Bandwidth::fixed(d == 2 ? 0.03 : 0.08));
    const GridDensity g = kde_on_grid(kde, 16);
    for (std::size_t i = 0; i < g.values.size(); i += 37)
      EXPECT_NEAR(g.values[i] * g.raw_mass, kde.evaluate(g.grid.node(i)), 1e-9);
  }
}

TEST(Kde, UniformSamplesGiveFlatEstimate) {
  const PeriodicKDE kde = kde_fit(uniform_points(1, 100000, 32));
  const GridDensity g = kde_on_grid(kde, 64);
  for (double v : g.values) EXPECT_NEAR(v * g.raw_mass, 1.0, 0.05);
  EXPECT_NEAR(g.raw_mass, 1.0, 1e-3);
}

TEST(Kde, RejectsBadInput) {
  EXPECT_THROW(kde_fit(uniform_points(1, 99, 1)), ContractError);
  EXPECT_THROW(kde_fit(uniform_points(4, 200, 1)), ContractError);
  EXPECT_THROW(Bandwidth::fixed(0.0), ContractError);
}

TEST(Kde, SphereKernelIsNormalized) {
  Rng rng(33);
  std::vector<Point> pts;
  for (int i = 0; i < 500; ++i) pts.push_back(Sphere(2).uniform_sample(rng));
  for (double bw : {0.05, 0.2, 1.0}) {
    const SphereKDE kde = sphere_kde_fit(pts, Bandwidth::fixed(bw));
    EXPECT_NEAR(kde_on_grid(kde, 128).raw_mass, 1.0, 2e-3) << bw;
  }
}

TEST(Tv, ZeroForIdenticalAndTwoForDisjoint) {
  const GridDensity p = wrapped_on_grid(256, 0.3, 0.05);
  EXPECT_EQ(tv_distance(p, p), 0.0);
  std::vector<double> a(256, 0.0), b(256, 0.0);
  for (int i = 0; i < 128; ++i) a[i] = 1.0;
  for (int i = 128; i < 256; ++i) b[i] = 1.0;
  const GridSpec g = GridSpec::torus(1, 256);
  EXPECT_DOUBLE_EQ(tv_distance(make_grid_density(g, a), make_grid_density(g, b)), 2.0);
  EXPECT_THROW(tv_distance(p, wrapped_on_grid(128, 0.3, 0.05)), ContractError);
}

TEST(Tv, UniformVersusWrappedGaussian) {
  // Long double direct summation over the same 1024 nodes: 1.50930477572893931.
  const GridSpec g = GridSpec::torus(1, 1024);
  const GridDensity u = make_grid_density(g, std::vector<double>(1024, 1.0));
  EXPECT_NEAR(tv_distance(u, wrapped_on_grid(1024, 0.5, 0.05)), 1.50930477572893931, 1e-12);
}

TEST(Tv, MetricProperties) {
  Rng rng(34);
  for (int i = 0; i < 100; ++i) {
    const GridDensity p = wrapped_on_grid(128, rng.uniform(), 0.02 + 0.2 * rng.uniform());
    const GridDensity q = wrapped_on_grid(128, rng.uniform(), 0.02 + 0.2 * rng.uniform());
    const GridDensity r = wrapped_on_grid(128, rng.uniform(), 0.02 + 0.2 * rng.uniform());
    EXPECT_EQ(tv_distance(p, q), tv_distance(q, p));
    EXPECT_LE(tv_distance(p, r), tv_distance(p, q) + tv_distance(q, r) + 1e-12);
    EXPECT_GE(tv_distance(p, q), 0.0);
    EXPECT_LE(tv_distance(p, q), 2.0 + 1e-12);
  }
}

TEST(Tv, GridErrorDecaysAtLeastLinearly) {
  // Error against a 2^16 reference, fitted on log-log over R = 32..1024. The
  // kinks of |p - q| make the decay oscillate between first and second order.
  const std::vector<std::pair<std::array<double, 4>, const char*>> cases = {
      {{0.3, 0.05, 0.35, 0.07}, "overlapping"}, {{0.3, 0.02, 0.31, 0.03}, "narrow"}, {{0.1, 0.08, 0.6, 0.1}, "apart"}};
  for (const auto& [c, name] : cases) {
    const auto tv_at = [&](int r) { return tv_distance(wrapped_on_grid(r, c[0], c[1]), wrapped_on_grid(r, c[2], c[3])); };
    const double ref = tv_at(1 << 16);
    std::vector<double> xs, ys;
    for (int r = 32; r <= 1024; r *= 2) {
      xs.push_back(std::log(r));
      ys.push_back(std::abs(tv_at(r) - ref));
    }
    const FitResult f = loglinear_fit(xs, ys);
    EXPECT_LT(f.slope, -1.0) << name;
  }
}

TEST(TvVsTarget, ExactSamplesSitNearNoiseFloor) {
  const TorusGMM g = default_torus_gmm(1);
  const auto pts = forward_sample_many(Torus(1), g, 0.01, 200000, 35);
  const TvEstimate e = tv_vs_target(pts, g, 0.01, 256);
  EXPECT_LT(e.tv, 0.05);
  EXPECT_EQ(e.resolution, 256);
  EXPECT_EQ(e.samples, 200000u);
}

TEST(TvVsTarget, UniformAgainstConcentratedTarget) {
  const TorusGMM g = make_torus_gmm({1.0}, {p1(0.5)}, {0.02});
  EXPECT_GT(tv_vs_target(uniform_points(1, 20000, 36), g, 0.0).tv, 1.5);
}

TEST(TvVsTarget, SmallSampleStaysInRange) {
  const double tv = tv_vs_target(uniform_points(1, 100, 37), default_torus_gmm(1), 0.01).tv;
  EXPECT_GE(tv, 0.0);
  EXPECT_LE(tv, 2.0);
}

TEST(TvVsTarget, KdeConvergesWithSampleSize) {
  const TorusGMM g = default_torus_gmm(1);
  double prev = 3.0;
  for (std::size_t n : {10000u, 100000u, 1000000u}) {
    Rng rng(38);
    std::vector<Point> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back(sample_p0(g, rng));
    const double tv = tv_vs_target(pts, g, 0.0).tv;
    EXPECT_LT(tv, prev) << n;
    prev = tv;
  }
}

TEST(Fit, ExactExponential) {
  const std::vector<double> xs = {5, 6, 7, 8, 9};
  std::vector<double> ys;
  for (double x : xs) ys.push_back(std::exp(-3 * x));
  const FitResult f = loglinear_fit(xs, ys);
  EXPECT_NEAR(f.slope, -3.0, 1e-10);
  EXPECT_NEAR(f.intercept, 0.0, 1e-10);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-10);
  EXPECT_EQ(f.used, 5);
  EXPECT_EQ(f.dropped, 0);
}

TEST(Fit, ConstantHasZeroSlope) {
  const std::vector<double> xs = {1, 2, 3, 4}, ys = {0.2, 0.2, 0.2, 0.2};
  EXPECT_NEAR(loglinear_fit(xs, ys).slope, 0.0, 1e-15);
}

TEST(Fit, ScaleInvariance) {
  Rng rng(39);
  std::vector<double> xs, ys, scaled;
  for (int i = 0; i < 8; ++i) {
    xs.push_back(i);
    ys.push_back(std::exp(-0.4 * i + 0.3 * rng.normal()));
    scaled.push_back(ys.back() * 17.5);
  }
  const FitResult a = loglinear_fit(xs, ys), b = loglinear_fit(xs, scaled);
  EXPECT_NEAR(a.slope, b.slope, 1e-12);
  EXPECT_NEAR(a.r_squared, b.r_squared, 1e-12);
  EXPECT_NEAR(b.intercept - a.intercept, std::log(17.5), 1e-12);
  EXPECT_GE(a.r_squared, 0.0);
  EXPECT_LE(a.r_squared, 1.0);
}

TEST(Fit, DropsZerosAndNeedsThreePoints) {
  const std::vector<double> xs = {1, 2, 3, 4}, ys = {0.1, 0.0, 0.01, 0.001};
  const FitResult f = loglinear_fit(xs, ys);
  EXPECT_EQ(f.dropped, 1);
  EXPECT_EQ(f.used, 3);
  const std::vector<double> ys2 = {0.1, 0.0, 0.0, 0.001};
  EXPECT_THROW(loglinear_fit(xs, ys2), ContractError);
  const std::vector<double> same = {2, 2, 2};
  EXPECT_THROW(loglinear_fit(same, std::vector<double>{1, 2, 3}), ContractError);
}

TEST(Fit, ZeroScoreResetFractionsDecay) {
  ResetExperimentConfig cfg;
  for (int k = 5; k <= 9; ++k) cfg.h_list.push_back(1.0 / (k * k));
  cfg.T = 0.17;
  cfg.trajectories = 100000;
  cfg.seed = 40;
  const auto rows = reset_probability_experiment(Torus(2), UniformTarget<Torus>{Torus(2)}, cfg);
  std::vector<double> xs, ys;
  for (const auto& r : rows) {
    xs.push_back(r.inv_sqrt_h());
    ys.push_back(r.reset_fraction);
  }
  const FitResult f = loglinear_fit(xs, ys);
  EXPECT_LT(f.slope, 0.0);
  EXPECT_GT(f.r_squared, 0.95);
}
