#pragma once

// Distributional diagnostics: wrapped-Gaussian KDE on T^d, von Mises-Fisher
// KDE on S^2, grid densities, total variation, and log-linear fits.

#include "rsgm/heat_kernel.hpp"
#include "rsgm/manifold.hpp"
#include "rsgm/parallel.hpp"

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace rsgm {

// ---------------------------------------------------------------------------
// Grids

/// Regular torus grid (nodes at cell origins i / R along each axis, last
/// axis fastest) or a latitude-longitude sphere grid with `resolution`
/// polar bands and 2 * resolution azimuthal cells, nodes at cell centers.
struct GridSpec {
  ManifoldKind kind = ManifoldKind::Torus;
  int d = 1;
  int resolution = 256;

  static GridSpec torus(int d, int resolution) {
    if (d < 1 || resolution < 1) throw ContractError("invalid torus grid");
    return {ManifoldKind::Torus, d, resolution};
  }
  static GridSpec sphere(int bands) {
    if (bands < 2) throw ContractError("invalid sphere grid");
    return {ManifoldKind::Sphere, 2, bands};
  }

  std::size_t size() const {
    if (kind == ManifoldKind::Sphere) return static_cast<std::size_t>(resolution) * 2 * resolution;
    std::size_t n = 1;
    for (int i = 0; i < d; ++i) n *= resolution;
    return n;
  }

  double cell_measure(std::size_t i) const {
    if (kind == ManifoldKind::Torus) return std::pow(1.0 / resolution, d);
    const std::size_t band = i / (2 * resolution);
    const double t0 = kPi * band / resolution, t1 = kPi * (band + 1) / resolution;
    return (kPi / resolution) * (std::cos(t0) - std::cos(t1));
  }

  Point node(std::size_t i) const {
    if (kind == ManifoldKind::Torus) {
      Vec c(d);
      for (int a = d - 1; a >= 0; --a) {
        c[a] = static_cast<double>(i % resolution) / resolution;
        i /= resolution;
      }
      return {c};
    }
    const std::size_t band = i / (2 * resolution), cell = i % (2 * resolution);
    const double theta = kPi * (band + 0.5) / resolution;
    const double phi = kPi * (cell + 0.5) / resolution;
    Vec c(3);
    c << std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta);
    return {c};
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Nonnegative values on a grid, rescaled so sum(values * cell measure) = 1.
/// raw_mass keeps the pre-normalization quadrature mass.
struct GridDensity {
  GridSpec grid;
  std::vector<double> values;
  double raw_mass = 1.0;

  double mass() const {
    double m = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) m += values[i] * grid.cell_measure(i);
    return m;
  }
};

inline GridDensity make_grid_density(const GridSpec& grid, std::vector<double> values) {
  if (values.size() != grid.size()) throw ContractError("grid density has the wrong number of values");
  double mass = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0)) throw ContractError("grid density values must be nonnegative");
    mass += values[i] * grid.cell_measure(i);
  }
  if (!(mass > 0.0)) throw ContractError("grid density has zero mass");
  for (double& v : values) v /= mass;
  return {grid, std::move(values), mass};
}

/// Evaluates `density(Point)` at every grid node.
template <class Density>
GridDensity tabulate(const GridSpec& grid, Density&& density, unsigned threads = 1) {
  std::vector<double> values(grid.size());
  parallel_for(values.size(), threads, [&](std::size_t i) { values[i] = density(grid.node(i)); });
  return make_grid_density(grid, std::move(values));
}

/// Default TV quadrature resolution per torus dimension.
inline int default_grid_resolution(int d) {
  switch (d) {
    case 1: return 256;
    case 2: return 128;
    case 3: return 48;
    default: throw ContractError("grid densities support d <= 3");
  }
}

// ---------------------------------------------------------------------------
// Total variation

/// sum |p - q| * cell measure; the unhalved convention, range [0, 2].
inline double tv_distance(const GridDensity& p, const GridDensity& q) {
  if (!(p.grid == q.grid) || p.values.size() != q.values.size()) throw ContractError("tv_distance: grid mismatch");
  double tv = 0.0;
  for (std::size_t i = 0; i < p.values.size(); ++i) tv += std::abs(p.values[i] - q.values[i]) * p.grid.cell_measure(i);
  return tv;
}

// ---------------------------------------------------------------------------
// Kernel density estimation

struct Bandwidth {
  enum class Rule { Scott, Fixed };
  Rule rule = Rule::Scott;
  double value = 0.0;

  static Bandwidth scott() { return {}; }
  static Bandwidth fixed(double h) {
    if (!(h > 0.0)) throw ContractError("bandwidth must be positive");
    return {Rule::Fixed, h};
  }
};

/// Circular standard deviation sqrt(-2 ln R) / (2 pi) per coordinate,
/// averaged over coordinates.
inline double circular_std(std::span<const Point> samples) {
  const int d = samples.front().size();
  double acc = 0.0;
  for (int j = 0; j < d; ++j) {
    std::complex<double> m{0.0, 0.0};
    for (const Point& p : samples) m += std::polar(1.0, kTwoPi * p.coords[j]);
    const double r = std::max(std::abs(m) / samples.size(), 1e-300);
    acc += std::sqrt(-2.0 * std::log(r)) / kTwoPi;
  }
  return acc / d;
}

/// Wrapped Gaussian KDE on T^d with isotropic variance bandwidth^2.
struct PeriodicKDE {
  std::vector<Point> samples;
  double bandwidth = 0.0;

  int dim() const { return samples.front().size(); }

  double evaluate(const Point& x) const {
    const double v = bandwidth * bandwidth;
    double sum = 0.0;
    for (const Point& s : samples) {
      double k = 1.0;
      for (int j = 0; j < dim(); ++j) k *= wrapped_gaussian(v, x.coords[j] - s.coords[j]).value;
      sum += k;
    }
    return sum / samples.size();
  }
};

inline PeriodicKDE kde_fit(std::vector<Point> samples, Bandwidth bw = Bandwidth::scott()) {
  if (samples.size() < 100) throw ContractError("kde_fit requires at least 100 samples");
  const int d = samples.front().size();
  if (d > 3) throw ContractError("kde_fit supports d <= 3");
  double h = bw.value;
  if (bw.rule == Bandwidth::Rule::Scott)
    h = circular_std(samples) * std::pow(static_cast<double>(samples.size()), -1.0 / (d + 4));
  if (!(h > 0.0)) throw ContractError("KDE bandwidth must be positive");
  return {std::move(samples), h};
}

/**
 * KDE on a regular torus grid. The kernel is a product over axes, so each
 * sample contributes an outer product of per-axis kernel vectors. Entries
 * beyond 9 bandwidths (relative weight < 1e-17) are skipped for narrow
 * kernels. Samples are accumulated in fixed chunks, summed in chunk order,
 * so the result does not depend on the thread count.
 */
inline GridDensity kde_on_grid(const PeriodicKDE& kde, int resolution, unsigned threads = 1) {
  const int d = kde.dim();
  const GridSpec grid = GridSpec::torus(d, resolution);
  const double v = kde.bandwidth * kde.bandwidth;
  const double cutoff = kde.bandwidth < 0.05 ? 9.0 * kde.bandwidth : 1.0;
  const auto chunks = fixed_chunks(kde.samples.size(), 4096);
  std::vector<std::vector<double>> partial(chunks.size());

  parallel_for(chunks.size(), threads, [&](std::size_t c) {
    std::vector<double> acc(grid.size(), 0.0);
    std::vector<std::vector<std::pair<int, double>>> axis(d);
    for (std::size_t s = chunks[c].begin; s < chunks[c].end; ++s) {
      const Point& p = kde.samples[s];
      for (int a = 0; a < d; ++a) {
        axis[a].clear();
        for (int k = 0; k < resolution; ++k) {
          const double delta = detail::wrap_half(static_cast<double>(k) / resolution - p.coords[a]);
          if (std::abs(delta) > cutoff) continue;
          axis[a].push_back({k, wrapped_gaussian(v, delta).value});
        }
      }
      if (d == 1) {
        for (const auto& [k, w] : axis[0]) acc[k] += w;
      } else if (d == 2) {
        for (const auto& [i, wi] : axis[0])
          for (const auto& [j, wj] : axis[1]) acc[static_cast<std::size_t>(i) * resolution + j] += wi * wj;
      } else {
        for (const auto& [i, wi] : axis[0])
          for (const auto& [j, wj] : axis[1]) {
            const double wij = wi * wj;
            const std::size_t base = (static_cast<std::size_t>(i) * resolution + j) * resolution;
            for (const auto& [k, wk] : axis[2]) acc[base + k] += wij * wk;
          }
      }
    }
    partial[c] = std::move(acc);
  });

  std::vector<double> values(grid.size(), 0.0);
  for (const auto& part : partial)
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += part[i];
  for (double& x : values) x /= kde.samples.size();
  return make_grid_density(grid, std::move(values));
}

/// von Mises-Fisher KDE on S^2 with concentration 1 / bandwidth^2.
struct SphereKDE {
  std::vector<Point> samples;
  double bandwidth = 0.0;

  double evaluate(const Point& x) const {
    const double kappa = 1.0 / (bandwidth * bandwidth);
    // kappa / (4 pi sinh kappa) exp(kappa c) = kappa / (2 pi (1 - e^{-2 kappa})) exp(kappa (c - 1))
    const double norm = kappa / (kTwoPi * -std::expm1(-2.0 * kappa));
    double sum = 0.0;
    for (const Point& s : samples) sum += std::exp(kappa * (x.coords.dot(s.coords) - 1.0));
    return norm * sum / samples.size();
  }
};

/// Scott-type rule on S^2: sqrt(1 - Rbar) * n^{-1/6}, Rbar the mean resultant length.
inline SphereKDE sphere_kde_fit(std::vector<Point> samples, Bandwidth bw = Bandwidth::scott()) {
  if (samples.size() < 100) throw ContractError("sphere_kde_fit requires at least 100 samples");
  double h = bw.value;
  if (bw.rule == Bandwidth::Rule::Scott) {
    Vec mean = Vec::Zero(samples.front().size());
    for (const Point& p : samples) mean += p.coords;
    const double rbar = std::min(mean.norm() / samples.size(), 1.0);
    h = std::sqrt(std::max(1.0 - rbar, 1e-12)) * std::pow(static_cast<double>(samples.size()), -1.0 / 6.0);
  }
  return {std::move(samples), h};
}

inline GridDensity kde_on_grid(const SphereKDE& kde, int bands, unsigned threads = 1) {
  return tabulate(GridSpec::sphere(bands), [&](const Point& x) { return kde.evaluate(x); }, threads);
}

// ---------------------------------------------------------------------------
// TV of sampler output against a target marginal

struct TvEstimate {
  double tv = 0.0;
  double bandwidth = 0.0;
  int resolution = 0;
  std::size_t samples = 0;
};

/// TV between the Scott-bandwidth KDE of `samples` and density_t(target, t)
/// on the same torus grid. resolution 0 picks the per-dimension default.
template <class Target>
TvEstimate tv_vs_target(std::vector<Point> samples, const Target& target, double t, int resolution = 0,
                        unsigned threads = 1) {
  const int d = samples.empty() ? 0 : samples.front().size();
  if (resolution == 0) resolution = default_grid_resolution(d);
  const std::size_t n = samples.size();
  const PeriodicKDE kde = kde_fit(std::move(samples), Bandwidth::scott());
  const GridDensity est = kde_on_grid(kde, resolution, threads);
  const GridDensity truth =
      tabulate(est.grid, [&](const Point& x) { return density_t(target, t, x); }, threads);
  return {tv_distance(est, truth), kde.bandwidth, resolution, n};
}

// ---------------------------------------------------------------------------
// Log-linear regression

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  int used = 0;
  int dropped = 0;  // entries with y <= 0 removed before taking logs
};

/// Ordinary least squares of log y on x. Zero y entries are dropped.
inline FitResult loglinear_fit(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ContractError("loglinear_fit: xs and ys differ in length");
  std::vector<double> x, ly;
  FitResult fit;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (ys[i] > 0.0) {
      x.push_back(xs[i]);
      ly.push_back(std::log(ys[i]));
    } else {
      ++fit.dropped;
    }
  }
  if (x.size() < 3) throw ContractError("loglinear_fit needs at least 3 positive points");
  const double n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw ContractError("loglinear_fit needs distinct x values");
  fit.used = static_cast<int>(x.size());
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
  return fit;
}

}  // namespace rsgm
