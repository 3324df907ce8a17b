#pragma once

// Target distributions p_0 whose heat-flow evolution p_t and score
// grad log p_t are available in closed form.

#include "rsgm/heat_kernel.hpp"
#include "rsgm/manifold.hpp"
#include "rsgm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace rsgm {

/// Warped Gaussian mixture on T^d: pushforward of sum_i w_i N(m_i, s_i^2 I)
/// through R^d -> R^d / Z^d.
struct TorusGMM {
  std::vector<double> weights;
  std::vector<Point> means;
  std::vector<double> sigmas;

  int dim() const { return means.empty() ? 0 : means.front().size(); }
  std::size_t size() const { return weights.size(); }
  Torus manifold() const { return Torus(dim()); }
};

/// Mixture of S^2 heat kernels: component i is H(s_i, mu_i, .).
struct SphereHKMixture {
  std::vector<double> weights;
  std::vector<Point> centers;
  std::vector<double> widths;

  std::size_t size() const { return weights.size(); }
  Sphere manifold() const { return Sphere(2); }

  // Radial CDF tables used by sample_p0, one per component; cdf[k] is the
  // cap mass of geodesic radius pi k / (n - 1).
  std::vector<std::vector<double>> radial_cdf;
};

/// The uniform law mu. Its score vanishes at every time.
template <ModelManifold M>
struct UniformTarget {
  M space;

  M manifold() const { return space; }
};

/// Additive score error field. Deterministic so the realized L2 error is
/// exactly computable.
struct ScorePerturbation {
  enum class Mode { None, Deterministic };

  Mode mode = Mode::None;
  double amplitude = 0.0;
  int frequency = 1;

  static ScorePerturbation none() { return {}; }
  static ScorePerturbation deterministic(double amplitude, int frequency) {
    if (!(amplitude >= 0.0)) throw ContractError("perturbation amplitude must be >= 0");
    return {Mode::Deterministic, amplitude, frequency};
  }
  bool active() const { return mode == Mode::Deterministic && amplitude > 0.0; }
};

namespace detail {

inline void check_weights(std::span<const double> w) {
  if (w.empty()) throw ContractError("empty mixture");
  double sum = 0.0;
  for (double x : w) {
    if (!(x > 0.0)) throw ContractError("mixture weights must be positive");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ContractError("mixture weights must sum to 1");
}

inline std::size_t pick_component(std::span<const double> weights, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  return weights.size() - 1;
}

inline constexpr int kRadialTableSize = 2049;

inline std::vector<double> radial_cdf_table(double width) {
  std::vector<double> cdf(kRadialTableSize);
  for (int k = 0; k < kRadialTableSize; ++k) {
    const double r = kPi * k / (kRadialTableSize - 1);
    cdf[k] = hk_sphere_cap_mass(width, std::cos(r));
  }
  cdf.front() = 0.0;
  cdf.back() = 1.0;
  for (int k = 1; k < kRadialTableSize; ++k) cdf[k] = std::max(cdf[k], cdf[k - 1]);
  return cdf;
}

/// Geodesic radius with cap mass u: table bracket, then safeguarded Newton
/// on the exact cap mass.
inline double invert_radial_cdf(const std::vector<double>& cdf, double width, double u) {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  const int hi = std::clamp(static_cast<int>(it - cdf.begin()), 1, kRadialTableSize - 1);
  const int lo = hi - 1;
  const double dr = kPi / (kRadialTableSize - 1);
  double a = lo * dr, b = hi * dr;
  const double span_mass = cdf[hi] - cdf[lo];
  double r = span_mass > 0.0 ? a + (u - cdf[lo]) / span_mass * dr : 0.5 * (a + b);
  for (int iter = 0; iter < 3; ++iter) {
    const double f = hk_sphere_cap_mass(width, std::cos(r)) - u;
    const double dens = kTwoPi * std::sin(r) * hk_sphere(width, std::cos(r)).value;
    if (f > 0.0) b = r; else a = r;
    double next = dens > 0.0 ? r - f / dens : 0.5 * (a + b);
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    r = next;
  }
  return r;
}

}  // namespace detail

inline TorusGMM make_torus_gmm(std::vector<double> weights, std::vector<Point> means, std::vector<double> sigmas) {
  detail::check_weights(weights);
  if (means.size() != weights.size() || sigmas.size() != weights.size())
    throw ContractError("mixture weights, means and sigmas must have equal length");
  const int d = means.front().size();
  const Torus torus(d);
  for (auto& m : means) {
    if (m.size() != d) throw ContractError("mixture means must share one dimension");
    m = torus.point(m.coords);
  }
  for (double s : sigmas)
    if (!(s > 0.0)) throw ContractError("mixture sigmas must be positive");
  return {std::move(weights), std::move(means), std::move(sigmas)};
}

/// Three components, weights (0.5, 0.3, 0.2), means at 0.2, 0.5 and 0.8 in
/// every coordinate (pairwise torus distance >= 0.3 sqrt(d)), sigma 0.05.
inline TorusGMM default_torus_gmm(int d, double sigma = 0.05) {
  std::vector<Point> means;
  for (double c : {0.2, 0.5, 0.8}) means.push_back({Vec::Constant(d, c)});
  return make_torus_gmm({0.5, 0.3, 0.2}, std::move(means), {sigma, sigma, sigma});
}

inline SphereHKMixture make_sphere_mixture(std::vector<double> weights, std::vector<Point> centers,
                                           std::vector<double> widths) {
  detail::check_weights(weights);
  if (centers.size() != weights.size() || widths.size() != weights.size())
    throw ContractError("mixture weights, centers and widths must have equal length");
  const Sphere sphere(2);
  for (auto& c : centers) c = sphere.point(c.coords);
  for (double w : widths)
    if (!(w >= kSphereKernelMinTime)) throw ContractError("sphere mixture widths must be >= the kernel floor");
  SphereHKMixture out{std::move(weights), std::move(centers), std::move(widths), {}};
  for (double w : out.widths) out.radial_cdf.push_back(detail::radial_cdf_table(w));
  return out;
}

/// Three components on the coordinate axes e_x, e_y, e_z with weights
/// (0.5, 0.3, 0.2).
inline SphereHKMixture default_sphere_mixture(double width = 0.05) {
  std::vector<Point> centers;
  for (int i = 0; i < 3; ++i) {
    Vec v = Vec::Zero(3);
    v[i] = 1.0;
    centers.push_back({v});
  }
  return make_sphere_mixture({0.5, 0.3, 0.2}, std::move(centers), {width, width, width});
}

// ---------------------------------------------------------------------------
// density_t

inline double density_t(const TorusGMM& g, double t, const Point& x) {
  if (!(t >= 0.0)) throw DomainError("density_t requires t >= 0");
  if (g.size() == 0) throw ContractError("empty mixture");
  double total = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double v = g.sigmas[i] * g.sigmas[i] + t;
    double p = g.weights[i];
    for (int j = 0; j < g.dim(); ++j) p *= wrapped_gaussian(v, x.coords[j] - g.means[i].coords[j]).value;
    total += p;
  }
  return total;
}

inline double density_t(const SphereHKMixture& g, double t, const Point& x) {
  if (g.size() == 0) throw ContractError("empty mixture");
  double total = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    total += g.weights[i] * hk_sphere(g.widths[i] + t, g.centers[i].coords.dot(x.coords)).value;
  return total;
}

template <ModelManifold M>
double density_t(const UniformTarget<M>& u, double t, const Point&) {
  if (!(t >= 0.0)) throw DomainError("density_t requires t >= 0");
  return 1.0 / u.space.volume();
}

// ---------------------------------------------------------------------------
// responsibilities and score_t

namespace detail {

struct TorusComponentEval {
  double log_weight = 0.0;  // log(w_i p_i)
  Vec dlog;                 // grad log p_i
};

inline std::vector<TorusComponentEval> torus_components(const TorusGMM& g, double t, const Point& x) {
  std::vector<TorusComponentEval> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double v = g.sigmas[i] * g.sigmas[i] + t;
    out[i].log_weight = std::log(g.weights[i]);
    out[i].dlog.resize(g.dim());
    for (int j = 0; j < g.dim(); ++j) {
      const double delta = x.coords[j] - g.means[i].coords[j];
      const WrappedGaussian k = wrapped_gaussian(v, delta);
      if (k.value > 0.0) {
        out[i].log_weight += std::log(k.value);
        out[i].dlog[j] = k.derivative / k.value;
      } else {
        // Far tail of a very narrow component: only the nearest image matters.
        const double dw = wrap_half(delta);
        out[i].log_weight += -0.5 * dw * dw / v - 0.5 * std::log(kTwoPi * v);
        out[i].dlog[j] = -dw / v;
      }
    }
  }
  return out;
}

inline std::vector<double> normalized_exp(std::span<const double> logs) {
  const double mx = *std::max_element(logs.begin(), logs.end());
  std::vector<double> r(logs.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logs.size(); ++i) sum += (r[i] = std::exp(logs[i] - mx));
  for (double& v : r) v /= sum;
  return r;
}

}  // namespace detail

/// Posterior component probabilities at (t, x).
inline std::vector<double> responsibilities(const TorusGMM& g, double t, const Point& x) {
  if (!(t >= 0.0)) throw DomainError("responsibilities require t >= 0");
  const auto comps = detail::torus_components(g, t, x);
  std::vector<double> logs;
  for (const auto& c : comps) logs.push_back(c.log_weight);
  return detail::normalized_exp(logs);
}

inline std::vector<double> responsibilities(const SphereHKMixture& g, double t, const Point& x) {
  std::vector<double> logs(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    logs[i] = std::log(g.weights[i]) + hk_sphere_log(g.widths[i] + t, g.centers[i].coords.dot(x.coords)).log_value;
  return detail::normalized_exp(logs);
}

inline TangentVec score_t(const TorusGMM& g, double t, const Point& x) {
  if (!(t >= 0.0)) throw DomainError("score_t requires t >= 0");
  if (g.size() == 0) throw ContractError("empty mixture");
  const int d = g.dim();
  // Direct evaluation; falls back to the log domain if every component underflows.
  constexpr std::size_t kMaxFast = 8;
  if (g.size() <= kMaxFast) {
    Vec grad_num = Vec::Zero(d);
    double total = 0.0;
    Vec comp_grad(d);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = g.sigmas[i] * g.sigmas[i] + t;
      double pi = g.weights[i];
      bool ok = true;
      for (int j = 0; j < d; ++j) {
        const WrappedGaussian k = wrapped_gaussian(v, x.coords[j] - g.means[i].coords[j]);
        if (!(k.value > 0.0)) ok = false;
        pi *= k.value;
        comp_grad[j] = ok ? k.derivative / k.value : 0.0;
      }
      if (ok) grad_num += pi * comp_grad;
      total += pi;
    }
    if (total > 1e-250) return {x, grad_num / total};
  }
  const auto comps = detail::torus_components(g, t, x);
  std::vector<double> logs;
  for (const auto& c : comps) logs.push_back(c.log_weight);
  const auto r = detail::normalized_exp(logs);
  Vec grad = Vec::Zero(d);
  for (std::size_t i = 0; i < comps.size(); ++i) grad += r[i] * comps[i].dlog;
  return {x, grad};
}

inline TangentVec score_t(const SphereHKMixture& g, double t, const Point& x) {
  if (g.size() == 0) throw ContractError("empty mixture");
  // Log domain, so points far from every center keep an accurate score.
  std::vector<double> logs(g.size()), dlogs(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const SphereLogKernel k = hk_sphere_log(g.widths[i] + t, g.centers[i].coords.dot(x.coords));
    logs[i] = std::log(g.weights[i]) + k.log_value;
    dlogs[i] = k.dlog_dc;
  }
  const auto r = detail::normalized_exp(logs);
  Vec grad = Vec::Zero(3);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double c = g.centers[i].coords.dot(x.coords);
    grad += r[i] * dlogs[i] * (g.centers[i].coords - c * x.coords);
  }
  return {x, grad};
}

template <ModelManifold M>
TangentVec score_t(const UniformTarget<M>& u, double t, const Point& x) {
  if (!(t >= 0.0)) throw DomainError("score_t requires t >= 0");
  return u.space.zero_tangent(x);
}

// ---------------------------------------------------------------------------
// Perturbed scores

/// eps(t, x) = a e_1 sin(2 pi f x_1), with e_1 the first coordinate direction.
inline TangentVec perturbation_field(const Torus& m, const ScorePerturbation& p, double, const Point& x) {
  TangentVec eps = m.zero_tangent(x);
  if (p.active()) eps.components[0] = p.amplitude * std::sin(kTwoPi * p.frequency * x.coords[0]);
  return eps;
}

/// eps(t, x) = a sin(pi f x_1) P_x(e_last): the tangential part of the last
/// ambient axis, modulated by the first ambient coordinate. |eps| <= a.
inline TangentVec perturbation_field(const Sphere& m, const ScorePerturbation& p, double, const Point& x) {
  if (!p.active()) return m.zero_tangent(x);
  Vec axis = Vec::Zero(m.ambient_dim());
  axis[m.ambient_dim() - 1] = 1.0;
  TangentVec eps = m.project_tangent(x, axis);
  eps.components *= p.amplitude * std::sin(kPi * p.frequency * x.coords[0]);
  return eps;
}

template <class Target>
TangentVec perturbed_score(const Target& target, const ScorePerturbation& p, double t, const Point& x) {
  TangentVec s = score_t(target, t, x);
  if (p.active()) s.components += perturbation_field(target.manifold(), p, t, x).components;
  return s;
}

// ---------------------------------------------------------------------------
// Sampling p_0

inline Point sample_p0(const TorusGMM& g, Rng& rng) {
  const std::size_t i = detail::pick_component(g.weights, rng);
  Vec v(g.dim());
  for (int j = 0; j < g.dim(); ++j) v[j] = g.means[i].coords[j] + g.sigmas[i] * rng.normal();
  return g.manifold().point(v);
}

inline Point sample_p0(const SphereHKMixture& g, Rng& rng) {
  const std::size_t i = detail::pick_component(g.weights, rng);
  const double r = detail::invert_radial_cdf(g.radial_cdf[i], g.widths[i], rng.uniform());
  const double phi = kTwoPi * rng.uniform();
  const Sphere s2(2);
  const Frame f = s2.orthonormal_frame(g.centers[i]);
  const Vec dir = std::cos(phi) * f.columns.col(0) + std::sin(phi) * f.columns.col(1);
  return s2.project(std::cos(r) * g.centers[i].coords + std::sin(r) * dir);
}

template <ModelManifold M>
Point sample_p0(const UniformTarget<M>& u, Rng& rng) {
  return u.space.uniform_sample(rng);
}

}  // namespace rsgm
