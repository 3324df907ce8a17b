#pragma once

// Heat kernels of the 1/2 Laplace-Beltrami flow on the flat torus and the
// unit 2-sphere, their log-gradients, the pushforward-Gaussian parametrix,
// and the Harnack / Li-Yau bound checks.
//
// Convention: every kernel here solves  d/dt H = 1/2 Lap H.  Bounds quoted
// for  d/dt u = Lap u  are evaluated at t/2.

#include "rsgm/manifold.hpp"
#include "rsgm/quadrature.hpp"
#include "rsgm/types.hpp"

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rsgm {

/// Below this time the sphere spectral series needs more than ~1000 terms.
inline constexpr double kSphereKernelMinTime = 1e-4;

struct KernelTolerance {
  double abs_tol = 1e-10;
};

struct KernelEval {
  double value = 0.0;
  int truncation_terms = 0;
  double tail_bound = 0.0;  // certified bound on |series - truncated sum|
};

/// Periodized N(0, v) density on the unit circle and its delta-derivative.
struct WrappedGaussian {
  double value = 0.0;
  double derivative = 0.0;
};

namespace detail {

inline void check_tolerance(const KernelTolerance& tol) {
  if (!(tol.abs_tol > 0.0)) throw ContractError("kernel tolerance must be positive");
}

struct ThetaSum {
  double sum = 0.0;   // sum_n (2 pi t)^{-1/2} exp(-(delta+n)^2 / 2t)
  double dsum = 0.0;  // d/d delta of the same sum
};

inline ThetaSum theta_terms(double t, double delta, int n_lo, int n_hi) {
  const double norm = 1.0 / std::sqrt(kTwoPi * t);
  ThetaSum out;
  for (int n = n_lo; n <= n_hi; ++n) {
    const double u = delta + n;
    const double g = norm * std::exp(-u * u / (2.0 * t));
    out.sum += g;
    out.dsum -= (u / t) * g;
  }
  return out;
}

/// Image-sum truncation for |n| <= N: tail <= erfc((N - 1/2) / sqrt(2t)).
inline double theta_tail(double t, int n_wrap) { return std::erfc((n_wrap - 0.5) / std::sqrt(2.0 * t)); }

/// Torus kernel pieces per coordinate, with N grown until the product tail
/// bound meets the tolerance.
struct TorusSeries {
  std::vector<ThetaSum> coords;
  int n_wrap = 0;
  double tail = 0.0;
};

inline TorusSeries torus_series(double t, const Point& x, const Point& y, const KernelTolerance& tol) {
  if (!(t > 0.0)) throw DomainError("heat kernel requires t > 0");
  check_tolerance(tol);
  if (x.size() != y.size()) throw ContractError("torus points of different dimension");
  const int d = x.size();
  TorusSeries s;
  s.n_wrap = static_cast<int>(std::ceil(1.0 + 6.0 * std::sqrt(t)));
  std::vector<double> delta(d);
  s.coords.resize(d);
  for (int j = 0; j < d; ++j) {
    delta[j] = wrap_half(y.coords[j] - x.coords[j]);
    s.coords[j] = theta_terms(t, delta[j], -s.n_wrap, s.n_wrap);
  }
  for (;;) {
    const double e = theta_tail(t, s.n_wrap);
    // prod(a+e) - prod(a) <= sum_j e * prod_{k != j} (a_k + e)
    double bound = 0.0;
    for (int j = 0; j < d; ++j) {
      double p = e;
      for (int k = 0; k < d; ++k)
        if (k != j) p *= s.coords[k].sum + e;
      bound += p;
    }
    s.tail = bound;
    if (bound <= tol.abs_tol) break;
    ++s.n_wrap;
    for (int j = 0; j < d; ++j) {
      const ThetaSum lo = theta_terms(t, delta[j], -s.n_wrap, -s.n_wrap);
      const ThetaSum hi = theta_terms(t, delta[j], s.n_wrap, s.n_wrap);
      s.coords[j].sum += lo.sum + hi.sum;
      s.coords[j].dsum += lo.dsum + hi.dsum;
    }
  }
  return s;
}

struct SphereSeries {
  double value = 0.0;
  double dvalue = 0.0;  // d/dc
  int terms = 0;
  double tail = 0.0;
};

/// sum_l a_l P_l(c) by Clenshaw's recurrence.
inline double legendre_clenshaw(std::span<const double> a, double c) {
  const int n = static_cast<int>(a.size()) - 1;
  if (n < 0) return 0.0;
  if (n == 0) return a[0];
  double b1 = 0.0, b2 = 0.0;  // b_{k+1}, b_{k+2}
  for (int k = n; k >= 1; --k) {
    const double alpha = (2.0 * k + 1.0) * c / (k + 1.0);
    const double beta_next = -(k + 1.0) / (k + 2.0);
    const double bk = a[k] + alpha * b1 + beta_next * b2;
    b2 = b1;
    b1 = bk;
  }
  // S = a_0 P_0 + b_1 P_1 + beta_1 P_0 b_2, beta_1 = -1/2
  return a[0] + c * b1 - 0.5 * b2;
}

inline void check_sphere_args(double t, double c, const KernelTolerance& tol) {
  if (!(t >= kSphereKernelMinTime))
    throw DomainError("sphere heat kernel requires t >= " + std::to_string(kSphereKernelMinTime));
  check_tolerance(tol);
  if (!(std::abs(c) <= 1.0 + 1e-12)) throw ContractError("sphere kernel argument c must lie in [-1, 1]");
}

inline SphereSeries sphere_series(double t, double c, const KernelTolerance& tol, bool with_derivative) {
  check_sphere_args(t, c, tol);
  c = std::clamp(c, -1.0, 1.0);

  int L = std::max(16, static_cast<int>(std::ceil(10.0 / std::sqrt(t))));
  auto tail_at = [t](int l) { return (2.0 / t) * std::exp(-0.5 * l * (l + 1.0) * t) / (4.0 * kPi); };
  while (tail_at(L) > tol.abs_tol) L += 8;

  thread_local std::vector<double> coef;
  coef.resize(L + 1);
  const double step = std::exp(-t);
  double decay = 1.0, ratio = 1.0;  // decay = exp(-l(l+1)t/2), ratio = exp(-l t)
  for (int l = 0; l <= L; ++l) {
    if (l > 0) {
      ratio *= step;
      decay *= ratio;
    }
    coef[l] = (2.0 * l + 1.0) / (4.0 * kPi) * decay;
  }
  SphereSeries out;
  out.terms = L + 1;
  out.tail = tail_at(L);
  out.value = legendre_clenshaw(coef, c);
  if (with_derivative) {
    // P_l' = sum_{k = l-1, l-3, ...} (2k+1) P_k, so sum_l a_l P_l' = sum_k (2k+1) S_k P_k
    // with S_k = a_{k+1} + a_{k+3} + ...
    thread_local std::vector<double> dcoef;
    dcoef.assign(L, 0.0);
    double s_next = 0.0, s_next2 = 0.0;  // S_{k+1}, S_{k+2}
    for (int k = L - 1; k >= 0; --k) {
      const double sk = coef[k + 1] + s_next2;
      dcoef[k] = (2.0 * k + 1.0) * sk;
      s_next2 = s_next;
      s_next = sk;
    }
    out.dvalue = legendre_clenshaw(dcoef, c);
  }
  return out;
}

/// log H and d log H / dc on S^2 from the image-sum integral
///   H = sqrt2 e^{t/8} (2 pi t)^{-3/2} sum_n (-1)^n int_theta^pi (phi + 2 pi n) e^{-(phi + 2 pi n)^2 / 2t}
///       / sqrt(cos theta - cos phi) dphi,
/// which keeps full relative accuracy in the far tail where the spectral sum
/// is dominated by cancellation. With cos phi = c - (1 + c) sin^2 a the
/// integrand is smooth in a on [0, pi/2]; it is cut where the n = 0 term has
/// fallen by e^{-46} and integrated by 64-point Gauss-Legendre.
struct SphereLog {
  double log_value = 0.0;
  double dlog_dc = 0.0;
};

inline SphereLog sphere_image_integral(double t, double c) {
  static const QuadratureRule rule = gauss_legendre(64);
  c = std::clamp(c, -1.0 + 1e-15, 1.0);
  const double a = 1.0 + c, b = 1.0 - c, sa = std::sqrt(a);
  const double theta = 2.0 * std::atan2(std::sqrt(b), sa);
  const double th2 = theta * theta;
  double alpha_max = 0.5 * kPi;
  if (th2 + 92.0 * t < kPi * kPi) {
    const double phi_c = std::sqrt(th2 + 92.0 * t);
    alpha_max = std::asin(std::min(1.0, std::sqrt((c - std::cos(phi_c)) / a)));
  }
  // Images whose exponent can come within 60 of the n = 0 peak.
  int n_lo = 0, n_hi = 0;
  while (((kTwoPi * (n_hi + 1) + theta) * (kTwoPi * (n_hi + 1) + theta) - th2) / (2.0 * t) < 60.0) ++n_hi;
  while (((kTwoPi * -(n_lo - 1) - kPi) * (kTwoPi * -(n_lo - 1) - kPi) - th2) / (2.0 * t) < 60.0) --n_lo;

  double integral = 0.0, dintegral = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double al = 0.5 * alpha_max * (rule.nodes[i] + 1.0);
    const double w = 0.5 * alpha_max * rule.weights[i];
    const double s = std::sin(al), co = std::cos(al);
    const double d = std::sqrt(b + a * s * s);
    const double phi = 2.0 * std::atan2(d, sa * co);
    double g = 0.0, dg = 0.0;
    for (int n = n_lo; n <= n_hi; ++n) {
      const double u = phi + kTwoPi * n;
      const double e = std::exp(-(u * u - th2) / (2.0 * t));
      const double sign = (n % 2 == 0) ? 1.0 : -1.0;
      g += sign * u * e;
      dg += sign * (1.0 - u * u / t) * e;
    }
    const double dphi_dc = -co / (sa * d);
    integral += w * 2.0 * g / d;
    dintegral += w * 2.0 * (dg * dphi_dc / d + g * co * co / (2.0 * d * d * d));
  }
  SphereLog out;
  out.log_value = 0.5 * std::log(2.0) + t / 8.0 - 1.5 * std::log(kTwoPi * t) - th2 / (2.0 * t) + std::log(integral);
  out.dlog_dc = dintegral / integral;
  return out;
}

/// The spectral sum loses relative accuracy once H has fallen far below its
/// peak; past theta^2 / 2t = 8 the image integral is used instead.
inline bool use_image_integral(double t, double c) {
  const double theta = std::acos(std::clamp(c, -1.0, 1.0));
  return theta * theta > 16.0 * t;
}

inline void require_s2(const Sphere& m) {
  if (m.dim() != 2) throw ContractError("sphere heat kernel is implemented for S^2 only");
}

}  // namespace detail

/**
 * Wrapped Gaussian k(v; delta) = sum_n (2 pi v)^{-1/2} exp(-(delta+n)^2 / 2v)
 * and its derivative in delta, to ~1e-15 relative accuracy.
 *
 * Narrow kernels (v < 0.08) sum images |n| <= 2 + ceil(9 sqrt v) with the
 * terms generated by ratios; wide kernels use the Poisson-dual Fourier form
 * 1 + 2 sum_m exp(-2 pi^2 m^2 v) cos(2 pi m delta). This is the fast path the
 * mixture scores run on; hk_torus is the reference evaluator.
 */
inline WrappedGaussian wrapped_gaussian(double v, double delta) {
  if (!(v > 0.0)) throw DomainError("wrapped Gaussian requires positive variance");
  delta = detail::wrap_half(delta);
  WrappedGaussian out;
  if (v < 0.08) {
    const int n_wrap = 2 + static_cast<int>(std::ceil(9.0 * std::sqrt(v)));
    const double inv_v = 1.0 / v;
    const double g0 = std::exp(-0.5 * delta * delta * inv_v);
    const double w1 = std::exp(-inv_v);  // exp(-m/v) = w1^m
    double sum = g0, dsum = -delta * inv_v * g0;
    // g_{n} / g_{n-1} = exp(-(delta + 1/2)/v) exp(-(n-1)/v) for n >= 1, mirrored for n <= -1
    double up = g0, down = g0, wpow = 1.0;
    const double r_up = std::exp(-(delta + 0.5) * inv_v);
    const double r_down = std::exp(-(0.5 - delta) * inv_v);
    for (int n = 1; n <= n_wrap; ++n) {
      up *= r_up * wpow;
      down *= r_down * wpow;
      wpow *= w1;
      sum += up + down;
      dsum -= ((delta + n) * up + (delta - n) * down) * inv_v;
    }
    const double norm = 1.0 / std::sqrt(kTwoPi * v);
    out.value = norm * sum;
    out.derivative = norm * dsum;
  } else {
    const double q1 = std::exp(-2.0 * kPi * kPi * v);
    const int m_max = std::max(1, static_cast<int>(std::ceil(std::sqrt(39.0 / (2.0 * kPi * kPi * v)))));
    const double c1 = std::cos(kTwoPi * delta), s1 = std::sin(kTwoPi * delta);
    double cm = 1.0, sm = 0.0, qm = 1.0, qstep = q1;  // q_m = q1^{m^2}
    double sum = 1.0, dsum = 0.0;
    for (int m = 1; m <= m_max; ++m) {
      const double cn = cm * c1 - sm * s1;
      sm = sm * c1 + cm * s1;
      cm = cn;
      qm *= qstep;
      qstep *= q1 * q1;
      sum += 2.0 * qm * cm;
      dsum -= 2.0 * kTwoPi * m * qm * sm;
    }
    out.value = sum;
    out.derivative = dsum;
  }
  return out;
}

/// Heat kernel on T^d: product over coordinates of the wrapped theta series.
inline KernelEval hk_torus(double t, const Point& x, const Point& y, const KernelTolerance& tol = {}) {
  const detail::TorusSeries s = detail::torus_series(t, x, y, tol);
  double value = 1.0;
  for (const auto& c : s.coords) value *= c.sum;
  return {value, x.size() * (2 * s.n_wrap + 1), s.tail};
}

/// Heat kernel on the unit S^2 as a function of c = <x, y>:
/// sum_l (2l+1)/(4 pi) exp(-l(l+1)t/2) P_l(c).
/// Far from x at small t the value comes from the image integral instead,
/// accurate to ~1e-13 relative.
inline KernelEval hk_sphere(double t, double c, const KernelTolerance& tol = {}) {
  detail::check_sphere_args(t, c, tol);
  if (detail::use_image_integral(t, c)) {
    const double v = std::exp(detail::sphere_image_integral(t, c).log_value);
    return {v, 64, 1e-13 * v};
  }
  const detail::SphereSeries s = detail::sphere_series(t, c, tol, false);
  return {s.value, s.terms, s.tail};
}

/// log H(t, c) and its c-derivative, accurate in relative terms everywhere.
struct SphereLogKernel {
  double log_value = 0.0;
  double dlog_dc = 0.0;
};

inline SphereLogKernel hk_sphere_log(double t, double c, const KernelTolerance& tol = {}) {
  detail::check_sphere_args(t, c, tol);
  if (detail::use_image_integral(t, c)) {
    const detail::SphereLog l = detail::sphere_image_integral(t, c);
    return {l.log_value, l.dlog_dc};
  }
  const detail::SphereSeries s = detail::sphere_series(t, c, tol, true);
  return {std::log(s.value), s.dvalue / s.value};
}

/// d/dc of the S^2 kernel.
inline double hk_sphere_dc(double t, double c, const KernelTolerance& tol = {}) {
  const SphereLogKernel l = hk_sphere_log(t, c, tol);
  return std::exp(l.log_value) * l.dlog_dc;
}

/// Mass of the geodesic cap {z : <x, z> >= c} under H(t, x, .) on S^2:
/// 1/2 (1 - c) + 1/2 sum_{l>=1} exp(-l(l+1)t/2) (P_{l-1}(c) - P_{l+1}(c)).
inline double hk_sphere_cap_mass(double t, double c, const KernelTolerance& tol = {}) {
  const detail::SphereSeries probe = detail::sphere_series(t, 1.0, tol, false);
  const int L = probe.terms - 1;
  c = std::clamp(c, -1.0, 1.0);
  double p_prev = 1.0, p_cur = c;  // P_{l-1}, P_l at l = 1
  double mass = 0.5 * (1.0 - c);
  double decay = 1.0, ratio = 1.0;
  const double step = std::exp(-t);
  for (int l = 1; l <= L; ++l) {
    ratio *= step;
    decay *= ratio;
    const double p_next = ((2.0 * l + 1.0) * c * p_cur - l * p_prev) / (l + 1.0);
    mass += 0.5 * decay * (p_prev - p_next);
    p_prev = p_cur;
    p_cur = p_next;
  }
  return std::clamp(mass, 0.0, 1.0);
}

inline KernelEval heat_kernel(const Torus&, double t, const Point& x, const Point& y,
                              const KernelTolerance& tol = {}) {
  return hk_torus(t, x, y, tol);
}

inline KernelEval heat_kernel(const Sphere& m, double t, const Point& x, const Point& y,
                              const KernelTolerance& tol = {}) {
  detail::require_s2(m);
  return hk_sphere(t, x.coords.dot(y.coords), tol);
}

/// Gradient in y of log H(t, x, y), a tangent vector at y.
inline TangentVec hk_grad_log(const Torus& m, double t, const Point& x, const Point& y,
                              const KernelTolerance& tol = {}) {
  const detail::TorusSeries s = detail::torus_series(t, x, y, tol);
  Vec g(m.dim());
  for (int j = 0; j < m.dim(); ++j) g[j] = s.coords[j].dsum / s.coords[j].sum;
  return {y, g};
}

inline TangentVec hk_grad_log(const Sphere& m, double t, const Point& x, const Point& y,
                              const KernelTolerance& tol = {}) {
  detail::require_s2(m);
  const double c = x.coords.dot(y.coords);
  return {y, hk_sphere_log(t, c, tol).dlog_dc * (x.coords - c * y.coords)};
}

/**
 * Density (w.r.t. volume) of the pushforward through exp_x of the drifted
 * Gaussian N(t * drift, t I) on T_x M:
 *   (2 pi t)^{-d/2} exp(-|log_x y - t drift|^2 / 2t) / J(x, log_x y).
 * No cutoff is applied; y must lie inside the injectivity radius of x.
 */
template <ModelManifold M>
double pushforward_gaussian(const M& m, double t, const Point& x, const Point& y, const TangentVec& drift) {
  if (!(t > 0.0)) throw DomainError("pushforward_gaussian requires t > 0");
  detail::require_same_base(x, drift);
  if (m.distance(x, y) >= m.descriptor().injectivity_radius)
    throw DomainError("pushforward_gaussian: y is outside the injectivity radius of x");
  const TangentVec u = m.log_map(x, y);
  const double sq = (u.components - t * drift.components).squaredNorm();
  const double phi = std::pow(kTwoPi * t, -0.5 * m.dim()) * std::exp(-sq / (2.0 * t));
  return phi / m.jacobian_det(x, u);
}

template <ModelManifold M>
double pushforward_gaussian(const M& m, double t, const Point& x, const Point& y) {
  return pushforward_gaussian(m, t, x, y, m.zero_tangent(x));
}

// ---------------------------------------------------------------------------
// Kernel bounds

/// Lower bound on mu(B_x(R)) for our model manifolds.
inline double ball_volume_lower(const ManifoldDescriptor& m, double radius) {
  if (m.kind == ManifoldKind::Torus) {
    const double r = std::min(radius, 0.5);
    const double omega = std::pow(kPi, m.d / 2.0) / std::tgamma(m.d / 2.0 + 1.0);
    return omega * std::pow(r, m.d);
  }
  if (m.d != 2) throw ContractError("ball volume implemented for S^2 only");
  return kTwoPi * (1.0 - std::cos(std::min(radius, kPi)));
}

/// Harnack-type lower bound (4 pi s)^{-d/2} exp(-rho^2/(4s) (1 + K s/3) - d K s/4)
/// at s = t/2.
inline double harnack_lower_bound(const ManifoldDescriptor& m, double t, double rho) {
  const double s = 0.5 * t;
  const double K = m.curvature_bound;
  return std::pow(4.0 * kPi * s, -0.5 * m.d) *
         std::exp(-rho * rho / (4.0 * s) * (1.0 + K * s / 3.0) - 0.25 * m.d * K * s);
}

inline constexpr double kLiYauDeltaSch = 1.0;
inline constexpr double kLiYauAlpha = 2.0;

/// Li-Yau type upper bound with delta_Sch = 1 and alpha = 2, at s = t/2:
/// C V(sqrt s)^{-1} exp(-rho^2 / ((4 + delta) s) + C1 delta K s),
/// C = (1 + delta)^{d alpha} e^{(1 + alpha)/delta},  C1 = alpha d / (alpha - 1).
inline double li_yau_upper_bound(const ManifoldDescriptor& m, double t, double rho) {
  const double s = 0.5 * t;
  const double dsch = kLiYauDeltaSch, alpha = kLiYauAlpha;
  const double C = std::pow(1.0 + dsch, m.d * alpha) * std::exp((1.0 + alpha) / dsch);
  const double C1 = alpha * m.d / (alpha - 1.0);
  const double vol = ball_volume_lower(m, std::sqrt(s));
  return C / vol * std::exp(-rho * rho / ((4.0 + dsch) * s) + C1 * dsch * m.curvature_bound * s);
}

struct KernelSample {
  double t = 0.0;
  Point x;
  Point y;
};

struct KernelBoundRow {
  double t = 0.0;
  double rho = 0.0;
  double kernel = 0.0;
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  bool ok = true;
};

struct KernelBoundReport {
  std::vector<KernelBoundRow> rows;
  int violations = 0;
  double delta_sch = kLiYauDeltaSch;
  double alpha = kLiYauAlpha;
};

/// Evaluates the exact kernel (times `kernel_scale`, a fault-injection hook)
/// against both bounds at every sample. A bound counts as met when it holds
/// up to the evaluator's truncation bound. Violations are counted, not thrown.
template <ModelManifold M>
KernelBoundReport check_kernel_bounds(const M& m, std::span<const KernelSample> samples, double kernel_scale = 1.0) {
  KernelBoundReport report;
  const ManifoldDescriptor desc = m.descriptor();
  for (const KernelSample& s : samples) {
    KernelBoundRow row;
    row.t = s.t;
    row.rho = m.distance(s.x, s.y);
    const KernelEval eval = heat_kernel(m, s.t, s.x, s.y);
    row.kernel = kernel_scale * eval.value;
    row.lower_bound = harnack_lower_bound(desc, s.t, row.rho);
    row.upper_bound = li_yau_upper_bound(desc, s.t, row.rho);
    const double slack = kernel_scale * eval.tail_bound + 1e-12;
    row.ok = row.kernel + slack >= row.lower_bound && row.kernel - slack <= row.upper_bound;
    if (!row.ok) ++report.violations;
    report.rows.push_back(row);
  }
  return report;
}

/// Cross product of a time grid with point pairs.
template <ModelManifold M>
KernelBoundReport check_kernel_bounds(const M& m, std::span<const double> t_grid,
                                      std::span<const std::pair<Point, Point>> pairs, double kernel_scale = 1.0) {
  std::vector<KernelSample> samples;
  for (double t : t_grid)
    for (const auto& [x, y] : pairs) samples.push_back({t, x, y});
  return check_kernel_bounds(m, std::span<const KernelSample>(samples), kernel_scale);
}

// ---------------------------------------------------------------------------
// Quadrature residuals

/// |int H(t, x, .) dmu - 1| on a Riemann grid of `grid`^d nodes (d <= 2).
inline double normalization_residual(const Torus& m, double t, const Point& x, int grid = 2048,
                                      double kernel_scale = 1.0) {
  if (m.dim() > 2) throw ContractError("torus normalization grid supports d <= 2");
  const double cell = std::pow(1.0 / grid, m.dim());
  double total = 0.0;
  Point z{Vec(m.dim())};
  if (m.dim() == 1) {
    for (int i = 0; i < grid; ++i) {
      z.coords[0] = static_cast<double>(i) / grid;
      total += hk_torus(t, x, z).value;
    }
  } else {
    for (int i = 0; i < grid; ++i)
      for (int j = 0; j < grid; ++j) {
        z.coords[0] = static_cast<double>(i) / grid;
        z.coords[1] = static_cast<double>(j) / grid;
        total += hk_torus(t, x, z).value;
      }
  }
  return std::abs(kernel_scale * total * cell - 1.0);
}

/// |2 pi int_{-1}^{1} H(t, c) dc - 1| by Gauss-Legendre in c.
inline double normalization_residual(const Sphere& m, double t, int nodes = 128, double kernel_scale = 1.0) {
  detail::require_s2(m);
  const QuadratureRule rule = gauss_legendre(nodes);
  double total = 0.0;
  for (int i = 0; i < nodes; ++i) total += rule.weights[i] * hk_sphere(t, rule.nodes[i]).value;
  return std::abs(kernel_scale * kTwoPi * total - 1.0);
}

/// |int H(s, x, z) H(t, z, y) dz - H(s + t, x, y)| on T^1 (Riemann grid).
inline double semigroup_residual(const Torus& m, double s, double t, const Point& x, const Point& y,
                                 int grid = 2048, double kernel_scale = 1.0) {
  if (m.dim() != 1) throw ContractError("torus semigroup check supports d = 1");
  double total = 0.0;
  Point z{Vec(1)};
  for (int i = 0; i < grid; ++i) {
    z.coords[0] = static_cast<double>(i) / grid;
    total += hk_torus(s, x, z).value * hk_torus(t, z, y).value;
  }
  const double lhs = kernel_scale * kernel_scale * total / grid;
  return std::abs(lhs - kernel_scale * hk_torus(s + t, x, y).value);
}

/// Same on S^2: Gauss-Legendre in c = <x, z> times the trapezoid rule in the
/// azimuth around x.
inline double semigroup_residual(const Sphere& m, double s, double t, const Point& x, const Point& y,
                                 int nodes = 96, double kernel_scale = 1.0) {
  detail::require_s2(m);
  const QuadratureRule rule = gauss_legendre(nodes);
  const Frame f = m.orthonormal_frame(x);
  const int n_phi = 2 * nodes;
  double total = 0.0;
  for (int i = 0; i < nodes; ++i) {
    const double c = rule.nodes[i];
    const double r = std::sqrt(std::max(0.0, 1.0 - c * c));
    const double inner = hk_sphere(s, c).value;
    double ring = 0.0;
    for (int k = 0; k < n_phi; ++k) {
      const double phi = kTwoPi * k / n_phi;
      const Vec z = c * x.coords + r * (std::cos(phi) * f.columns.col(0) + std::sin(phi) * f.columns.col(1));
      ring += hk_sphere(t, z.dot(y.coords)).value;
    }
    total += rule.weights[i] * inner * ring * (kTwoPi / n_phi);
  }
  const double lhs = kernel_scale * kernel_scale * total;
  return std::abs(lhs - kernel_scale * hk_sphere(s + t, x.coords.dot(y.coords)).value);
}

}  // namespace rsgm
