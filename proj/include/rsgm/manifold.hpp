#pragma once

#include "rsgm/rng.hpp"
#include "rsgm/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <numeric>
#include <string>
#include <variant>

namespace rsgm {

enum class ManifoldKind { Torus, Sphere };

/// Which model manifold, and the intrinsic constants the analysis refers to.
struct ManifoldDescriptor {
  ManifoldKind kind = ManifoldKind::Torus;
  int d = 1;
  double injectivity_radius = 0.5;
  double curvature_bound = 0.0;
  double spectral_gap = 4.0 * kPi * kPi;

  /// Flat torus [0,1)^d with unit circumference per axis.
  static ManifoldDescriptor torus(int d) {
    if (d < 1 || d > kMaxAmbientDim) throw ContractError("torus dimension out of range: " + std::to_string(d));
    return {ManifoldKind::Torus, d, 0.5, 0.0, 4.0 * kPi * kPi};
  }

  /// Unit sphere S^d embedded in R^{d+1}.
  static ManifoldDescriptor sphere(int d) {
    if (d < 1 || d + 1 > kMaxAmbientDim) throw ContractError("sphere dimension out of range: " + std::to_string(d));
    return {ManifoldKind::Sphere, d, kPi, 1.0, static_cast<double>(d)};
  }

  int ambient_dim() const { return kind == ManifoldKind::Torus ? d : d + 1; }

  /// "torus2", "sphere2", ...
  std::string tag() const { return (kind == ManifoldKind::Torus ? "torus" : "sphere") + std::to_string(d); }

  friend bool operator==(const ManifoldDescriptor&, const ManifoldDescriptor&) = default;
};

/// Chart coordinates: [0,1)^d on the torus, a unit vector on the sphere.
struct Point {
  Vec coords;

  int size() const { return static_cast<int>(coords.size()); }
  friend bool operator==(const Point& a, const Point& b) { return a.coords == b.coords; }
};

/// Tangent vector with its base point recorded. Torus components are in the
/// coordinate frame; sphere components are ambient and orthogonal to base.
struct TangentVec {
  Point base;
  Vec components;

  double norm() const { return components.norm(); }
  double squared_norm() const { return components.squaredNorm(); }
};

/// d orthonormal tangent vectors at `base`, stored as ambient columns.
struct Frame {
  Point base;
  FrameMatrix columns;

  TangentVec lift(const Vec& xi) const { return {base, columns * xi}; }
};

enum class FramePolicy { Canonical, RandomRotation };

namespace detail {

inline double wrap_unit(double x) {
  double r = x - std::floor(x);
  return r >= 1.0 ? 0.0 : r;
}

/// Representative of x in (-1/2, 1/2]; an exact half period maps to +1/2.
inline double wrap_half(double x) {
  double r = x - std::floor(x);  // [0, 1]
  if (r > 0.5) r -= 1.0;
  return r;
}

inline void require_same_base(const Point& x, const TangentVec& v) {
  if (x.coords.size() != v.base.coords.size() || (x.coords - v.base.coords).cwiseAbs().maxCoeff() > 1e-12)
    throw ContractError("tangent vector is not based at the given point");
}

/// Uniformly random element of SO(d): QR of a Gaussian matrix with the
/// sign convention that makes Q Haar distributed, then a column flip to
/// land in the identity component.
inline FrameMatrix random_rotation(int d, Rng& rng) {
  FrameMatrix g(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<FrameMatrix> qr(g);
  FrameMatrix q = qr.householderQ();
  FrameMatrix r = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  if (q.determinant() < 0) q.col(0) *= -1.0;
  return q;
}

}  // namespace detail

/// Flat torus T^d = R^d / Z^d.
class Torus {
 public:
  explicit Torus(int d) : desc_(ManifoldDescriptor::torus(d)) {}

  int dim() const { return desc_.d; }
  int ambient_dim() const { return desc_.d; }
  const ManifoldDescriptor& descriptor() const { return desc_; }

  /// Builds a point, reducing every coordinate modulo 1.
  Point point(const Vec& coords) const {
    check_size(coords);
    Point p{coords};
    for (int i = 0; i < p.size(); ++i) p.coords[i] = detail::wrap_unit(p.coords[i]);
    return p;
  }

  TangentVec tangent(const Point& x, const Vec& components) const {
    check_size(components);
    return {x, components};
  }

  TangentVec zero_tangent(const Point& x) const { return {x, Vec::Zero(dim())}; }

  Point exp_map(const Point& x, const TangentVec& v) const {
    detail::require_same_base(x, v);
    Point y{x.coords + v.components};
    for (int i = 0; i < y.size(); ++i) y.coords[i] = detail::wrap_unit(y.coords[i]);
    return y;
  }

  /// Shortest wrapped difference, each coordinate in (-1/2, 1/2].
  TangentVec log_map(const Point& x, const Point& y) const {
    Vec diff(dim());
    for (int i = 0; i < dim(); ++i) diff[i] = detail::wrap_half(y.coords[i] - x.coords[i]);
    return {x, diff};
  }

  double distance(const Point& x, const Point& y) const {
    double s = 0.0;
    for (int i = 0; i < dim(); ++i) {
      const double dlt = detail::wrap_half(y.coords[i] - x.coords[i]);
      s += dlt * dlt;
    }
    return std::sqrt(s);
  }

  Frame orthonormal_frame(const Point& x) const { return {x, FrameMatrix::Identity(dim(), dim())}; }

  Frame orthonormal_frame(const Point& x, FramePolicy policy, Rng& rng) const {
    if (policy == FramePolicy::Canonical) return orthonormal_frame(x);
    return {x, detail::random_rotation(dim(), rng)};
  }

  Point uniform_sample(Rng& rng) const {
    Point p{Vec(dim())};
    for (int i = 0; i < dim(); ++i) p.coords[i] = rng.uniform();
    return p;
  }

  double jacobian_det(const Point& x, const TangentVec& u) const {
    detail::require_same_base(x, u);
    return 1.0;
  }

  double volume() const { return 1.0; }

 private:
  void check_size(const Vec& v) const {
    if (v.size() != dim()) throw ContractError("expected " + std::to_string(dim()) + " torus coordinates");
  }

  ManifoldDescriptor desc_;
};

/// Unit sphere S^d in R^{d+1}.
class Sphere {
 public:
  explicit Sphere(int d) : desc_(ManifoldDescriptor::sphere(d)) {}

  int dim() const { return desc_.d; }
  int ambient_dim() const { return desc_.d + 1; }
  const ManifoldDescriptor& descriptor() const { return desc_; }

  /// Builds a point from a unit vector (|norm - 1| <= 1e-12 required).
  Point point(const Vec& coords) const {
    check_size(coords);
    if (std::abs(coords.norm() - 1.0) > 1e-12) throw ContractError("sphere point must have unit norm");
    return {coords};
  }

  /// Radial projection of a nonzero vector onto the sphere.
  Point project(const Vec& v) const {
    check_size(v);
    const double n = v.norm();
    if (!(n > 0.0)) throw ContractError("cannot project the zero vector onto the sphere");
    return {v / n};
  }

  TangentVec tangent(const Point& x, const Vec& components) const {
    check_size(components);
    if (std::abs(x.coords.dot(components)) > 1e-10 * std::max(1.0, components.norm()))
      throw ContractError("sphere tangent vector is not orthogonal to its base point");
    return {x, components};
  }

  /// Orthogonal projection of an ambient vector onto T_x S^d.
  TangentVec project_tangent(const Point& x, const Vec& ambient) const {
    return {x, ambient - x.coords.dot(ambient) * x.coords};
  }

  TangentVec zero_tangent(const Point& x) const { return {x, Vec::Zero(ambient_dim())}; }

  Point exp_map(const Point& x, const TangentVec& v) const {
    detail::require_same_base(x, v);
    const double r = v.norm();
    if (r == 0.0) return x;
    Vec y = std::cos(r) * x.coords + (std::sin(r) / r) * v.components;
    return {y / y.norm()};
  }

  TangentVec log_map(const Point& x, const Point& y) const {
    const double c = x.coords.dot(y.coords);
    Vec w = y.coords - c * x.coords;
    const double s = w.norm();
    if (s == 0.0) {
      if (c > 0.0) return zero_tangent(x);
      throw DomainError("log_map: antipodal points are at the injectivity radius");
    }
    const double theta = std::atan2(s, c);
    return {x, (theta / s) * w};
  }

  /// acos of the dot product loses half the digits for nearby points; this
  /// form is accurate across [0, pi].
  double distance(const Point& x, const Point& y) const {
    return 2.0 * std::atan2((x.coords - y.coords).norm(), (x.coords + y.coords).norm());
  }

  /// Completes x to an orthonormal ambient basis: standard basis vectors are
  /// taken in order of increasing |x_i| and Gram-Schmidt orthogonalized
  /// against x and each other; the first d survivors are the frame.
  Frame orthonormal_frame(const Point& x) const {
    const int n = ambient_dim();
    std::array<int, kMaxAmbientDim> order{};
    std::iota(order.begin(), order.begin() + n, 0);
    std::stable_sort(order.begin(), order.begin() + n,
                     [&](int a, int b) { return std::abs(x.coords[a]) < std::abs(x.coords[b]); });
    FrameMatrix cols(n, dim());
    int filled = 0;
    for (int k = 0; k < n && filled < dim(); ++k) {
      Vec e = Vec::Zero(n);
      e[order[k]] = 1.0;
      // Two passes of Gram-Schmidt keep the Gram matrix at machine precision.
      for (int pass = 0; pass < 2; ++pass) {
        e -= x.coords.dot(e) * x.coords;
        for (int j = 0; j < filled; ++j) e -= cols.col(j).dot(e) * cols.col(j);
      }
      const double nrm = e.norm();
      if (nrm < 1e-8) continue;
      cols.col(filled++) = e / nrm;
    }
    return {x, cols};
  }

  Frame orthonormal_frame(const Point& x, FramePolicy policy, Rng& rng) const {
    Frame f = orthonormal_frame(x);
    if (policy == FramePolicy::RandomRotation) f.columns = f.columns * detail::random_rotation(dim(), rng);
    return f;
  }

  Point uniform_sample(Rng& rng) const {
    Vec g(ambient_dim());
    double n = 0.0;
    do {
      for (int i = 0; i < ambient_dim(); ++i) g[i] = rng.normal();
      n = g.norm();
    } while (n < 1e-300);
    return {g / n};
  }

  /// (sin r / r)^{d-1}, r = |u|.
  double jacobian_det(const Point& x, const TangentVec& u) const {
    detail::require_same_base(x, u);
    const double r = u.norm();
    if (r < 1e-8) return 1.0 - (dim() - 1) * r * r / 6.0;
    return std::pow(std::sin(r) / r, dim() - 1);
  }

  /// Surface area of S^d.
  double volume() const {
    const double n = ambient_dim();
    return 2.0 * std::pow(kPi, n / 2.0) / std::tgamma(n / 2.0);
  }

 private:
  void check_size(const Vec& v) const {
    if (v.size() != ambient_dim())
      throw ContractError("expected " + std::to_string(ambient_dim()) + " ambient sphere coordinates");
  }

  ManifoldDescriptor desc_;
};

template <class M>
concept ModelManifold = requires(const M& m, const Point& x, const TangentVec& v, Rng& rng, FramePolicy p) {
  { m.dim() } -> std::convertible_to<int>;
  { m.descriptor() } -> std::convertible_to<ManifoldDescriptor>;
  { m.exp_map(x, v) } -> std::same_as<Point>;
  { m.log_map(x, x) } -> std::same_as<TangentVec>;
  { m.distance(x, x) } -> std::convertible_to<double>;
  { m.orthonormal_frame(x, p, rng) } -> std::same_as<Frame>;
  { m.uniform_sample(rng) } -> std::same_as<Point>;
  { m.jacobian_det(x, v) } -> std::convertible_to<double>;
};

static_assert(ModelManifold<Torus>);
static_assert(ModelManifold<Sphere>);

using AnyManifold = std::variant<Torus, Sphere>;

inline AnyManifold make_manifold(const ManifoldDescriptor& desc) {
  if (desc.kind == ManifoldKind::Torus) return Torus(desc.d);
  return Sphere(desc.d);
}

// Free-function spellings of the manifold operations.

template <ModelManifold M>
Point exp_map(const M& m, const Point& x, const TangentVec& v) { return m.exp_map(x, v); }

template <ModelManifold M>
TangentVec log_map(const M& m, const Point& x, const Point& y) { return m.log_map(x, y); }

template <ModelManifold M>
double distance(const M& m, const Point& x, const Point& y) { return m.distance(x, y); }

template <ModelManifold M>
double jacobian_det(const M& m, const Point& x, const TangentVec& u) { return m.jacobian_det(x, u); }

}  // namespace rsgm
