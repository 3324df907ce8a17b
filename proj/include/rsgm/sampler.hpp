#pragma once

// Reverse-time RSGM sampler with the h^{1/4} rejection rule, and forward
// (noising) samplers used to produce reference data.

#include "rsgm/manifold.hpp"
#include "rsgm/parallel.hpp"
#include "rsgm/rng.hpp"
#include "rsgm/targets.hpp"

#include <cassert>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rsgm {

struct SamplerConfig {
  double T = 2.0;
  double delta = 1e-2;
  int N = 200;
  FramePolicy frame_policy = FramePolicy::Canonical;
  std::uint64_t seed = 0;
  ScorePerturbation perturbation;

  double h() const { return (T - delta) / N; }

  /// Reverse-grid time t_k = delta + k h.
  double time_at(int k) const { return delta + k * h(); }

  void validate(const ManifoldDescriptor& m) const {
    if (!(delta > 0.0)) throw ContractError("sampler delta must be > 0");
    if (!(T > delta)) throw ContractError("sampler requires delta < T");
    if (N < 1) throw ContractError("sampler requires N >= 1");
    if (!(h() > 0.0)) throw ContractError("sampler step size must be > 0");
    if (m.kind == ManifoldKind::Sphere && delta < 1e-3)
      throw ContractError("sphere sampling requires delta >= 1e-3 (kernel floor)");
    if (perturbation.amplitude < 0.0) throw ContractError("perturbation amplitude must be >= 0");
  }
};

struct RunRecord {
  Point terminal;
  int resets = 0;
  std::vector<int> reset_steps;  // step indices k at which Y_{k-1} was redrawn
  double eps_score_realized = 0.0;
};

struct StepResult {
  Point next;
  bool rejected = false;
};

/**
 * One reverse step from Y_k:
 *   Delta = h b + sqrt(h) U xi,  b = score(t_k, Y_k),  xi ~ N(0, I_d),
 * accepted as exp_{Y_k}(Delta) when |Delta| <= h^{1/4}, otherwise replaced
 * by a fresh uniform draw.
 */
template <ModelManifold M, class ScoreField>
StepResult rsgm_step(const M& m, const Point& y, double t_k, double h, ScoreField&& score, FramePolicy policy,
                     Rng& rng) {
  const Frame frame = m.orthonormal_frame(y, policy, rng);
  Vec xi(m.dim());
  for (int i = 0; i < m.dim(); ++i) xi[i] = rng.normal();
  const TangentVec b = score(t_k, y);
  const TangentVec update{y, h * b.components + std::sqrt(h) * (frame.columns * xi)};
  const double radius = std::pow(h, 0.25);
  if (update.norm() <= radius) {
    Point next = m.exp_map(y, update);
    assert(m.distance(y, next) <= radius + 1e-12);
    return {std::move(next), false};
  }
  return {m.uniform_sample(rng), true};
}

/// Full reverse chain: Y_N ~ mu, then k = N, ..., 1 with t_k = delta + k h.
/// `exact_score` is perturbed by cfg.perturbation; the realized
/// sqrt(sum_k h |eps(t_k, Y_k)|^2) is recorded.
template <ModelManifold M, class ScoreField>
RunRecord rsgm_sample_field(const M& m, ScoreField&& exact_score, const SamplerConfig& cfg, Rng& rng) {
  const double h = cfg.h();
  RunRecord rec;
  Point y = m.uniform_sample(rng);
  double eps_sq = 0.0;
  for (int k = cfg.N; k >= 1; --k) {
    const double t_k = cfg.time_at(k);
    TangentVec b = exact_score(t_k, y);
    if (cfg.perturbation.active()) {
      const TangentVec eps = perturbation_field(m, cfg.perturbation, t_k, y);
      b.components += eps.components;
      eps_sq += h * eps.squared_norm();
    }
    StepResult step = rsgm_step(m, y, t_k, h, [&b](double, const Point&) -> const TangentVec& { return b; },
                                cfg.frame_policy, rng);
    if (step.rejected) {
      ++rec.resets;
      rec.reset_steps.push_back(k);
    }
    y = std::move(step.next);
  }
  rec.terminal = std::move(y);
  rec.eps_score_realized = std::sqrt(eps_sq);
  return rec;
}

/// Stream id of trajectory `i` in a plain sampling run.
inline std::uint64_t trajectory_stream(std::uint64_t i) { return derive_stream({0x5A4D, i}); }

/// Sample one trajectory with exact target scores on its own RNG stream.
template <ModelManifold M, class Target>
RunRecord rsgm_sample(const M& m, const Target& target, const SamplerConfig& cfg, std::uint64_t trajectory = 0) {
  if (!(target.manifold().descriptor() == m.descriptor()))
    throw ContractError("target lives on " + target.manifold().descriptor().tag() + ", not " + m.descriptor().tag());
  cfg.validate(m.descriptor());
  Rng rng(cfg.seed, trajectory_stream(trajectory));
  return rsgm_sample_field(m, [&target](double t, const Point& x) { return score_t(target, t, x); }, cfg, rng);
}

/// M independent trajectories; record i uses stream trajectory_stream(i).
template <ModelManifold M, class Target>
std::vector<RunRecord> rsgm_sample_many(const M& m, const Target& target, const SamplerConfig& cfg, std::size_t count,
                                        unsigned threads = 1) {
  cfg.validate(m.descriptor());
  std::vector<RunRecord> out(count);
  parallel_for(count, threads, [&](std::size_t i) { out[i] = rsgm_sample(m, target, cfg, i); });
  return out;
}

// ---------------------------------------------------------------------------
// Forward process dX = U o dW (generator 1/2 Laplacian)

/// Exact on the torus: covering-space Gaussian increment N(0, t I) mod 1.
template <class Target>
Point forward_sample(const Torus& m, const Target& target, double t, Rng& rng, double = 0.0) {
  if (!(t >= 0.0)) throw DomainError("forward_sample requires t >= 0");
  Point x = sample_p0(target, rng);
  if (t == 0.0) return x;
  const double s = std::sqrt(t);
  Vec v = x.coords;
  for (int j = 0; j < m.dim(); ++j) v[j] += s * rng.normal();
  return m.point(v);
}

/// Geodesic random walk on the sphere: ceil(t / substep) steps of
/// exp_x(sqrt(t/m) U xi). Bias is O(substep); substep 0 means t / 1000.
template <class Target>
Point forward_sample(const Sphere& m, const Target& target, double t, Rng& rng, double substep) {
  if (!(t >= 0.0)) throw DomainError("forward_sample requires t >= 0");
  if (substep < 0.0) throw ContractError("sphere forward sampling requires substep >= 0");
  Point x = sample_p0(target, rng);
  if (t == 0.0) return x;
  if (substep == 0.0) substep = t / 1000.0;
  const int steps = static_cast<int>(std::ceil(t / substep));
  const double s = std::sqrt(t / steps);
  Vec xi(m.dim());
  for (int k = 0; k < steps; ++k) {
    const Frame f = m.orthonormal_frame(x);
    for (int i = 0; i < m.dim(); ++i) xi[i] = rng.normal();
    x = m.exp_map(x, f.lift(s * xi));
  }
  return x;
}

/// `count` forward samples at time t; sample i uses stream derive(tag, i).
template <ModelManifold M, class Target>
std::vector<Point> forward_sample_many(const M& m, const Target& target, double t, std::size_t count,
                                       std::uint64_t seed, double substep = 0.0, unsigned threads = 1) {
  std::vector<Point> out(count);
  parallel_for(count, threads, [&](std::size_t i) {
    Rng rng(seed, derive_stream({0xF0F0, i}));
    out[i] = forward_sample(m, target, t, rng, substep);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Reset-probability experiment

struct ResetExperimentConfig {
  std::vector<double> h_list;
  double T = 2.0;
  double delta = 1e-2;
  std::size_t trajectories = 100000;
  std::uint64_t seed = 0;
  std::optional<int> steps;  // fixed step count; otherwise round((T - delta) / h)
  FramePolicy frame_policy = FramePolicy::Canonical;
  ScorePerturbation perturbation;
  double score_scale = 1.0;  // multiplies the exact score (drift-monotonicity studies)
  unsigned threads = 1;
};

struct ResetRow {
  double h = 0.0;
  int N = 0;
  std::size_t trajectories = 0;
  std::size_t runs_with_reset = 0;
  std::size_t total_resets = 0;
  double reset_fraction = 0.0;
  double standard_error = 0.0;  // binomial standard error of reset_fraction
  double per_step_rate = 0.0;

  double inv_sqrt_h() const { return 1.0 / std::sqrt(h); }
};

/// Step count used for step size h: the fixed count if given, otherwise the
/// nearest integer to (T - delta) / h. h itself is kept exact, so the
/// horizon actually simulated is delta + N h.
inline int reset_steps_for(const ResetExperimentConfig& cfg, double h) {
  if (cfg.steps) return *cfg.steps;
  return std::max(1, static_cast<int>(std::lround((cfg.T - cfg.delta) / h)));
}

/**
 * For each h: M independent chains with exact scores; reset_fraction is the
 * share of chains with at least one reset. Trajectory i at h-index j uses
 * stream derive_stream({j, i}), and counts are reduced in index order, so the
 * table does not depend on the thread count.
 */
template <ModelManifold M, class Target>
std::vector<ResetRow> reset_probability_experiment(const M& m, const Target& target,
                                                   const ResetExperimentConfig& cfg) {
  if (cfg.trajectories < 1000) throw ContractError("reset experiment requires at least 1000 trajectories");
  if (cfg.h_list.empty()) throw ContractError("reset experiment requires a non-empty h list");
  std::vector<ResetRow> rows;
  for (std::size_t hi = 0; hi < cfg.h_list.size(); ++hi) {
    const double h = cfg.h_list[hi];
    if (!(h > 0.0)) throw ContractError("step sizes must be positive");
    SamplerConfig sc;
    sc.N = reset_steps_for(cfg, h);
    sc.delta = cfg.delta;
    sc.T = cfg.delta + sc.N * h;
    sc.frame_policy = cfg.frame_policy;
    sc.seed = cfg.seed;
    sc.perturbation = cfg.perturbation;
    sc.validate(m.descriptor());

    const auto chunks = fixed_chunks(cfg.trajectories, 512);
    std::vector<std::size_t> with_reset(chunks.size()), resets(chunks.size());
    parallel_for(chunks.size(), cfg.threads, [&](std::size_t c) {
      for (std::size_t i = chunks[c].begin; i < chunks[c].end; ++i) {
        Rng rng(cfg.seed, derive_stream({hi, i}));
        const RunRecord rec = rsgm_sample_field(
            m,
            [&](double t, const Point& x) {
              TangentVec s = score_t(target, t, x);
              if (cfg.score_scale != 1.0) s.components *= cfg.score_scale;
              return s;
            },
            sc, rng);
        with_reset[c] += rec.resets > 0 ? 1 : 0;
        resets[c] += rec.resets;
      }
    });
    ResetRow row;
    row.h = h;
    row.N = sc.N;
    row.trajectories = cfg.trajectories;
    for (std::size_t c = 0; c < chunks.size(); ++c) {
      row.runs_with_reset += with_reset[c];
      row.total_resets += resets[c];
    }
    const double n = static_cast<double>(cfg.trajectories);
    row.reset_fraction = row.runs_with_reset / n;
    row.standard_error = std::sqrt(row.reset_fraction * (1.0 - row.reset_fraction) / n);
    row.per_step_rate = row.total_resets / (n * sc.N);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace rsgm
