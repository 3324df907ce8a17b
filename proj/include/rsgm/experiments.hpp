#pragma once

// Config-driven experiment runners. Each writes one CSV per output (plus an
// optional JSON mirror) whose header echoes the resolved config.

#include "rsgm/config.hpp"
#include "rsgm/csv.hpp"
#include "rsgm/estimators.hpp"
#include "rsgm/heat_kernel.hpp"
#include "rsgm/sampler.hpp"

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#ifndef RSGM_VERSION
#define RSGM_VERSION "0.0.0"
#endif

namespace rsgm {

inline constexpr std::string_view kVersion = RSGM_VERSION;

struct RunOptions {
  unsigned threads = 1;
  bool json = false;
  std::ostream* progress = nullptr;  // progress lines; nullptr for silence
};

struct RunResult {
  std::vector<std::string> files;
  std::vector<Table> tables;
  bool checks_passed = true;  // false when validate-kernels finds a violation
};

namespace detail {

inline void progress(const RunOptions& o, const std::string& line) {
  if (o.progress) *o.progress << line << std::endl;
}

inline std::vector<std::string> header_lines(const ExperimentConfig& c) {
  return {"rsgm " + std::string(kVersion), std::string(kConfigHeaderPrefix.substr(2)) + resolved_json(c).dump(),
          "seed: " + std::to_string(c.seed)};
}

/// `out.csv` -> `out_torus2.csv` for experiments writing one file per manifold.
inline std::string suffixed_path(const std::string& path, const std::string& tag) {
  const std::filesystem::path p(path);
  std::filesystem::path q = p.parent_path() / (p.stem().string() + "_" + tag + p.extension().string());
  return q.string();
}

inline std::string json_path(const std::string& csv_path) {
  std::filesystem::path p(csv_path);
  p.replace_extension(".json");
  return p.string();
}

inline void emit(RunResult& result, const RunOptions& o, const std::string& path, Table table) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  write_text(path, table.to_csv());
  result.files.push_back(path);
  if (o.json) {
    write_text(json_path(path), table.to_json().dump(2) + "\n");
    result.files.push_back(json_path(path));
  }
  result.tables.push_back(std::move(table));
}

/// Calls fn(manifold, target) with the concrete types of `entry`.
template <class Fn>
decltype(auto) with_target(const ManifoldEntry& entry, Fn&& fn) {
  return std::visit([&](const auto& target) { return fn(target.manifold(), target); }, entry.target);
}

}  // namespace detail

/// Reset-fraction table per manifold, with a log-linear fit against h^{-1/2}.
inline RunResult run_exit_prob(const ExperimentConfig& c, const RunOptions& o = {}) {
  if (c.experiment != Experiment::ExitProb) throw ContractError("run_exit_prob: wrong experiment");
  RunResult result;
  for (const ManifoldEntry& entry : c.manifolds) {
    const std::string tag = entry.manifold.tag();
    detail::progress(o, "exit-prob: " + tag);
    const std::vector<ResetRow> rows = detail::with_target(entry, [&](const auto& m, const auto& target) {
      ResetExperimentConfig rc;
      rc.h_list = c.h_list;
      rc.T = c.sampler.T;
      rc.delta = c.sampler.delta;
      rc.trajectories = c.trajectories;
      rc.seed = c.seed;
      rc.steps = c.steps;
      rc.frame_policy = c.sampler.frame_policy;
      rc.perturbation = c.sampler.perturbation;
      rc.score_scale = c.score_scale;
      rc.threads = o.threads;
      return reset_probability_experiment(m, target, rc);
    });

    Table t;
    t.comments = detail::header_lines(c);
    std::string steps = "steps:";
    for (const ResetRow& r : rows) steps += " " + std::to_string(r.N);
    t.comments.push_back(steps);
    t.columns = {"manifold", "d", "h", "inv_sqrt_h", "reset_fraction", "stderr", "M", "seed"};
    std::vector<double> xs, ys;
    for (const ResetRow& r : rows) {
      t.add_row({tag, std::int64_t{entry.manifold.d}, r.h, r.inv_sqrt_h(), r.reset_fraction, r.standard_error,
                 std::uint64_t{r.trajectories}, c.seed});
      xs.push_back(r.inv_sqrt_h());
      ys.push_back(r.reset_fraction);
    }
    try {
      const FitResult fit = loglinear_fit(xs, ys);
      t.trailer.push_back("fit: slope=" + format_double(fit.slope) + " intercept=" + format_double(fit.intercept) +
                          " r_squared=" + format_double(fit.r_squared) + " used=" + std::to_string(fit.used) +
                          " dropped=" + std::to_string(fit.dropped));
    } catch (const ContractError& e) {
      t.trailer.push_back(std::string("fit: unavailable (") + e.what() + ")");
    }
    detail::emit(result, o, detail::suffixed_path(c.output_path, tag), std::move(t));
  }
  return result;
}

/// TV between the sampler output KDE and p_delta for each N, plus the KDE
/// noise floor of an exact p_delta sample of the same size.
inline RunResult run_tv_sweep(const ExperimentConfig& c, const RunOptions& o = {}) {
  if (c.experiment != Experiment::TVSweep) throw ContractError("run_tv_sweep: wrong experiment");
  const ManifoldEntry& entry = c.manifolds.front();
  if (entry.manifold.kind != ManifoldKind::Torus || entry.manifold.d > 3)
    throw ContractError("tv-sweep supports tori with d <= 3");
  RunResult result;
  Table t;
  t.comments = detail::header_lines(c);
  t.columns = {"d", "N", "h", "n_samples", "tv_unhalved", "kde_bandwidth", "grid_resolution", "seed"};

  detail::with_target(entry, [&](const auto& m, const auto& target) {
    const GridSpec grid = GridSpec::torus(m.dim(), c.kde.grid_resolution);
    const double delta = c.sampler.delta;
    const GridDensity truth = tabulate(grid, [&](const Point& x) { return density_t(target, delta, x); }, o.threads);
    const Bandwidth bw = c.kde.bandwidth ? Bandwidth::fixed(*c.kde.bandwidth) : Bandwidth::scott();
    auto tv_of = [&](std::vector<Point> pts, Bandwidth b) {
      const PeriodicKDE kde = kde_fit(std::move(pts), b);
      return std::pair{tv_distance(kde_on_grid(kde, grid.resolution, o.threads), truth), kde.bandwidth};
    };

    double last_bandwidth = 0.0;
    for (int N : c.N_list) {
      detail::progress(o, "tv-sweep: N=" + std::to_string(N));
      SamplerConfig sc = c.sampler;
      sc.N = N;
      const std::vector<RunRecord> recs = rsgm_sample_many(m, target, sc, c.trajectories, o.threads);
      std::vector<Point> pts;
      pts.reserve(recs.size());
      for (const RunRecord& r : recs) pts.push_back(r.terminal);
      const auto [tv, h_kde] = tv_of(std::move(pts), bw);
      last_bandwidth = h_kde;
      t.add_row({std::int64_t{m.dim()}, std::int64_t{N}, sc.h(), std::uint64_t{c.trajectories}, tv, h_kde,
                 std::int64_t{grid.resolution}, c.seed});
    }
    if (c.noise_floor) {
      detail::progress(o, "tv-sweep: noise floor");
      std::vector<Point> exact = forward_sample_many(m, target, delta, c.trajectories, c.seed, 0.0, o.threads);
      const auto [floor, h_kde] = tv_of(std::move(exact), Bandwidth::fixed(last_bandwidth));
      t.trailer.push_back("noise_floor: tv_unhalved=" + format_double(floor) + " kde_bandwidth=" +
                          format_double(h_kde) + " n_samples=" + std::to_string(c.trajectories));
    }
  });
  detail::emit(result, o, c.output_path, std::move(t));
  return result;
}

/// M terminal points with their reset counts and realized score error.
inline RunResult run_sample(const ExperimentConfig& c, const RunOptions& o = {}) {
  if (c.experiment != Experiment::Sample) throw ContractError("run_sample: wrong experiment");
  const ManifoldEntry& entry = c.manifolds.front();
  RunResult result;
  Table t;
  t.comments = detail::header_lines(c);
  t.comments.push_back("h: " + format_double(c.sampler.h()));
  t.columns = {"run_id"};
  for (int i = 0; i < entry.manifold.ambient_dim(); ++i) t.columns.push_back("x" + std::to_string(i));
  t.columns.push_back("resets");
  t.columns.push_back("eps_score_realized");
  detail::progress(o, "sample: " + std::to_string(c.trajectories) + " trajectories on " + entry.manifold.tag());
  const std::vector<RunRecord> recs = detail::with_target(entry, [&](const auto& m, const auto& target) {
    return rsgm_sample_many(m, target, c.sampler, c.trajectories, o.threads);
  });
  for (std::size_t i = 0; i < recs.size(); ++i) {
    std::vector<Cell> row{std::uint64_t{i}};
    for (int k = 0; k < recs[i].terminal.size(); ++k) row.emplace_back(recs[i].terminal.coords[k]);
    row.emplace_back(std::int64_t{recs[i].resets});
    row.emplace_back(recs[i].eps_score_realized);
    t.add_row(std::move(row));
  }
  detail::emit(result, o, c.output_path, std::move(t));
  return result;
}

namespace detail {

template <ModelManifold M>
std::vector<std::pair<Point, Point>> kernel_check_pairs(const M& m, int count, std::uint64_t seed) {
  std::vector<std::pair<Point, Point>> pairs;
  Rng rng(seed, derive_stream({0x4B45524E}));
  const Point x0 = m.uniform_sample(rng);
  pairs.push_back({x0, x0});
  for (int i = 1; i < count; ++i) {
    const Point x = m.uniform_sample(rng);
    pairs.push_back({x, m.uniform_sample(rng)});
  }
  return pairs;
}

inline double normalization_check(const Torus& m, double t, const Point& x, double scale) {
  return normalization_residual(m, t, x, m.dim() == 1 ? 2048 : 512, scale);
}
inline double normalization_check(const Sphere& m, double t, const Point&, double scale) {
  return normalization_residual(m, t, 128, scale);
}

}  // namespace detail

/// Bound-check rows per manifold; normalization, semigroup and symmetry
/// residuals go in the trailer. checks_passed is false on any failure.
inline RunResult run_validate_kernels(const ExperimentConfig& c, const RunOptions& o = {}) {
  if (c.experiment != Experiment::ValidateKernels) throw ContractError("run_validate_kernels: wrong experiment");
  RunResult result;
  for (const ManifoldEntry& entry : c.manifolds) {
    const std::string tag = entry.manifold.tag();
    detail::progress(o, "validate-kernels: " + tag);
    Table t;
    t.comments = detail::header_lines(c);
    t.columns = {"t", "rho_or_delta", "kernel", "lower_bound", "upper_bound", "ok"};
    bool passed = true;
    const AnyManifold any = make_manifold(entry.manifold);
    std::visit(
        [&](const auto& m) {
          const double scale = c.kernels.kernel_scale;
          const auto pairs = detail::kernel_check_pairs(m, c.kernels.pairs, c.seed);
          const KernelBoundReport report = check_kernel_bounds(
              m, std::span<const double>(c.kernels.t_grid), std::span<const std::pair<Point, Point>>(pairs), scale);
          for (const KernelBoundRow& r : report.rows)
            t.add_row({r.t, r.rho, r.kernel, r.lower_bound, r.upper_bound, r.ok});
          passed = passed && report.violations == 0;
          t.trailer.push_back("bound_violations: " + std::to_string(report.violations) +
                              " delta_sch=" + format_double(report.delta_sch) +
                              " alpha=" + format_double(report.alpha));

          for (double tt : c.kernels.t_grid) {
            const double res = detail::normalization_check(m, tt, pairs.front().first, scale);
            const bool ok = res <= c.kernels.normalization_tol;
            passed = passed && ok;
            t.trailer.push_back("normalization: t=" + format_double(tt) + " residual=" + format_double(res) +
                                " tol=" + format_double(c.kernels.normalization_tol) + " ok=" + (ok ? "true" : "false"));
          }
          if (m.dim() == 1 || entry.manifold.kind == ManifoldKind::Sphere) {
            for (const auto& [s, tt] : c.kernels.semigroup) {
              double worst = 0.0;
              for (std::size_t i = 0; i < std::min<std::size_t>(3, pairs.size()); ++i)
                worst = std::max(worst, semigroup_residual(m, s, tt, pairs[i].first, pairs[i].second,
                                                           m.dim() == 1 ? 2048 : 96, scale));
              const bool ok = worst <= c.kernels.semigroup_tol;
              passed = passed && ok;
              t.trailer.push_back("semigroup: s=" + format_double(s) + " t=" + format_double(tt) +
                                  " residual=" + format_double(worst) + " tol=" +
                                  format_double(c.kernels.semigroup_tol) + " ok=" + (ok ? "true" : "false"));
            }
          }
          double asym = 0.0;
          for (double tt : c.kernels.t_grid)
            for (const auto& [x, y] : pairs)
              asym = std::max(asym, std::abs(heat_kernel(m, tt, x, y).value - heat_kernel(m, tt, y, x).value));
          const bool sym_ok = asym <= 1e-12;
          passed = passed && sym_ok;
          t.trailer.push_back("symmetry: max_abs_difference=" + format_double(asym) +
                              " ok=" + (sym_ok ? "true" : "false"));
        },
        any);
    result.checks_passed = result.checks_passed && passed;
    detail::emit(result, o, detail::suffixed_path(c.output_path, tag), std::move(t));
  }
  return result;
}

inline RunResult run_experiment(const ExperimentConfig& c, const RunOptions& o = {}) {
  switch (c.experiment) {
    case Experiment::ExitProb: return run_exit_prob(c, o);
    case Experiment::TVSweep: return run_tv_sweep(c, o);
    case Experiment::Sample: return run_sample(c, o);
    case Experiment::ValidateKernels: return run_validate_kernels(c, o);
  }
  throw ContractError("unknown experiment");
}

}  // namespace rsgm
