// Draw samples from the default three-mode mixture on the circle, compare
// the sampler output with the smoothed target, and print a few geometry and
// kernel values.

#include "rsgm/rsgm.hpp"

#include <cstdio>
#include <vector>

int main() {
  using namespace rsgm;

  const Torus circle(1);
  const TorusGMM target = default_torus_gmm(1);

  SamplerConfig cfg;
  cfg.T = 2.0;
  cfg.delta = 0.01;
  cfg.N = 400;
  cfg.seed = 42;

  const std::vector<RunRecord> runs = rsgm_sample_many(circle, target, cfg, 20000);
  std::vector<Point> pts;
  int resets = 0;
  for (const RunRecord& r : runs) {
    pts.push_back(r.terminal);
    resets += r.resets;
  }
  const TvEstimate tv = tv_vs_target(pts, target, cfg.delta);
  std::printf("T^1: %zu samples, %d resets, TV to p_delta = %.4f (bandwidth %.4f)\n", pts.size(), resets, tv.tv,
              tv.bandwidth);

  const Sphere s2(2);
  const Point north = s2.point(Vec::Unit(3, 2));
  const Point east = s2.point(Vec::Unit(3, 0));
  const TangentVec v = s2.log_map(north, east);
  std::printf("S^2: |log_N(E)| = %.6f, H(0.1, N, E) = %.6e, Harnack bound = %.6e\n", v.norm(),
              heat_kernel(s2, 0.1, north, east).value,
              harnack_lower_bound(s2.descriptor(), 0.1, s2.distance(north, east)));
  return 0;
}
