#include "rsgm/config.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace rsgm;

namespace {

int error_line(std::string_view text, std::optional<Experiment> e = std::nullopt) {
  try {
    parse_config(text, e);
  } catch (const ConfigError& err) {
    return err.line();
  }
  ADD_FAILURE() << "expected a ConfigError for " << text;
  return -1;
}

}  // namespace

TEST(Defaults, PerExperiment) {
  const ExperimentConfig ep = parse_config("{}", Experiment::ExitProb);
  EXPECT_EQ(ep.trajectories, 100000u);
  ASSERT_EQ(ep.h_list.size(), 5u);
  EXPECT_DOUBLE_EQ(ep.h_list.front(), 1.0 / 25);
  EXPECT_DOUBLE_EQ(ep.h_list.back(), 1.0 / 81);
  ASSERT_EQ(ep.manifolds.size(), 1u);
  EXPECT_EQ(ep.manifolds[0].manifold, Torus(2).descriptor());
  EXPECT_EQ(ep.sampler.T, 2.0);
  EXPECT_EQ(ep.sampler.delta, 0.01);

  const ExperimentConfig tv = parse_config("{}", Experiment::TVSweep);
  EXPECT_EQ(tv.trajectories, 200000u);
  EXPECT_EQ(tv.N_list, (std::vector<int>{10, 100, 1000}));
  EXPECT_EQ(tv.kde.grid_resolution, 256);
  EXPECT_FALSE(tv.kde.bandwidth);

  const ExperimentConfig vk = parse_config("{}", Experiment::ValidateKernels);
  ASSERT_EQ(vk.manifolds.size(), 2u);
  EXPECT_EQ(vk.manifolds[1].manifold, Sphere(2).descriptor());
  EXPECT_EQ(vk.output_path, "validate-kernels.csv");
}

TEST(Parse, FullSampleConfigWithComments) {
  const ExperimentConfig c = parse_config(R"({
    // terminal points on the sphere
    "experiment": "sample",
    "seed": 18446744073709551615,
    "output_path": "out/s.csv",
    "manifolds": [{"kind": "sphere", "d": 2,
                   "target": {"kind": "heat_kernel_mixture", "weights": [0.25, 0.75],
                              "centers": [[0, 0, 1], [1, 0, 0]], "widths": [0.1, 0.2]}}],
    "sampler": {"T": 1.0, "delta": 0.005, "N": 40, "frame_policy": "random_rotation",
                "perturbation": {"amplitude": 0.5, "frequency": 3}},
    /* block comment */
    "trajectories": 12
  })");
  EXPECT_EQ(c.experiment, Experiment::Sample);
  EXPECT_EQ(c.seed, 18446744073709551615ULL);
  EXPECT_EQ(c.sampler.seed, c.seed);
  EXPECT_EQ(c.sampler.N, 40);
  EXPECT_EQ(c.sampler.frame_policy, FramePolicy::RandomRotation);
  EXPECT_EQ(c.sampler.perturbation.frequency, 3);
  EXPECT_TRUE(c.sampler.perturbation.active());
  const auto& mix = std::get<SphereHKMixture>(c.manifolds[0].target);
  EXPECT_EQ(mix.widths[1], 0.2);
  EXPECT_EQ(c.trajectories, 12u);
}

TEST(Errors, CarryLineNumbers) {
  EXPECT_EQ(error_line("{\n  \"experiment\": \"sample\",\n  \"trajectories\": 0\n}"), 3);
  EXPECT_EQ(error_line("{\n\"experiment\": \"sample\",\n\n  \"bogus\": 1\n}"), 4);
  EXPECT_EQ(error_line("{\n  \"experiment\": \"sample\",\n  \"sampler\": {\"T\": \"two\"}\n}"), 3);
  EXPECT_EQ(error_line("{\n  \"experiment\": \"sample\",\n  \"seed\": -1\n}"), 3);
  EXPECT_GT(error_line("{\n  \"experiment\": \"sample\",\n  \"seed\": \n}"), 0);
}

TEST(Errors, ValidationFailures) {
  EXPECT_THROW(parse_config("{}"), ConfigError);
  EXPECT_THROW(parse_config(R"({"experiment": "nope"})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"experiment": "sample"})", Experiment::TVSweep), ConfigError);
  EXPECT_THROW(parse_config(R"({"trajectories": 0})", Experiment::ExitProb), ConfigError);
  EXPECT_THROW(parse_config(R"({"trajectories": 999})", Experiment::ExitProb), ConfigError);
  EXPECT_THROW(parse_config(R"({"h_list": []})", Experiment::ExitProb), ConfigError);
  EXPECT_THROW(parse_config(R"({"h_list": [0.01, 0]})", Experiment::ExitProb), ConfigError);
  EXPECT_THROW(parse_config(R"({"kernels": {"t_grid": []}})", Experiment::ValidateKernels), ConfigError);
  EXPECT_THROW(parse_config(R"({"kernels": {"t_grid": [1e-5]}})", Experiment::ValidateKernels), ConfigError);
  EXPECT_THROW(parse_config(R"({"manifolds": [{"kind": "torus", "d": 4}]})", Experiment::TVSweep), ConfigError);
  EXPECT_THROW(parse_config(R"({"manifolds": [{"kind": "sphere", "d": 2}]})", Experiment::TVSweep), ConfigError);
  EXPECT_THROW(parse_config(R"({"manifolds": [{"kind": "sphere", "d": 3}]})", Experiment::Sample), ConfigError);
  EXPECT_THROW(parse_config(R"({"manifolds": [{"kind": "sphere", "d": 2}], "sampler": {"delta": 5e-4}})",
                            Experiment::Sample),
               ConfigError);
  EXPECT_THROW(parse_config(R"({"manifolds": [{"kind": "sphere", "d": 2}], "sampler": {"delta": 5e-4}})",
                            Experiment::ExitProb),
               ConfigError);
  EXPECT_THROW(parse_config(R"({"sampler": {"delta": 3.0}})", Experiment::Sample), ConfigError);
  EXPECT_THROW(parse_config(R"({"sampler": {"frame_policy": "sideways"}})", Experiment::Sample), ConfigError);
  EXPECT_THROW(parse_config(R"({"sampler": {"perturbation": {"amplitude": -1}}})", Experiment::Sample), ConfigError);
  EXPECT_THROW(parse_config(R"({"kde": {"bandwidth": "silverman"}})", Experiment::TVSweep), ConfigError);
  EXPECT_THROW(parse_config(R"({"N_list": [10, 0]})", Experiment::TVSweep), ConfigError);
  EXPECT_THROW(parse_config("{ not json", Experiment::Sample), ConfigError);
}

TEST(Resolved, RoundTripsThroughParser) {
  for (Experiment e : {Experiment::ExitProb, Experiment::TVSweep, Experiment::Sample, Experiment::ValidateKernels}) {
    const ExperimentConfig c = parse_config("{}", e);
    const std::string once = resolved_json(c).dump();
    const std::string twice = resolved_json(parse_config(once)).dump();
    EXPECT_EQ(once, twice) << experiment_name(e);
  }
  const ExperimentConfig c = parse_config(R"({"kde": {"bandwidth": 0.02, "grid_resolution": 512}, "seed": 5})",
                                          Experiment::TVSweep);
  const ExperimentConfig back = parse_config(resolved_json(c).dump());
  EXPECT_EQ(back.kde.bandwidth.value(), 0.02);
  EXPECT_EQ(back.kde.grid_resolution, 512);
  EXPECT_EQ(back.seed, 5u);
}

TEST(Resolved, ShortestRoundTripNumbers) {
  const ExperimentConfig c = parse_config("{}", Experiment::ExitProb);
  const ExperimentConfig back = parse_config(resolved_json(c).dump());
  EXPECT_EQ(back.h_list, c.h_list);
}

TEST(Load, AcceptsOutputFileHeader) {
  const auto dir = std::filesystem::temp_directory_path() / "rsgm_test_config";
  std::filesystem::create_directories(dir);
  const auto path = dir / "out.csv";
  const ExperimentConfig c = parse_config(R"({"trajectories": 7, "seed": 3})", Experiment::Sample);
  {
    std::ofstream out(path);
    out << "# rsgm 0.0.0\n" << kConfigHeaderPrefix << resolved_json(c).dump() << "\n# seed: 3\nrun_id,x0\n0,0.5\n";
  }
  const ExperimentConfig back = load_config(path.string(), Experiment::Sample);
  EXPECT_EQ(back.trajectories, 7u);
  EXPECT_EQ(back.seed, 3u);
  EXPECT_THROW(load_config((dir / "missing.json").string()), ConfigError);
  {
    std::ofstream out(dir / "noheader.csv");
    out << "# just a comment\nrun_id\n";
  }
  EXPECT_THROW(load_config((dir / "noheader.csv").string()), ConfigError);
}

TEST(Load, ShippedConfigsParse) {
  int seen = 0;
  for (const auto& entry : std::filesystem::directory_iterator(RSGM_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_config(entry.path().string())) << entry.path();
    ++seen;
  }
  EXPECT_EQ(seen, 5);
  const ExperimentConfig fig1 = load_config(std::string(RSGM_CONFIG_DIR) + "/exit_prob_fig1.json");
  EXPECT_EQ(fig1.h_list, parse_config("{}", Experiment::ExitProb).h_list);
}
