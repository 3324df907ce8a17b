#pragma once

// Experiment configuration: JSON (comments allowed) in, fully resolved JSON
// out. The resolved form is what output headers echo; feeding an output file
// back as --config reads the echoed line.

#include "rsgm/estimators.hpp"
#include "rsgm/manifold.hpp"
#include "rsgm/sampler.hpp"
#include "rsgm/targets.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace rsgm {

enum class Experiment { ExitProb, TVSweep, Sample, ValidateKernels };

inline std::string_view experiment_name(Experiment e) {
  switch (e) {
    case Experiment::ExitProb: return "exit-prob";
    case Experiment::TVSweep: return "tv-sweep";
    case Experiment::Sample: return "sample";
    case Experiment::ValidateKernels: return "validate-kernels";
  }
  return "";
}

using TargetSpec = std::variant<TorusGMM, SphereHKMixture, UniformTarget<Torus>, UniformTarget<Sphere>>;

struct ManifoldEntry {
  ManifoldDescriptor manifold;
  TargetSpec target;
};

struct KdeSettings {
  std::optional<double> bandwidth;  // empty: Scott's rule
  int grid_resolution = 0;          // 0: per-dimension default, materialized on resolve
};

struct KernelCheckSettings {
  std::vector<double> t_grid{1e-3, 1e-2, 1e-1, 1.0};
  int pairs = 25;
  std::vector<std::pair<double, double>> semigroup{{0.05, 0.1}};
  double normalization_tol = 1e-8;
  double semigroup_tol = 1e-6;
  double kernel_scale = 1.0;  // fault-injection hook
};

struct ExperimentConfig {
  Experiment experiment = Experiment::Sample;
  std::uint64_t seed = 0;
  std::string output_path;
  std::vector<ManifoldEntry> manifolds;
  SamplerConfig sampler;  // sampler.seed mirrors `seed`
  std::size_t trajectories = 0;

  // exit-prob
  std::vector<double> h_list;
  std::optional<int> steps;
  double score_scale = 1.0;

  // tv-sweep
  std::vector<int> N_list;
  KdeSettings kde;
  bool noise_floor = true;

  // validate-kernels
  KernelCheckSettings kernels;
};

inline std::vector<double> default_h_list() {
  std::vector<double> h;
  for (int k = 5; k <= 9; ++k) h.push_back(1.0 / (k * k));
  return h;
}

inline std::size_t default_trajectories(Experiment e) {
  switch (e) {
    case Experiment::ExitProb: return 100000;
    case Experiment::TVSweep: return 200000;
    case Experiment::Sample: return 1000;
    case Experiment::ValidateKernels: return 0;
  }
  return 0;
}

namespace detail {

using nlohmann::json;

/// 1-based line of the first occurrence of `"key"` after the keys in `path`
/// preceding it; 0 when not found.
inline int locate(std::string_view text, const std::vector<std::string>& path) {
  std::size_t pos = 0;
  for (const std::string& key : path) {
    const std::size_t hit = text.find("\"" + key + "\"", pos);
    if (hit == std::string_view::npos) break;
    pos = hit + 1;
  }
  if (pos == 0) return 0;
  int line = 1;
  for (std::size_t i = 0; i + 1 < pos; ++i) line += text[i] == '\n';
  return line;
}

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& msg) const {
    std::string name;
    for (const auto& p : path) name += (name.empty() ? "" : ".") + p;
    throw ConfigError(name.empty() ? msg : name + ": " + msg, locate(text_, path));
  }

  void reject_unknown(const json& obj, const std::vector<std::string>& path,
                      std::initializer_list<std::string_view> allowed) const {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& [key, _] : obj.items()) {
      bool ok = false;
      for (auto a : allowed) ok = ok || a == key;
      if (!ok) {
        auto p = path;
        p.push_back(key);
        fail(p, "unknown key");
      }
    }
  }

  double number(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
  }

  long long integer(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<long long>();
  }

  std::uint64_t u64(const json& v, const std::vector<std::string>& path) const {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
    fail(path, "expected a nonnegative 64-bit integer");
  }

  std::string string(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_array()) fail(path, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) out.push_back(number(x, path));
    return out;
  }

  std::vector<Point> points(const json& v, const std::vector<std::string>& path, int width) const {
    if (!v.is_array()) fail(path, "expected an array of coordinate arrays");
    std::vector<Point> out;
    for (const auto& row : v) {
      const auto xs = numbers(row, path);
      if (static_cast<int>(xs.size()) != width) fail(path, "expected " + std::to_string(width) + " coordinates");
      out.push_back({Eigen::Map<const Eigen::VectorXd>(xs.data(), width)});
    }
    return out;
  }

 private:
  std::string_view text_;
};

inline ManifoldDescriptor parse_manifold(const Reader& r, const json& j, const std::vector<std::string>& path) {
  const std::string kind = r.string(j.at("kind"), path);
  const int d = static_cast<int>(r.integer(j.contains("d") ? j.at("d") : json(2), path));
  try {
    if (kind == "torus") return ManifoldDescriptor::torus(d);
    if (kind == "sphere") {
      if (d != 2) r.fail(path, "sphere experiments support d = 2 only");
      return ManifoldDescriptor::sphere(d);
    }
  } catch (const ContractError& e) {
    r.fail(path, e.what());
  }
  r.fail(path, "kind must be \"torus\" or \"sphere\"");
}

inline TargetSpec parse_target(const Reader& r, const json& j, const ManifoldDescriptor& m,
                               const std::vector<std::string>& path) {
  r.reject_unknown(j, path, {"kind", "weights", "means", "sigmas", "centers", "widths", "sigma", "width"});
  const std::string kind = j.contains("kind") ? r.string(j.at("kind"), path) : "default";
  const bool torus = m.kind == ManifoldKind::Torus;
  try {
    if (kind == "uniform") {
      if (torus) return UniformTarget<Torus>{Torus(m.d)};
      return UniformTarget<Sphere>{Sphere(m.d)};
    }
    if (kind == "default") {
      if (torus) return default_torus_gmm(m.d, j.contains("sigma") ? r.number(j.at("sigma"), path) : 0.05);
      return default_sphere_mixture(j.contains("width") ? r.number(j.at("width"), path) : 0.05);
    }
    if (kind == "gmm") {
      if (!torus) r.fail(path, "gmm targets live on the torus");
      return make_torus_gmm(r.numbers(j.at("weights"), path), r.points(j.at("means"), path, m.d),
                            r.numbers(j.at("sigmas"), path));
    }
    if (kind == "heat_kernel_mixture") {
      if (torus) r.fail(path, "heat_kernel_mixture targets live on the sphere");
      return make_sphere_mixture(r.numbers(j.at("weights"), path), r.points(j.at("centers"), path, 3),
                                 r.numbers(j.at("widths"), path));
    }
  } catch (const ContractError& e) {
    r.fail(path, e.what());
  } catch (const DomainError& e) {
    r.fail(path, e.what());
  } catch (const json::out_of_range& e) {
    r.fail(path, "missing field for target kind " + kind);
  }
  r.fail(path, "unknown target kind \"" + kind + "\"");
}

inline json points_json(const std::vector<Point>& pts) {
  json a = json::array();
  for (const Point& p : pts) a.push_back(std::vector<double>(p.coords.data(), p.coords.data() + p.coords.size()));
  return a;
}

inline json target_json(const TargetSpec& t) {
  return std::visit(
      [](const auto& v) -> json {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, TorusGMM>)
          return {{"kind", "gmm"}, {"weights", v.weights}, {"means", points_json(v.means)}, {"sigmas", v.sigmas}};
        else if constexpr (std::is_same_v<V, SphereHKMixture>)
          return {{"kind", "heat_kernel_mixture"},
                  {"weights", v.weights},
                  {"centers", points_json(v.centers)},
                  {"widths", v.widths}};
        else
          return {{"kind", "uniform"}};
      },
      t);
}

inline std::string_view frame_policy_name(FramePolicy p) {
  return p == FramePolicy::Canonical ? "canonical" : "random_rotation";
}

inline int line_of_offset(std::string_view text, std::size_t offset) {
  int line = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) line += text[i] == '\n';
  return line;
}

}  // namespace detail

/// Parses a JSON config (// and /* */ comments allowed). Missing fields take
/// their defaults; `experiment` may be supplied by the caller (subcommand).
inline ExperimentConfig parse_config(std::string_view text, std::optional<Experiment> forced = std::nullopt) {
  using detail::json;
  json j;
  try {
    j = json::parse(text.begin(), text.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON", detail::line_of_offset(text, e.byte));
  }
  const detail::Reader r(text);
  r.reject_unknown(j, {}, {"experiment", "seed", "output_path", "manifolds", "sampler", "trajectories", "h_list", "steps",
                           "score_scale", "N_list", "kde", "noise_floor", "kernels"});

  ExperimentConfig c;
  if (j.contains("experiment")) {
    const std::string name = r.string(j["experiment"], {"experiment"});
    bool found = false;
    for (Experiment e : {Experiment::ExitProb, Experiment::TVSweep, Experiment::Sample, Experiment::ValidateKernels})
      if (experiment_name(e) == name) {
        c.experiment = e;
        found = true;
      }
    if (!found) r.fail({"experiment"}, "unknown experiment \"" + name + "\"");
    if (forced && *forced != c.experiment)
      r.fail({"experiment"}, "config is for " + name + ", not " + std::string(experiment_name(*forced)));
  } else if (forced) {
    c.experiment = *forced;
  } else {
    throw ConfigError("experiment: missing");
  }
  const Experiment e = c.experiment;

  if (j.contains("seed")) c.seed = r.u64(j["seed"], {"seed"});
  c.output_path = j.contains("output_path") ? r.string(j["output_path"], {"output_path"})
                                            : std::string(experiment_name(e)) + ".csv";

  if (!j.contains("manifolds")) {
    if (e == Experiment::ValidateKernels)
      j["manifolds"] = json::array({{{"kind", "torus"}, {"d", 1}}, {{"kind", "sphere"}, {"d", 2}}});
    else
      j["manifolds"] = json::array({{{"kind", "torus"}, {"d", e == Experiment::ExitProb ? 2 : 1}}});
  }
  if (!j["manifolds"].is_array() || j["manifolds"].empty()) r.fail({"manifolds"}, "expected a non-empty array");
  for (const auto& mj : j["manifolds"]) {
    r.reject_unknown(mj, {"manifolds"}, {"kind", "d", "target"});
    if (!mj.contains("kind")) r.fail({"manifolds"}, "missing kind");
    const ManifoldDescriptor m = detail::parse_manifold(r, mj, {"manifolds", "kind"});
    const json tj = mj.contains("target") ? mj.at("target") : json::object();
    c.manifolds.push_back({m, detail::parse_target(r, tj, m, {"manifolds", "target"})});
  }
  if ((e == Experiment::TVSweep || e == Experiment::Sample) && c.manifolds.size() != 1)
    r.fail({"manifolds"}, "this experiment takes exactly one manifold");
  if (e == Experiment::TVSweep && (c.manifolds[0].manifold.kind != ManifoldKind::Torus || c.manifolds[0].manifold.d > 3))
    r.fail({"manifolds"}, "tv-sweep supports tori with d <= 3");

  if (j.contains("sampler")) {
    const json& s = j["sampler"];
    r.reject_unknown(s, {"sampler"}, {"T", "delta", "N", "frame_policy", "perturbation"});
    if (s.contains("T")) c.sampler.T = r.number(s["T"], {"sampler", "T"});
    if (s.contains("delta")) c.sampler.delta = r.number(s["delta"], {"sampler", "delta"});
    if (s.contains("N")) c.sampler.N = static_cast<int>(r.integer(s["N"], {"sampler", "N"}));
    if (s.contains("frame_policy")) {
      const std::string p = r.string(s["frame_policy"], {"sampler", "frame_policy"});
      if (p == "canonical") c.sampler.frame_policy = FramePolicy::Canonical;
      else if (p == "random_rotation") c.sampler.frame_policy = FramePolicy::RandomRotation;
      else r.fail({"sampler", "frame_policy"}, "expected \"canonical\" or \"random_rotation\"");
    }
    if (s.contains("perturbation")) {
      const json& p = s["perturbation"];
      const std::vector<std::string> path{"sampler", "perturbation"};
      r.reject_unknown(p, path, {"amplitude", "frequency"});
      const double a = p.contains("amplitude") ? r.number(p["amplitude"], path) : 0.0;
      const int f = p.contains("frequency") ? static_cast<int>(r.integer(p["frequency"], path)) : 1;
      if (a < 0.0) r.fail({"sampler", "perturbation", "amplitude"}, "must be >= 0");
      c.sampler.perturbation = a > 0.0 ? ScorePerturbation::deterministic(a, f) : ScorePerturbation::none();
      c.sampler.perturbation.frequency = f;
    }
  }
  c.sampler.seed = c.seed;

  c.trajectories = default_trajectories(e);
  if (j.contains("trajectories")) {
    const long long m = r.integer(j["trajectories"], {"trajectories"});
    if (m <= 0) r.fail({"trajectories"}, "must be positive");
    c.trajectories = static_cast<std::size_t>(m);
  }

  if (e == Experiment::ExitProb) {
    c.h_list = j.contains("h_list") ? r.numbers(j["h_list"], {"h_list"}) : default_h_list();
    if (c.h_list.empty()) r.fail({"h_list"}, "must not be empty");
    for (double h : c.h_list)
      if (!(h > 0.0)) r.fail({"h_list"}, "step sizes must be positive");
    if (j.contains("steps") && !j["steps"].is_null()) {
      const long long n = r.integer(j["steps"], {"steps"});
      if (n < 1) r.fail({"steps"}, "must be >= 1");
      c.steps = static_cast<int>(n);
    }
    if (j.contains("score_scale")) c.score_scale = r.number(j["score_scale"], {"score_scale"});
    if (c.trajectories < 1000) r.fail({"trajectories"}, "exit-prob requires at least 1000 trajectories");
  }

  if (e == Experiment::TVSweep) {
    c.N_list = {10, 100, 1000};
    if (j.contains("N_list")) {
      c.N_list.clear();
      if (!j["N_list"].is_array()) r.fail({"N_list"}, "expected an array of integers");
      for (const auto& n : j["N_list"]) {
        const long long v = r.integer(n, {"N_list"});
        if (v < 1) r.fail({"N_list"}, "step counts must be >= 1");
        c.N_list.push_back(static_cast<int>(v));
      }
    }
    if (c.N_list.empty()) r.fail({"N_list"}, "must not be empty");
    if (j.contains("kde")) {
      const json& k = j["kde"];
      r.reject_unknown(k, {"kde"}, {"bandwidth", "grid_resolution"});
      if (k.contains("bandwidth") && !(k["bandwidth"].is_string() && k["bandwidth"] == "scott")) {
        const double bw = r.number(k["bandwidth"], {"kde", "bandwidth"});
        if (!(bw > 0.0)) r.fail({"kde", "bandwidth"}, "must be positive or \"scott\"");
        c.kde.bandwidth = bw;
      }
      if (k.contains("grid_resolution"))
        c.kde.grid_resolution = static_cast<int>(r.integer(k["grid_resolution"], {"kde", "grid_resolution"}));
    }
    if (c.kde.grid_resolution <= 0) c.kde.grid_resolution = default_grid_resolution(c.manifolds[0].manifold.d);
    if (j.contains("noise_floor")) {
      if (!j["noise_floor"].is_boolean()) r.fail({"noise_floor"}, "expected true or false");
      c.noise_floor = j["noise_floor"].get<bool>();
    }
    if (c.trajectories < 100) r.fail({"trajectories"}, "tv-sweep requires at least 100 samples");
  }

  if (e == Experiment::ValidateKernels) {
    if (j.contains("kernels")) {
      const json& k = j["kernels"];
      const std::vector<std::string> path{"kernels"};
      r.reject_unknown(k, path, {"t_grid", "pairs", "semigroup", "normalization_tol", "semigroup_tol", "kernel_scale"});
      if (k.contains("t_grid")) c.kernels.t_grid = r.numbers(k["t_grid"], {"kernels", "t_grid"});
      if (k.contains("pairs")) c.kernels.pairs = static_cast<int>(r.integer(k["pairs"], {"kernels", "pairs"}));
      if (k.contains("semigroup")) {
        c.kernels.semigroup.clear();
        if (!k["semigroup"].is_array()) r.fail({"kernels", "semigroup"}, "expected an array of [s, t] pairs");
        for (const auto& st : k["semigroup"]) {
          const auto v = r.numbers(st, {"kernels", "semigroup"});
          if (v.size() != 2 || !(v[0] > 0.0) || !(v[1] > 0.0))
            r.fail({"kernels", "semigroup"}, "expected positive [s, t] pairs");
          c.kernels.semigroup.emplace_back(v[0], v[1]);
        }
      }
      if (k.contains("normalization_tol"))
        c.kernels.normalization_tol = r.number(k["normalization_tol"], {"kernels", "normalization_tol"});
      if (k.contains("semigroup_tol"))
        c.kernels.semigroup_tol = r.number(k["semigroup_tol"], {"kernels", "semigroup_tol"});
      if (k.contains("kernel_scale"))
        c.kernels.kernel_scale = r.number(k["kernel_scale"], {"kernels", "kernel_scale"});
    }
    if (c.kernels.t_grid.empty()) r.fail({"kernels", "t_grid"}, "must not be empty");
    for (double t : c.kernels.t_grid)
      if (!(t >= kSphereKernelMinTime)) r.fail({"kernels", "t_grid"}, "times must be >= 1e-4");
    if (c.kernels.pairs < 1) r.fail({"kernels", "pairs"}, "must be >= 1");
    for (const auto& m : c.manifolds)
      if (m.manifold.kind == ManifoldKind::Torus && m.manifold.d > 2)
        r.fail({"manifolds"}, "validate-kernels supports tori with d <= 2");
  }

  if (e == Experiment::Sample || e == Experiment::TVSweep) {
    try {
      SamplerConfig probe = c.sampler;
      if (e == Experiment::TVSweep) probe.N = c.N_list.front();
      probe.validate(c.manifolds[0].manifold);
    } catch (const ContractError& err) {
      r.fail({"sampler"}, err.what());
    }
  }
  if (e == Experiment::ExitProb) {
    for (const auto& m : c.manifolds)
      if (m.manifold.kind == ManifoldKind::Sphere && c.sampler.delta < 1e-3)
        r.fail({"sampler", "delta"}, "sphere sampling requires delta >= 1e-3 (kernel floor)");
    if (!(c.sampler.delta > 0.0)) r.fail({"sampler", "delta"}, "must be > 0");
  }
  return c;
}

/// The fully resolved config as JSON; keys relevant to other experiments are omitted.
inline nlohmann::json resolved_json(const ExperimentConfig& c) {
  using detail::json;
  json j;
  j["experiment"] = experiment_name(c.experiment);
  j["seed"] = c.seed;
  j["output_path"] = c.output_path;
  json ms = json::array();
  for (const auto& m : c.manifolds) {
    json mj{{"kind", m.manifold.kind == ManifoldKind::Torus ? "torus" : "sphere"}, {"d", m.manifold.d}};
    mj["target"] = detail::target_json(m.target);
    ms.push_back(mj);
  }
  j["manifolds"] = ms;
  if (c.experiment != Experiment::ValidateKernels) {
    j["sampler"] = {{"T", c.sampler.T},
                    {"delta", c.sampler.delta},
                    {"frame_policy", detail::frame_policy_name(c.sampler.frame_policy)},
                    {"perturbation",
                     {{"amplitude", c.sampler.perturbation.amplitude},
                      {"frequency", c.sampler.perturbation.frequency}}}};
    if (c.experiment == Experiment::Sample) j["sampler"]["N"] = c.sampler.N;
    j["trajectories"] = c.trajectories;
  }
  switch (c.experiment) {
    case Experiment::ExitProb:
      j["h_list"] = c.h_list;
      j["steps"] = c.steps ? json(*c.steps) : json(nullptr);
      j["score_scale"] = c.score_scale;
      break;
    case Experiment::TVSweep:
      j["N_list"] = c.N_list;
      j["kde"] = {{"bandwidth", c.kde.bandwidth ? json(*c.kde.bandwidth) : json("scott")},
                  {"grid_resolution", c.kde.grid_resolution}};
      j["noise_floor"] = c.noise_floor;
      break;
    case Experiment::ValidateKernels: {
      json sg = json::array();
      for (const auto& [s, t] : c.kernels.semigroup) sg.push_back({s, t});
      j["kernels"] = {{"t_grid", c.kernels.t_grid},
                      {"pairs", c.kernels.pairs},
                      {"semigroup", sg},
                      {"normalization_tol", c.kernels.normalization_tol},
                      {"semigroup_tol", c.kernels.semigroup_tol},
                      {"kernel_scale", c.kernels.kernel_scale}};
      break;
    }
    case Experiment::Sample: break;
  }
  return j;
}

inline constexpr std::string_view kConfigHeaderPrefix = "# config: ";

/// Reads a config file. Output files written by this tool are accepted too:
/// their `# config: ` header line carries the resolved config.
inline ExperimentConfig load_config(const std::string& path, std::optional<Experiment> forced = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (text.starts_with("#")) {
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line) && line.starts_with("#"))
      if (line.starts_with(kConfigHeaderPrefix)) return parse_config(line.substr(kConfigHeaderPrefix.size()), forced);
    throw ConfigError("output file has no config header", 1);
  }
  return parse_config(text, forced);
}

}  // namespace rsgm
