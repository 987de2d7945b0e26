// Experiment configuration: one JSON document whose sections mirror the
// library's parameter structs. Every field is optional and falls back to the
// library default; unknown keys are rejected so typos do not pass silently.
#pragma once

#include "rally/greybox.hpp"
#include "rally/mlp.hpp"
#include "rally/optimizer.hpp"
#include "rally/sim_env.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

namespace rally {

enum class Mode { kGradCheck, kBaselineVariance, kGenData, kTrainBlackbox, kRun, kSweep };
enum class PredictorKind { kGreybox, kBlackbox };
enum class Sampling { kUniform, kGrid };
enum class LabelSource { kEnv, kGreybox };
enum class SweepKind { kTargets, kInits };

struct DatasetConfig {
  int n = 3000;
  Sampling sampling = Sampling::kUniform;
  int grid_theta1 = 10;
  int grid_theta4 = 10;
  LabelSource source = LabelSource::kEnv;
  /// Sampling box over the policy. Also the input normalization box of the
  /// network.
  Vec2 box_lower = Vec2(-0.5, -0.2);
  Vec2 box_upper = Vec2(0.5, 0.7);
  std::string path;  // read instead of generating when set
};

struct BaselineConfig {
  int n_trials = 200;
  std::vector<InterceptionPolicy> policies = {{0.0, 0.3}, {-0.2, 0.4}, {0.2, 0.45}};
};

struct GradCheckConfig {
  int n_points = 100;
  double fd_step = 1e-5;  // [rad]
};

struct SweepConfig {
  SweepKind kind = SweepKind::kTargets;
  std::vector<Vec2> targets = {{-0.4, 2.15}, {0.0, 2.15}, {0.4, 2.15},
                               {-0.4, 2.45}, {0.0, 2.45}, {0.4, 2.45}};
  std::vector<InterceptionPolicy> initial_policies = {{-0.4, 0.45}, {0.4, 0.45}, {-0.3, 0.25},
                                                      {0.3, 0.25},  {0.0, 0.1},   {-0.35, 0.6}};
  int replicates = 1;
};

struct ExperimentConfig {
  Mode mode = Mode::kRun;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  PredictorKind predictor = PredictorKind::kGreybox;
  Vec2 target = Vec2(0.0, 2.45);
  InterceptionPolicy phi1{0.25, 0.45};
  int n_iters = 200;
  double alpha1 = 0.05;
  int max_consecutive_misses = 20;
  double threshold = 0.25;  // [m], for iterations-to-threshold
  FeasibleSet feasible;

  GreyboxParams greybox;  // predictor physics; its geom mirrors env.geom
  EnvConfig env;
  DatasetConfig dataset;
  TrainConfig train;
  std::string blackbox_model;  // trained network to load; trained in-process when empty
  BaselineConfig baseline;
  GradCheckConfig grad_check;
  SweepConfig sweep;

  void validate() const;
};

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::kGradCheck: return "grad-check";
    case Mode::kBaselineVariance: return "baseline-variance";
    case Mode::kGenData: return "gen-data";
    case Mode::kTrainBlackbox: return "train-blackbox";
    case Mode::kRun: return "run";
    case Mode::kSweep: return "sweep";
  }
  return "?";
}

inline Mode parse_mode(const std::string& s) {
  for (Mode m : {Mode::kGradCheck, Mode::kBaselineVariance, Mode::kGenData, Mode::kTrainBlackbox,
                 Mode::kRun, Mode::kSweep}) {
    if (s == to_string(m)) return m;
  }
  throw Error(ErrorKind::kConfig, "mode: unknown value '" + s + "'");
}

inline const char* to_string(PredictorKind p) {
  return p == PredictorKind::kGreybox ? "greybox" : "blackbox";
}

inline PredictorKind parse_predictor(const std::string& s) {
  if (s == "greybox") return PredictorKind::kGreybox;
  if (s == "blackbox") return PredictorKind::kBlackbox;
  throw Error(ErrorKind::kConfig, "predictor: expected greybox or blackbox, got '" + s + "'");
}

namespace detail {

/// Walks one JSON object, remembering which keys were read.
class Section {
 public:
  Section(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) fail(key, "unknown key");
    }
  }

  Section(const Section&) = delete;
  Section& operator=(const Section&) = delete;

  [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }

  Section child(const std::string& key) {
    seen_.insert(key);
    return Section(j_.at(key), name(key));
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      fail(key, "wrong type");
    }
  }

  void read_vec(const std::string& key, Eigen::Ref<Eigen::VectorXd> out) {
    if (!has(key)) return;
    std::vector<double> v;
    read(key, v);
    if (v.size() != static_cast<std::size_t>(out.size())) {
      fail(key, "expected an array of " + std::to_string(out.size()) + " numbers");
    }
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  }

  void read_vec2(const std::string& key, Vec2& out) {
    Eigen::VectorXd tmp = out;
    read_vec(key, tmp);
    out = tmp;
  }

  void read_vec3(const std::string& key, Vec3& out) {
    Eigen::VectorXd tmp = out;
    read_vec(key, tmp);
    out = tmp;
  }

  void read_policy(const std::string& key, InterceptionPolicy& out) {
    Vec2 v = out.to_vector();
    read_vec2(key, v);
    out = InterceptionPolicy::from_vector(v);
  }

  void read_pairs(const std::string& key, std::vector<Vec2>& out) {
    if (!has(key)) return;
    std::vector<std::vector<double>> raw;
    read(key, raw);
    out.clear();
    for (const auto& p : raw) {
      if (p.size() != 2) fail(key, "expected an array of [a, b] pairs");
      out.emplace_back(p[0], p[1]);
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw Error(ErrorKind::kConfig, name(key) + ": " + what);
  }

  [[nodiscard]] std::string name(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void read_flight(Section s, FlightParams& f) {
  s.read("k_drag", f.k_drag);
  s.read_vec3("gravity", f.gravity);
  s.read("dt", f.dt);
  s.read("z_table", f.z_table);
  s.read("max_steps", f.max_steps);
  s.read("g_hat", f.g_hat);
  s.read("discriminant_floor", f.discriminant_floor);
  s.read("landing_tolerance", f.landing_tolerance);
  if (s.has("landing_step")) {
    std::string mode;
    s.read("landing_step", mode);
    if (mode == "remaining_time") {
      f.landing_step = LandingStep::kRemainingTime;
    } else if (mode == "interpolate") {
      f.landing_step = LandingStep::kInterpolateToPlane;
    } else {
      s.fail("landing_step", "expected remaining_time or interpolate");
    }
  }
}

inline nlohmann::json flight_json(const FlightParams& f) {
  return {{"k_drag", f.k_drag},
          {"gravity", {f.gravity.x(), f.gravity.y(), f.gravity.z()}},
          {"dt", f.dt},
          {"z_table", f.z_table},
          {"max_steps", f.max_steps},
          {"g_hat", f.g_hat},
          {"discriminant_floor", f.discriminant_floor},
          {"landing_tolerance", f.landing_tolerance},
          {"landing_step",
           f.landing_step == LandingStep::kRemainingTime ? "remaining_time" : "interpolate"}};
}

inline nlohmann::json v2(const Vec2& v) { return {v.x(), v.y()}; }
inline nlohmann::json v3(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
inline nlohmann::json pol(const InterceptionPolicy& p) { return {p.theta1, p.theta4}; }

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  detail::Section root(j, "");

  if (root.has("mode")) {
    std::string m;
    root.read("mode", m);
    c.mode = parse_mode(m);
  }
  root.read("seed", c.seed);
  root.read("output_dir", c.output_dir);
  if (root.has("predictor")) {
    std::string p;
    root.read("predictor", p);
    c.predictor = parse_predictor(p);
  }
  root.read_vec2("target", c.target);
  root.read_policy("phi1", c.phi1);
  root.read("n_iters", c.n_iters);
  root.read("alpha1", c.alpha1);
  root.read("max_consecutive_misses", c.max_consecutive_misses);
  root.read("threshold", c.threshold);
  root.read("blackbox_model", c.blackbox_model);

  if (root.has("feasible_set")) {
    auto s = root.child("feasible_set");
    s.read_vec2("lower", c.feasible.lower);
    s.read_vec2("upper", c.feasible.upper);
  }
  if (root.has("arm")) {
    auto s = root.child("arm");
    s.read_vec3("base", c.env.geom.base);
    s.read("l1", c.env.geom.l1);
    s.read("l2", c.env.geom.l2);
    s.read_vec3("rest_normal", c.env.geom.rest_normal);
    s.read("theta1_dot", c.env.geom.theta1_dot);
    s.read("reach_margin", c.env.geom.reach_margin);
  }
  if (root.has("flight")) detail::read_flight(root.child("flight"), c.greybox.flight);
  if (root.has("impact")) root.child("impact").read_vec3("restitution", c.greybox.impact.restitution);
  if (root.has("gradient")) {
    auto s = root.child("gradient");
    s.read("couple_geometry", c.greybox.couple_geometry);
    s.read("coupling_step", c.greybox.coupling_step);
  }
  if (root.has("truth_flight")) detail::read_flight(root.child("truth_flight"), c.env.truth_flight);
  if (root.has("truth_impact")) {
    root.child("truth_impact").read_vec3("restitution", c.env.truth_impact.restitution);
  }
  if (root.has("noise")) root.child("noise").read_vec2("landing_std", c.env.landing_noise_std);
  if (root.has("launcher")) {
    auto s = root.child("launcher");
    auto& l = c.env.launcher;
    s.read_vec3("position", l.nominal_state.p);
    s.read_vec3("velocity", l.nominal_state.v);
    s.read_vec3("position_jitter", l.position_jitter);
    s.read_vec3("velocity_jitter", l.velocity_jitter);
    s.read("sample_dt", l.sample_dt);
    s.read("max_time", l.max_time);
    s.read("exit_behind", l.exit_behind);
    s.read("exit_height", l.exit_height);
  }
  if (root.has("table")) {
    auto s = root.child("table");
    s.read_vec2("center", c.env.table.center);
    s.read("width", c.env.table.width);
    s.read("length", c.env.table.length);
  }
  if (root.has("dataset")) {
    auto s = root.child("dataset");
    s.read("n", c.dataset.n);
    if (s.has("sampling")) {
      std::string v;
      s.read("sampling", v);
      if (v == "uniform") c.dataset.sampling = Sampling::kUniform;
      else if (v == "grid") c.dataset.sampling = Sampling::kGrid;
      else s.fail("sampling", "expected uniform or grid");
    }
    if (s.has("grid")) {
      std::vector<int> g;
      s.read("grid", g);
      if (g.size() != 2) s.fail("grid", "expected [n_theta1, n_theta4]");
      c.dataset.grid_theta1 = g[0];
      c.dataset.grid_theta4 = g[1];
    }
    if (s.has("source")) {
      std::string v;
      s.read("source", v);
      if (v == "env") c.dataset.source = LabelSource::kEnv;
      else if (v == "greybox") c.dataset.source = LabelSource::kGreybox;
      else s.fail("source", "expected env or greybox");
    }
    s.read_vec2("box_lower", c.dataset.box_lower);
    s.read_vec2("box_upper", c.dataset.box_upper);
    s.read("path", c.dataset.path);
  }
  if (root.has("train")) {
    auto s = root.child("train");
    s.read("epochs", c.train.epochs);
    s.read("learning_rate", c.train.learning_rate);
    s.read("beta1", c.train.beta1);
    s.read("beta2", c.train.beta2);
    s.read("eps_adam", c.train.eps_adam);
    s.read("batch_size", c.train.batch_size);
    s.read("validation_fraction", c.train.validation_fraction);
  }
  if (root.has("baseline")) {
    auto s = root.child("baseline");
    s.read("n_trials", c.baseline.n_trials);
    if (s.has("policies")) {
      std::vector<Vec2> p;
      s.read_pairs("policies", p);
      c.baseline.policies.clear();
      for (const auto& v : p) c.baseline.policies.push_back(InterceptionPolicy::from_vector(v));
    }
  }
  if (root.has("grad_check")) {
    auto s = root.child("grad_check");
    s.read("n_points", c.grad_check.n_points);
    s.read("fd_step", c.grad_check.fd_step);
  }
  if (root.has("sweep")) {
    auto s = root.child("sweep");
    if (s.has("kind")) {
      std::string v;
      s.read("kind", v);
      if (v == "targets") c.sweep.kind = SweepKind::kTargets;
      else if (v == "inits") c.sweep.kind = SweepKind::kInits;
      else s.fail("kind", "expected targets or inits");
    }
    s.read_pairs("targets", c.sweep.targets);
    if (s.has("initial_policies")) {
      std::vector<Vec2> p;
      s.read_pairs("initial_policies", p);
      c.sweep.initial_policies.clear();
      for (const auto& v : p) c.sweep.initial_policies.push_back(InterceptionPolicy::from_vector(v));
    }
    s.read("replicates", c.sweep.replicates);
  }
  c.greybox.geom = c.env.geom;
  c.validate();
  return c;
}

/// Canonical form of the effective configuration; its dump is what gets hashed.
inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  using detail::pol;
  using detail::v2;
  using detail::v3;
  nlohmann::json j;
  j["mode"] = to_string(c.mode);
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["predictor"] = to_string(c.predictor);
  j["target"] = v2(c.target);
  j["phi1"] = pol(c.phi1);
  j["n_iters"] = c.n_iters;
  j["alpha1"] = c.alpha1;
  j["max_consecutive_misses"] = c.max_consecutive_misses;
  j["threshold"] = c.threshold;
  j["blackbox_model"] = c.blackbox_model;
  j["feasible_set"] = {{"lower", v2(c.feasible.lower)}, {"upper", v2(c.feasible.upper)}};
  const auto& g = c.env.geom;
  j["arm"] = {{"base", v3(g.base)},         {"l1", g.l1},
              {"l2", g.l2},                 {"rest_normal", v3(g.rest_normal)},
              {"theta1_dot", g.theta1_dot}, {"reach_margin", g.reach_margin}};
  j["flight"] = detail::flight_json(c.greybox.flight);
  j["impact"] = {{"restitution", v3(c.greybox.impact.restitution)}};
  j["gradient"] = {{"couple_geometry", c.greybox.couple_geometry},
                   {"coupling_step", c.greybox.coupling_step}};
  j["truth_flight"] = detail::flight_json(c.env.truth_flight);
  j["truth_impact"] = {{"restitution", v3(c.env.truth_impact.restitution)}};
  j["noise"] = {{"landing_std", v2(c.env.landing_noise_std)}};
  const auto& l = c.env.launcher;
  j["launcher"] = {{"position", v3(l.nominal_state.p)},   {"velocity", v3(l.nominal_state.v)},
                   {"position_jitter", v3(l.position_jitter)},
                   {"velocity_jitter", v3(l.velocity_jitter)},
                   {"sample_dt", l.sample_dt},             {"max_time", l.max_time},
                   {"exit_behind", l.exit_behind},         {"exit_height", l.exit_height}};
  j["table"] = {{"center", v2(c.env.table.center)},
                {"width", c.env.table.width},
                {"length", c.env.table.length}};
  const auto& d = c.dataset;
  j["dataset"] = {{"n", d.n},
                  {"sampling", d.sampling == Sampling::kUniform ? "uniform" : "grid"},
                  {"grid", {d.grid_theta1, d.grid_theta4}},
                  {"source", d.source == LabelSource::kEnv ? "env" : "greybox"},
                  {"box_lower", v2(d.box_lower)},
                  {"box_upper", v2(d.box_upper)},
                  {"path", d.path}};
  const auto& t = c.train;
  j["train"] = {{"epochs", t.epochs},       {"learning_rate", t.learning_rate},
                {"beta1", t.beta1},         {"beta2", t.beta2},
                {"eps_adam", t.eps_adam},   {"batch_size", t.batch_size},
                {"validation_fraction", t.validation_fraction}};
  nlohmann::json policies = nlohmann::json::array();
  for (const auto& p : c.baseline.policies) policies.push_back(pol(p));
  j["baseline"] = {{"n_trials", c.baseline.n_trials}, {"policies", policies}};
  j["grad_check"] = {{"n_points", c.grad_check.n_points}, {"fd_step", c.grad_check.fd_step}};
  nlohmann::json targets = nlohmann::json::array();
  for (const auto& t2 : c.sweep.targets) targets.push_back(v2(t2));
  nlohmann::json inits = nlohmann::json::array();
  for (const auto& p : c.sweep.initial_policies) inits.push_back(pol(p));
  j["sweep"] = {{"kind", c.sweep.kind == SweepKind::kTargets ? "targets" : "inits"},
                {"targets", targets},
                {"initial_policies", inits},
                {"replicates", c.sweep.replicates}};
  return j;
}

inline void ExperimentConfig::validate() const {
  auto check = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorKind::kConfig, what);
  };
  try {
    env.validate();
    greybox.flight.validate();
    feasible.validate();
    train.validate();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig) throw;
    throw Error(ErrorKind::kConfig, e.what());
  }
  check(n_iters >= 1, "n_iters: must be >= 1");
  check(alpha1 > 0.0, "alpha1: must be > 0");
  check(max_consecutive_misses >= 1, "max_consecutive_misses: must be >= 1");
  check(threshold > 0.0, "threshold: must be > 0");
  check(target.allFinite(), "target: must be finite");
  check(dataset.n >= 1, "dataset.n: must be >= 1");
  check(dataset.grid_theta1 >= 1 && dataset.grid_theta4 >= 1, "dataset.grid: counts must be >= 1");
  check((dataset.box_lower.array() < dataset.box_upper.array()).all(),
        "dataset.box_lower: must be below box_upper");
  check(baseline.n_trials >= 2, "baseline.n_trials: must be >= 2");
  check(!baseline.policies.empty(), "baseline.policies: must not be empty");
  check(grad_check.n_points >= 1, "grad_check.n_points: must be >= 1");
  check(grad_check.fd_step > 0.0, "grad_check.fd_step: must be > 0");
  check(sweep.replicates >= 1, "sweep.replicates: must be >= 1");
  check(!sweep.targets.empty(), "sweep.targets: must not be empty");
  check(!sweep.initial_policies.empty(), "sweep.initial_policies: must not be empty");
  check(feasible.contains(phi1), "phi1: must lie inside the feasible set");
  for (const auto& p : sweep.initial_policies) {
    check(feasible.contains(p), "sweep.initial_policies: every policy must lie inside the feasible set");
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kConfig, "cannot read config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::kConfig, path.string() + ": " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const Error& e) {
    throw Error(ErrorKind::kConfig, path.string() + ": " + e.what());
  }
}

}  // namespace rally
