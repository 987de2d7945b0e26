// Experiment drivers behind the command-line tool: dataset generation,
// gradient checks, baseline variance, network training, single runs and
// sweeps. Every driver is a pure function of the config and its seed.
#pragma once

#include "rally/config.hpp"
#include "rally/io.hpp"

#include <algorithm>
#include <ostream>
#include <variant>

namespace rally {

/// Seed streams carved out of the master seed.
namespace stream {
inline constexpr std::uint64_t kDataset = 1;
inline constexpr std::uint64_t kTrain = 2;
inline constexpr std::uint64_t kGradCheck = 3;
inline constexpr std::uint64_t kBaseline = 100;
inline constexpr std::uint64_t kRun = 1000;
}  // namespace stream

/// The launcher's nominal ball without jitter, sampled like a real launch.
inline SampledTrajectory nominal_incoming(const EnvConfig& env) {
  LauncherConfig quiet = env.launcher;
  quiet.position_jitter.setZero();
  quiet.velocity_jitter.setZero();
  Rng unused = make_rng(0);
  return launch(quiet, env.truth_flight, env.table, env.geom, unused);
}

inline std::vector<InterceptionPolicy> grid_policies(const Vec2& lower, const Vec2& upper, int n1,
                                                     int n4) {
  auto axis = [](double lo, double hi, int n, int i) {
    return n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (n - 1);
  };
  std::vector<InterceptionPolicy> out;
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n4; ++j) {
      out.push_back({axis(lower(0), upper(0), n1, i), axis(lower(1), upper(1), n4, j)});
    }
  }
  return out;
}

inline InterceptionPolicy uniform_policy(const Vec2& lower, const Vec2& upper, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double a = u(rng);
  const double b = u(rng);
  return {lower(0) + a * (upper(0) - lower(0)), lower(1) + b * (upper(1) - lower(1))};
}

/// Labels policies with observed (env) or predicted (grey-box, nominal ball)
/// landings. Missed balls are discarded. Uniform sampling keeps drawing until
/// n records exist; a grid visits every node once in lexicographic order.
inline Dataset gen_dataset(const DatasetConfig& cfg, const EnvConfig& env,
                           const GreyboxParams& greybox, Rng& rng) {
  if (cfg.n < 1) throw Error(ErrorKind::kInvalidArgument, "dataset n must be >= 1");
  const SampledTrajectory nominal =
      cfg.source == LabelSource::kGreybox ? nominal_incoming(env) : SampledTrajectory{};

  int misses = 0;
  int attempts = 0;
  auto label = [&](const InterceptionPolicy& phi) -> std::optional<Vec2> {
    ++attempts;
    try {
      if (cfg.source == LabelSource::kEnv) return intercept(phi, env, rng).landing;
      return predict_landing(phi, nominal, greybox);
    } catch (const Error& e) {
      if (!e.is_miss()) throw;
      ++misses;
      return std::nullopt;
    }
  };
  auto infeasible = [&] {
    return Error(ErrorKind::kInfeasibleRegion, std::to_string(misses) + " of " +
                                                   std::to_string(attempts) +
                                                   " sampled policies missed");
  };

  Dataset data;
  if (cfg.sampling == Sampling::kGrid) {
    for (const auto& phi : grid_policies(cfg.box_lower, cfg.box_upper, cfg.grid_theta1,
                                         cfg.grid_theta4)) {
      if (auto r = label(phi)) data.push_back({phi, *r});
    }
    if (10 * misses > 9 * attempts) throw infeasible();
    return data;
  }

  // Ten draws per requested record caps the tolerated miss rate at 90%.
  const long max_attempts = 10L * cfg.n;
  while (static_cast<int>(data.size()) < cfg.n) {
    if (attempts >= max_attempts) throw infeasible();
    const InterceptionPolicy phi = uniform_policy(cfg.box_lower, cfg.box_upper, rng);
    if (auto r = label(phi)) data.push_back({phi, *r});
  }
  return data;
}

struct GradCheckEntry {
  InterceptionPolicy phi;
  double rel_error = 0.0;
  bool flagged = false;  // step count changed inside the FD stencil
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;     // over unflagged entries
  double median_rel_error = 0.0;  // over all entries
  int n_flagged = 0;
  std::vector<std::size_t> failures;  // unflagged entries above the tolerance

  void finish(double tolerance) {
    std::vector<double> all;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      all.push_back(e.rel_error);
      if (e.flagged) {
        ++n_flagged;
        continue;
      }
      max_rel_error = std::max(max_rel_error, e.rel_error);
      if (e.rel_error > tolerance) failures.push_back(i);
    }
    if (!all.empty()) {
      const auto mid = all.begin() + static_cast<long>(all.size() / 2);
      std::nth_element(all.begin(), mid, all.end());
      median_rel_error = *mid;
      if (all.size() % 2 == 0) {
        median_rel_error = 0.5 * (median_rel_error + *std::max_element(all.begin(), mid));
      }
    }
  }
};

inline double relative_error(const Mat2& analytic, const Mat2& reference) {
  const double scale = std::max(reference.norm(), 1e-12);
  return (analytic - reference).norm() / scale;
}

/// Grey-box: analytic Jacobian against central differences of the landing map
/// with the interception event frozen, on the launcher's nominal ball.
inline GradCheckReport grad_check_greybox(const GreyboxParams& params, const EnvConfig& env,
                                          const Vec2& lower, const Vec2& upper, int n_points,
                                          double h, std::uint64_t seed, double tolerance = 1e-4) {
  if (n_points < 1) throw Error(ErrorKind::kInvalidArgument, "n_points must be >= 1");
  GreyboxParams frozen = params;
  frozen.couple_geometry = false;
  const SampledTrajectory incoming = nominal_incoming(env);
  Rng rng = make_rng(seed, stream::kGradCheck);

  GradCheckReport report;
  while (static_cast<int>(report.entries.size()) < n_points) {
    const InterceptionPolicy phi = uniform_policy(lower, upper, rng);
    LandingPrediction pred;
    InterceptionEvent event;
    try {
      pred = predict_landing_with_gradient(phi, incoming, frozen);
      event = interception_event(incoming, frozen.geom, phi.theta1);
    } catch (const Error& e) {
      if (!e.is_miss()) throw;
      continue;
    }
    Mat2 fd;
    bool flagged = false;
    for (int c = 0; c < 2; ++c) {
      InterceptionPolicy plus = phi, minus = phi;
      (c == 0 ? plus.theta1 : plus.theta4) += h;
      (c == 0 ? minus.theta1 : minus.theta4) -= h;
      const LandingRecord rp = predict_landing_frozen(plus, event, frozen);
      const LandingRecord rm = predict_landing_frozen(minus, event, frozen);
      fd.col(c) = (rp.landing_point - rm.landing_point) / (2.0 * h);
      flagged = flagged || rp.k_max != pred.k_max || rm.k_max != pred.k_max;
    }
    report.entries.push_back({phi, relative_error(pred.jacobian, fd), flagged});
  }
  report.finish(tolerance);
  return report;
}

/// Black-box: each point draws a fresh random network and input.
inline GradCheckReport grad_check_blackbox(const Vec2& lower, const Vec2& upper, int n_points,
                                           double h, std::uint64_t seed,
                                           double tolerance = 1e-7) {
  if (n_points < 1) throw Error(ErrorKind::kInvalidArgument, "n_points must be >= 1");
  Rng rng = make_rng(seed, stream::kGradCheck);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  GradCheckReport report;
  for (int n = 0; n < n_points; ++n) {
    MlpModel model;
    model.input_lower = lower;
    model.input_upper = upper;
    model.output_mean = Vec2(u(rng) - 1.25, 2.0 * u(rng));
    model.output_std = Vec2(u(rng), u(rng));
    initialize(model, rng);
    const InterceptionPolicy phi = uniform_policy(lower, upper, rng);
    Mat2 fd;
    for (int c = 0; c < 2; ++c) {
      InterceptionPolicy plus = phi, minus = phi;
      (c == 0 ? plus.theta1 : plus.theta4) += h;
      (c == 0 ? minus.theta1 : minus.theta4) -= h;
      fd.col(c) = (mlp_forward(model, plus) - mlp_forward(model, minus)) / (2.0 * h);
    }
    report.entries.push_back({phi, relative_error(mlp_jacobian(model, phi), fd), false});
  }
  report.finish(tolerance);
  return report;
}

/// Trains on cfg.dataset (read from its path or generated from the config)
/// with the network's input box set to the sampling box.
inline TrainResult train_blackbox(const ExperimentConfig& cfg, Dataset* generated = nullptr) {
  Dataset data;
  if (!cfg.dataset.path.empty()) {
    data = read_dataset_csv(cfg.dataset.path);
  } else {
    Rng rng = make_rng(cfg.seed, stream::kDataset);
    data = gen_dataset(cfg.dataset, cfg.env, cfg.greybox, rng);
  }
  if (generated) *generated = data;
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, stream::kTrain);
  return train(data, tc, std::make_pair(cfg.dataset.box_lower, cfg.dataset.box_upper));
}

using AnyPredictor = std::variant<GreyboxPredictor, BlackboxPredictor>;

inline AnyPredictor make_predictor(const ExperimentConfig& cfg) {
  if (cfg.predictor == PredictorKind::kGreybox) return GreyboxPredictor{cfg.greybox};
  if (!cfg.blackbox_model.empty()) return BlackboxPredictor{load_model(cfg.blackbox_model)};
  return BlackboxPredictor{train_blackbox(cfg).model};
}

inline RunOptions run_options(const ExperimentConfig& cfg) {
  RunOptions o;
  o.n_iters = cfg.n_iters;
  o.schedule.alpha1 = cfg.alpha1;
  o.k = cfg.feasible;
  o.max_consecutive_misses = cfg.max_consecutive_misses;
  return o;
}

inline RunLog run_once(const ExperimentConfig& cfg, const AnyPredictor& predictor,
                       const Vec2& target, const InterceptionPolicy& phi1, std::uint64_t seed) {
  const SimEnv env{cfg.env};
  return std::visit(
      [&](const auto& p) { return run_online(env, p, target, phi1, run_options(cfg), seed); },
      predictor);
}

inline SummaryRow summarize(const std::string& name, const RunLog& log,
                            const InterceptionPolicy& phi1, double threshold) {
  SummaryRow row;
  row.run = name;
  row.seed = log.seed;
  row.target = log.target;
  row.phi1 = phi1;
  row.n_iters = static_cast<int>(log.records.size());
  row.misses = log.total_misses;
  if (log.records.empty()) return row;
  const auto& last = log.records.back();
  row.final_eps = last.eps;
  row.final_sigma = last.sigma;
  row.final_distance = (last.landing - log.target).norm();
  for (const auto& r : log.records) {
    if ((r.landing - log.target).norm() < threshold) {
      row.iters_to_threshold = r.iter;
      break;
    }
  }
  return row;
}

struct SweepRun {
  std::string name;
  Vec2 target;
  InterceptionPolicy phi1;
  std::uint64_t seed = 0;
};

/// Runs of a sweep in output order, each with its own derived seed.
inline std::vector<SweepRun> sweep_plan(const ExperimentConfig& cfg) {
  std::vector<SweepRun> plan;
  const auto pad = [](std::size_t v) {
    std::string s = std::to_string(v);
    return std::string(s.size() < 2 ? 2 - s.size() : 0, '0') + s;
  };
  const bool targets = cfg.sweep.kind == SweepKind::kTargets;
  const std::size_t n = targets ? cfg.sweep.targets.size() : cfg.sweep.initial_policies.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (int r = 0; r < cfg.sweep.replicates; ++r) {
      SweepRun run;
      run.name = (targets ? "target" : "init") + pad(i) + "_rep" + pad(static_cast<std::size_t>(r));
      run.target = targets ? cfg.sweep.targets[i] : cfg.target;
      run.phi1 = targets ? cfg.phi1 : cfg.sweep.initial_policies[i];
      run.seed = derive_seed(cfg.seed, stream::kRun + plan.size());
      plan.push_back(run);
    }
  }
  return plan;
}

/// The hash covers everything but the output directory, so the same
/// experiment written to two places carries the same provenance.
inline Provenance provenance(const ExperimentConfig& cfg) {
  nlohmann::json j = config_to_json(cfg);
  j.erase("output_dir");
  return {cfg.seed, config_hash(j.dump())};
}

/// Runs one mode and writes its artifacts under cfg.output_dir.
/// Returns the process exit status: 0 success, 1 invalid input, 2 aborted run.
inline int run_experiment(const ExperimentConfig& cfg, std::ostream& log, std::ostream& err) {
  try {
    cfg.validate();
    const std::filesystem::path dir = cfg.output_dir;
    const Provenance prov = provenance(cfg);
    {
      auto out = detail::open_for_write(dir / "config.json");
      nlohmann::json echo = config_to_json(cfg);
      echo["config_hash"] = prov.config_hash;
      out << echo.dump(2) << '\n';
    }

    switch (cfg.mode) {
      case Mode::kGradCheck: {
        const bool grey = cfg.predictor == PredictorKind::kGreybox;
        const GradCheckReport rep =
            grey ? grad_check_greybox(cfg.greybox, cfg.env, cfg.dataset.box_lower,
                                      cfg.dataset.box_upper, cfg.grad_check.n_points,
                                      cfg.grad_check.fd_step, cfg.seed)
                 : grad_check_blackbox(cfg.dataset.box_lower, cfg.dataset.box_upper,
                                       cfg.grad_check.n_points, cfg.grad_check.fd_step, cfg.seed);
        auto out = detail::open_for_write(dir / "grad_check.csv");
        out << prov.comment_line() << "\npoint,theta1,theta4,rel_error,flagged\n";
        for (std::size_t i = 0; i < rep.entries.size(); ++i) {
          const auto& e = rep.entries[i];
          out << i << ',' << detail::join({e.phi.theta1, e.phi.theta4, e.rel_error}) << ','
              << (e.flagged ? 1 : 0) << '\n';
        }
        log << "grad-check " << to_string(cfg.predictor) << ": points=" << rep.entries.size()
            << " median_rel=" << format_number(rep.median_rel_error)
            << " max_rel_unflagged=" << format_number(rep.max_rel_error)
            << " flagged=" << rep.n_flagged << " failures=" << rep.failures.size() << '\n';
        return 0;
      }
      case Mode::kBaselineVariance: {
        auto out = detail::open_for_write(dir / "baseline.csv");
        out << prov.comment_line()
            << "\npolicy,theta1,theta4,mean_x,mean_y,sigma,misses,trials\n";
        for (std::size_t i = 0; i < cfg.baseline.policies.size(); ++i) {
          const auto& phi = cfg.baseline.policies[i];
          Rng rng = make_rng(derive_seed(cfg.seed, stream::kBaseline + i));
          const VarianceEstimate est = estimate_variance(phi, cfg.baseline.n_trials, cfg.env, rng);
          out << i << ','
              << detail::join({phi.theta1, phi.theta4, est.mean.x(), est.mean.y(), est.std})
              << ',' << est.misses << ',' << est.trials << '\n';
          log << "policy " << i << " (" << format_number(phi.theta1) << ", "
              << format_number(phi.theta4) << "): sigma=" << format_number(est.std)
              << " misses=" << est.misses << '\n';
        }
        return 0;
      }
      case Mode::kGenData: {
        Rng rng = make_rng(cfg.seed, stream::kDataset);
        const Dataset data = gen_dataset(cfg.dataset, cfg.env, cfg.greybox, rng);
        write_dataset_csv(dir / "dataset.csv", data, prov);
        log << "wrote " << data.size() << " records\n";
        return 0;
      }
      case Mode::kTrainBlackbox: {
        Dataset data;
        const TrainResult res = train_blackbox(cfg, &data);
        if (cfg.dataset.path.empty()) write_dataset_csv(dir / "dataset.csv", data, prov);
        save_model(dir / "model.json", res.model, prov);
        write_history_csv(dir / "history.csv", res.history, prov);
        log << "trained on " << res.training.size() << " records, validation rmse="
            << format_number(landing_rmse(res.model, res.validation)) << " m\n";
        return 0;
      }
      case Mode::kRun: {
        const AnyPredictor predictor = make_predictor(cfg);
        const std::uint64_t seed = derive_seed(cfg.seed, stream::kRun);
        const RunLog run = run_once(cfg, predictor, cfg.target, cfg.phi1, seed);
        write_runlog_csv(dir / "runlog.csv", run, prov);
        const SummaryRow row = summarize("run", run, cfg.phi1, cfg.threshold);
        write_summary_csv(dir / "summary.csv", {row}, prov);
        log << "eps=" << format_number(row.final_eps) << " sigma=" << format_number(row.final_sigma)
            << " iters_to_threshold=" << row.iters_to_threshold << " misses=" << row.misses
            << '\n';
        return 0;
      }
      case Mode::kSweep: {
        const AnyPredictor predictor = make_predictor(cfg);
        std::vector<SummaryRow> rows;
        for (const auto& run : sweep_plan(cfg)) {
          const RunLog l = run_once(cfg, predictor, run.target, run.phi1, run.seed);
          write_runlog_csv(dir / ("runlog_" + run.name + ".csv"), l, prov);
          rows.push_back(summarize(run.name, l, run.phi1, cfg.threshold));
          const auto& r = rows.back();
          log << r.run << ": eps=" << format_number(r.final_eps)
              << " iters_to_threshold=" << r.iters_to_threshold << '\n';
        }
        write_summary_csv(dir / "summary.csv", rows, prov);
        return 0;
      }
    }
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::kAbortedRun ? 2 : 1;
  }
}

}  // namespace rally
