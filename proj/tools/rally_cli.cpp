// rally: command-line front end for the experiment drivers.
#include "rally/rally.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <utility>

namespace {

rally::Vec2 parse_target(const std::string& text) {
  const auto parts = rally::detail::split(text, ',');
  if (parts.size() != 2) {
    throw rally::Error(rally::ErrorKind::kConfig, "--target: expected x,y");
  }
  return {rally::parse_number(parts[0]), rally::parse_number(parts[1])};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online interception-policy optimization experiments"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> predictor;
  std::optional<double> alpha1;
  std::optional<int> iters;
  std::optional<std::string> target;

  const std::pair<const char*, const char*> commands[] = {
      {"grad-check", "compare analytic landing Jacobians with finite differences"},
      {"baseline-variance", "landing spread of fixed policies"},
      {"gen-data", "sample policies and record their landing points"},
      {"train-blackbox", "fit the neural landing model"},
      {"run", "one online optimization run"},
      {"sweep", "runs over several targets or initial policies"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON experiment config");
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--predictor", predictor, "greybox or blackbox")
        ->check(CLI::IsMember({"greybox", "blackbox"}));
    sub->add_option("--alpha1", alpha1, "initial step length");
    sub->add_option("--iters", iters, "iterations per run");
    sub->add_option("--target", target, "target landing point x,y [m]");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    rally::ExperimentConfig cfg =
        config_path.empty() ? rally::ExperimentConfig{} : rally::load_config(config_path);
    cfg.mode = rally::parse_mode(app.get_subcommands().front()->get_name());
    if (seed) cfg.seed = *seed;
    if (out_dir) cfg.output_dir = *out_dir;
    if (predictor) cfg.predictor = rally::parse_predictor(*predictor);
    if (alpha1) cfg.alpha1 = *alpha1;
    if (iters) cfg.n_iters = *iters;
    if (target) cfg.target = parse_target(*target);
    return rally::run_experiment(cfg, std::cout, std::cerr);
  } catch (const rally::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
