#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lrr/common.hpp"
#include "lrr/config.hpp"
#include "lrr/csv.hpp"
#include "lrr/diagnostics.hpp"
#include "lrr/env.hpp"
#include "lrr/experiment.hpp"
#include "lrr/nn.hpp"
#include "lrr/sac.hpp"
#include "lrr/verify.hpp"

namespace {

int cmd_train(const std::string& config_path) {
  const lrr::ExperimentConfig cfg = lrr::load_config_file(config_path);
  const auto records = lrr::run_experiment(cfg);
  for (const auto& rec : records) {
    std::cout << "seed " << rec.seed << ": " << rec.evals.size() << " evals";
    if (!rec.evals.empty()) {
      std::cout << ", final mean return " << rec.evals.back().mean_return;
    }
    std::cout << " (" << rec.eval_csv_path << ")\n";
  }
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& env_name, int horizon,
             int episodes, std::uint64_t seed) {
  auto env = lrr::make_env(env_name, horizon);
  lrr::SacConfig cfg;
  lrr::RngStream init(0);
  lrr::SacAgent agent = lrr::make_sac_agent(env->spec(), cfg, init);
  agent.policy = lrr::nn::load_net_file(checkpoint);
  if (agent.policy.input_dim() != env->spec().state_dim ||
      agent.policy.output_dim() != 2 * env->spec().action_dim) {
    throw lrr::ShapeError("eval: checkpoint does not match environment '" + env_name + "'");
  }
  const lrr::EvalPoint p = lrr::evaluate_policy(agent, *env, episodes, seed, 0);
  std::cout << "episodes=" << episodes << " mean_return=" << p.mean_return
            << " std_return=" << p.std_return << "\n";
  return 0;
}

int cmd_diagnose(const std::string& config_path, int episodes) {
  const lrr::ExperimentConfig cfg = lrr::load_config_file(config_path);
  const std::uint64_t seed = cfg.seeds.front();
  std::cout << "environment,rho1,ci_low,ci_high,n\n";
  for (const std::string& name : lrr::registered_env_names()) {
    auto env = lrr::make_env(name, cfg.horizon);
    const lrr::AutocorrReport rep = lrr::measure_env_autocorr(*env, episodes, seed);
    std::cout << rep.environment << "," << lrr::format_double(rep.rho1) << ","
              << lrr::format_double(rep.ci_low) << "," << lrr::format_double(rep.ci_high)
              << "," << rep.n << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Likelihood-based reward redistribution for episodic-reward RL"};
  app.require_subcommand(1);

  std::string config_path;
  auto* train = app.add_subcommand("train", "Run the training loop for every seed in a config");
  train->add_option("config", config_path, "JSON config file")->required();

  std::string checkpoint, env_name = "point_mass";
  int horizon = 200, episodes = 10;
  std::uint64_t seed = 0;
  auto* eval = app.add_subcommand("eval", "Evaluate a saved policy deterministically");
  eval->add_option("checkpoint", checkpoint, "policy checkpoint (lrrnet format)")->required();
  eval->add_option("--env", env_name, "environment name");
  eval->add_option("--horizon", horizon, "episode horizon");
  eval->add_option("--episodes", episodes, "evaluation episodes");
  eval->add_option("--seed", seed, "evaluation seed");

  int diag_episodes = 200;
  auto* diag = app.add_subcommand("diagnose-autocorr",
                                  "Lag-1 reward autocorrelation per environment");
  diag->add_option("config", config_path, "JSON config file")->required();
  diag->add_option("--episodes", diag_episodes, "episodes per environment");

  std::uint64_t verify_seed = 20240901ULL;
  auto* verify = app.add_subcommand("verify", "Machine-check the model's closed-form properties");
  verify->add_option("--seed", verify_seed, "seed for randomized checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(train)) return cmd_train(config_path);
    if (app.got_subcommand(eval)) return cmd_eval(checkpoint, env_name, horizon, episodes, seed);
    if (app.got_subcommand(diag)) return cmd_diagnose(config_path, diag_episodes);
    if (app.got_subcommand(verify)) {
      return lrr::run_verification(std::cout, verify_seed) == 0 ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
