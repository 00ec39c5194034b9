#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lrr/config.hpp"
#include "lrr/common.hpp"

namespace lrr {

struct EvalPoint {
  long step = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
};

struct RewardLossPoint {
  long update_index = 0;
  double loss = 0.0;
  double mean_sigma = 0.0;
  double mean_abs_residual = 0.0;
};

struct RunRecord {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::vector<EvalPoint> evals;
  std::vector<RewardLossPoint> reward_losses;
  double wall_clock_seconds = 0.0;
  std::string eval_csv_path;
  std::string reward_loss_csv_path;
  std::string policy_checkpoint_path;
  std::string reward_model_checkpoint_path;  // empty for sparse/oracle modes
};

// Collect -> reward-model train -> relabel -> SAC update loop for one seed.
// Writes eval_seed<S>.csv, reward_loss_seed<S>.csv, checkpoints and
// run_seed<S>.json under config.output_dir. Identical (config, seed) pairs
// produce byte-identical CSVs.
RunRecord run_single_seed(const ExperimentConfig& config, std::uint64_t seed);

// Runs every seed in the config (sequentially) and writes config.json.
std::vector<RunRecord> run_experiment(const ExperimentConfig& config);

struct SacAgent;
class Env;

// Mean and population std of the returns (sum of dense env rewards) of
// `episodes` deterministic-policy episodes. Episode e resets the env with
// derive_seed(seed, "eval_episode", label * 1000003 + e).
EvalPoint evaluate_policy(const SacAgent& agent, Env& env, int episodes, std::uint64_t seed,
                          long label);

}  // namespace lrr
