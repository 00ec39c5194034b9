#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lrr/common.hpp"

namespace lrr {

// Every experiment knob in one place. Defaults follow the reference
// hyper-parameter table: Adam at 3e-4 for all losses, gamma 0.99, polyak
// 0.005, initial temperature 1, target entropy -dim(A), 2x256 ReLU networks,
// 1e5-transition replay, SAC minibatch 512, reward-model minibatch 4.
struct ExperimentConfig {
  std::string environment = "point_mass";
  // one of: lrr_gaussian, lrr_skew, mse_rd, sparse, oracle_dense
  std::string reward_mode = "lrr_gaussian";

  double learning_rate = 3e-4;
  double gamma = 0.99;
  double polyak = 0.005;
  double alpha_init = 1.0;
  std::optional<double> target_entropy;  // absent -> -action_dim

  int hidden_layers = 2;
  int hidden_units = 256;

  int grad_steps_per_env_step = 1;
  int replay_capacity = 100000;
  int sac_batch = 512;
  int reward_batch = 4;
  int reward_updates_per_episode = 4;
  int reward_buffer_trajectories = 500;

  int horizon = 200;
  long total_env_steps = 50000;
  int start_steps = 1000;  // uniform-random warmup actions

  std::vector<std::uint64_t> seeds = {0};
  std::string output_dir = "runs";

  bool shared_noise = false;             // reuse one noise row across hold-out indices
  std::string relabel_mode = "on_insert";  // or "on_sample"
  bool dump_trajectories = false;

  int eval_interval = 1000;
  int eval_episodes = 5;

  double sigma_min = 1e-4;
  double sigma_max = 100.0;
};

// Parses a JSON document; an empty document means "all defaults". Unknown
// keys, type mismatches and out-of-range values throw ConfigError naming the
// offending key.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

// Canonical serialization (keys sorted); parse(serialize(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

// FNV-1a over the canonical serialization: stable under key reordering in
// the source document, sensitive to every semantic field.
std::uint64_t config_hash(const ExperimentConfig& config);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace lrr
