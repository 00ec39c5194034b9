#include "lrr/experiment.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>

#include <json.hpp>

#include "lrr/csv.hpp"
#include "lrr/env.hpp"
#include "lrr/reward_model.hpp"
#include "lrr/rng.hpp"
#include "lrr/sac.hpp"

namespace lrr {

namespace {

std::optional<RewardFamily> family_for_mode(const std::string& mode) {
  if (mode == "lrr_gaussian") return RewardFamily::Gaussian;
  if (mode == "lrr_skew") return RewardFamily::SkewNormal;
  if (mode == "mse_rd") return RewardFamily::FixedSigmaMse;
  return std::nullopt;  // sparse, oracle_dense
}

StoredReward stored_reward_for_mode(const std::string& mode) {
  if (mode == "sparse") return StoredReward::Sparse;
  if (mode == "oracle_dense") return StoredReward::OracleDense;
  return StoredReward::ModelMu;
}

std::vector<int> hidden_sizes(const ExperimentConfig& cfg) {
  return std::vector<int>(cfg.hidden_layers, cfg.hidden_units);
}

}  // namespace

EvalPoint evaluate_policy(const SacAgent& agent, Env& env, int episodes, std::uint64_t seed,
                          long label) {
  if (episodes < 1) throw DomainError("evaluate_policy: episodes must be >= 1");
  std::vector<double> returns;
  returns.reserve(episodes);
  for (int e = 0; e < episodes; ++e) {
    Vec s = env.reset(derive_seed(seed, "eval_episode",
                                  static_cast<std::uint64_t>(label) * 1000003ULL +
                                      static_cast<std::uint64_t>(e)));
    double ep_return = 0.0;
    while (true) {
      const Vec a = select_action(agent, s, /*deterministic=*/true);
      const StepResult r = env.step(a);
      ep_return += r.reward;
      if (r.terminated || r.truncated) break;
      s = r.next_state;
    }
    returns.push_back(ep_return);
  }
  EvalPoint p;
  p.step = label;
  double sum = 0.0;
  for (double r : returns) sum += r;
  p.mean_return = sum / returns.size();
  double var = 0.0;
  for (double r : returns) var += (r - p.mean_return) * (r - p.mean_return);
  p.std_return = std::sqrt(var / returns.size());
  return p;
}

RunRecord run_single_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto t_start = std::chrono::steady_clock::now();
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);

  EpisodicWrapper env(make_env(cfg.environment, cfg.horizon));
  auto eval_env = make_env(cfg.environment, cfg.horizon);
  const EnvSpec& spec = env.spec();

  RngStream root(seed);
  RngStream warmup_rng = root.substream("warmup_actions");
  RngStream action_rng = root.substream("action_noise");
  RngStream sac_batch_rng = root.substream("sac_batch");
  RngStream sac_update_rng = root.substream("sac_update_noise");
  RngStream reward_noise_rng = root.substream("reward_noise");
  RngStream reward_batch_rng = root.substream("reward_batch");
  RngStream agent_init_rng = root.substream("agent_init");
  RngStream reward_init_rng = root.substream("reward_init");

  SacConfig sac_cfg;
  sac_cfg.learning_rate = cfg.learning_rate;
  sac_cfg.gamma = cfg.gamma;
  sac_cfg.polyak_tau = cfg.polyak;
  sac_cfg.alpha_init = cfg.alpha_init;
  sac_cfg.target_entropy = cfg.target_entropy;
  sac_cfg.hidden_sizes = hidden_sizes(cfg);
  SacAgent agent = make_sac_agent(spec, sac_cfg, agent_init_rng);

  std::optional<RewardModel> model;
  if (auto family = family_for_mode(cfg.reward_mode)) {
    model = make_reward_model(*family, spec.state_dim, spec.action_dim, hidden_sizes(cfg),
                              reward_init_rng);
    model->sigma_min = cfg.sigma_min;
    model->sigma_max = cfg.sigma_max;
  }
  const StoredReward stored_mode = stored_reward_for_mode(cfg.reward_mode);
  const bool relabel_on_sample = cfg.relabel_mode == "on_sample";

  ReplayBuffer buffer(cfg.replay_capacity, spec.state_dim, spec.action_dim);
  std::deque<Trajectory> reward_buffer;

  RunRecord rec;
  rec.config_hash = config_hash(cfg);
  rec.seed = seed;
  const std::string tag = "_seed" + std::to_string(seed);
  rec.eval_csv_path = cfg.output_dir + "/eval" + tag + ".csv";
  rec.reward_loss_csv_path = cfg.output_dir + "/reward_loss" + tag + ".csv";
  rec.policy_checkpoint_path = cfg.output_dir + "/policy" + tag + ".net";

  std::optional<CsvWriter> dump;
  if (cfg.dump_trajectories) {
    std::vector<std::string> header = {"episode", "t"};
    for (int d = 0; d < spec.state_dim; ++d) header.push_back("state_" + std::to_string(d));
    for (int d = 0; d < spec.action_dim; ++d) header.push_back("action_" + std::to_string(d));
    header.push_back("inner_reward");
    header.push_back("emitted_reward");
    dump.emplace(cfg.output_dir + "/trajectories" + tag + ".csv", header);
  }

  long steps = 0;
  long next_eval = cfg.eval_interval;
  long reward_update_index = 0;
  long episode = 0;

  if (cfg.total_env_steps > 0) {
    rec.evals.push_back(evaluate_policy(agent, *eval_env, cfg.eval_episodes, seed, 0));
  }

  while (steps < cfg.total_env_steps) {
    EpisodeRecord ep;
    Vec s = env.reset(derive_seed(seed, "env_reset", static_cast<std::uint64_t>(episode)));
    while (true) {
      Vec a(spec.action_dim);
      if (steps < cfg.start_steps) {
        for (int d = 0; d < spec.action_dim; ++d) {
          a(d) = warmup_rng.uniform(spec.action_low(d), spec.action_high(d));
        }
      } else {
        a = select_action(agent, s, /*deterministic=*/false, &action_rng);
      }
      const StepResult r = env.step(a);
      ep.traj.states.push_back(s);
      ep.traj.actions.push_back(a);
      ep.inner_rewards.push_back(env.last_inner_reward());
      ep.emitted_rewards.push_back(r.reward);
      ++steps;
      if (r.terminated || r.truncated) {
        ep.final_state = r.next_state;
        ep.terminated = r.terminated;
        break;
      }
      s = r.next_state;
    }
    ep.traj.episodic_return = env.accumulated_return();

    if (dump) {
      for (int t = 0; t < ep.traj.length(); ++t) {
        std::vector<std::string> cells = {std::to_string(episode), std::to_string(t)};
        for (int d = 0; d < spec.state_dim; ++d) {
          cells.push_back(format_double(ep.traj.states[t](d)));
        }
        for (int d = 0; d < spec.action_dim; ++d) {
          cells.push_back(format_double(ep.traj.actions[t](d)));
        }
        cells.push_back(format_double(ep.inner_rewards[t]));
        cells.push_back(format_double(ep.emitted_rewards[t]));
        dump->row(cells);
      }
    }

    if (model) {
      reward_buffer.push_back(ep.traj);
      while (static_cast<int>(reward_buffer.size()) > cfg.reward_buffer_trajectories) {
        reward_buffer.pop_front();
      }
      for (int k = 0; k < cfg.reward_updates_per_episode; ++k) {
        std::vector<const Trajectory*> minibatch;
        minibatch.reserve(cfg.reward_batch);
        for (int j = 0; j < cfg.reward_batch; ++j) {
          const int idx = reward_batch_rng.uniform_int(static_cast<int>(reward_buffer.size()));
          minibatch.push_back(&reward_buffer[idx]);
        }
        const TrainStepStats stats =
            train_step(*model, minibatch, cfg.learning_rate, reward_noise_rng,
                       cfg.shared_noise);
        rec.reward_losses.push_back(
            {reward_update_index++, stats.loss, stats.mean_sigma, stats.mean_abs_residual});
      }
    }

    relabel_and_store(buffer, ep, stored_mode, model ? &*model : nullptr);

    // SAC updates start once the warmup is over; one gradient step per
    // collected env step
    const long n_updates =
        (steps < cfg.start_steps)
            ? 0
            : static_cast<long>(ep.traj.length()) * cfg.grad_steps_per_env_step;
    for (long u = 0; u < n_updates; ++u) {
      if (buffer.size() < cfg.sac_batch) break;
      TransitionBatch batch = buffer.sample(cfg.sac_batch, sac_batch_rng);
      if (relabel_on_sample && model) {
        batch.rewards = predict_mu_batch(*model, batch.states, batch.actions);
      }
      sac_update(agent, batch, sac_update_rng);
    }

    while (next_eval <= steps) {
      rec.evals.push_back(
          evaluate_policy(agent, *eval_env, cfg.eval_episodes, seed, next_eval));
      next_eval += cfg.eval_interval;
    }
    ++episode;
  }

  {
    CsvWriter eval_csv(rec.eval_csv_path, {"step", "mean_return", "std_return", "seed"});
    for (const EvalPoint& p : rec.evals) {
      eval_csv.row({std::to_string(p.step), format_double(p.mean_return),
                    format_double(p.std_return), std::to_string(seed)});
    }
    eval_csv.close();
  }
  {
    CsvWriter loss_csv(rec.reward_loss_csv_path,
                       {"update_index", "loss", "mean_sigma", "mean_abs_residual"});
    for (const RewardLossPoint& p : rec.reward_losses) {
      loss_csv.row({std::to_string(p.update_index), format_double(p.loss),
                    format_double(p.mean_sigma), format_double(p.mean_abs_residual)});
    }
    loss_csv.close();
  }
  if (dump) dump->close();

  nn::save_net_file(agent.policy, rec.policy_checkpoint_path);
  if (model) {
    rec.reward_model_checkpoint_path = cfg.output_dir + "/reward" + tag + ".model";
    save_reward_model_file(*model, rec.reward_model_checkpoint_path);
  }

  rec.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  {
    nlohmann::json j;
    j["config_hash"] = rec.config_hash;
    j["seed"] = seed;
    j["wall_clock_seconds"] = rec.wall_clock_seconds;
    j["episodes"] = episode;
    j["env_steps"] = steps;
    j["evals"] = rec.evals.size();
    j["reward_updates"] = rec.reward_losses.size();
    if (!rec.evals.empty()) j["final_mean_return"] = rec.evals.back().mean_return;
    std::ofstream out(cfg.output_dir + "/run" + tag + ".json");
    if (!out) throw IoError("run_single_seed: cannot write run record");
    out << j.dump(2) << "\n";
  }
  return rec;
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.output_dir);
  {
    std::ofstream out(cfg.output_dir + "/config.json");
    if (!out) throw IoError("run_experiment: cannot write config.json");
    out << serialize_config(cfg);
  }
  std::vector<RunRecord> records;
  records.reserve(cfg.seeds.size());
  for (std::uint64_t seed : cfg.seeds) {
    records.push_back(run_single_seed(cfg, seed));
  }
  return records;
}

}  // namespace lrr
