#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "lrr/common.hpp"
#include "lrr/env.hpp"
#include "lrr/nn.hpp"
#include "lrr/reward_model.hpp"
#include "lrr/rng.hpp"

namespace lrr {

struct SacConfig {
  double learning_rate = 3e-4;
  double gamma = 0.99;
  double polyak_tau = 0.005;
  double alpha_init = 1.0;
  std::optional<double> target_entropy;  // defaults to -action_dim
  std::vector<int> hidden_sizes = {256, 256};
  double log_std_min = -20.0;
  double log_std_max = 2.0;
};

// Policy emits per-dimension squashed-Gaussian mean and log-std; twin critics
// with polyak-averaged targets; temperature is log-parameterized and tuned
// toward the target entropy.
struct SacAgent {
  SacConfig cfg;
  int state_dim = 0;
  int action_dim = 0;
  Vec action_low, action_high;
  double target_entropy = 0.0;

  nn::DenseNet policy;  // state -> [mean; log_std]
  nn::DenseNet q1, q2;  // [state; action] -> scalar
  nn::DenseNet q1_target, q2_target;
  nn::AdamState policy_adam, q1_adam, q2_adam;
  double log_alpha = 0.0;
  nn::ScalarAdam alpha_adam;

  double alpha() const;
};

SacAgent make_sac_agent(const EnvSpec& env_spec, const SacConfig& cfg, RngStream& init_rng);

// Tanh-squashed action scaled into bounds; deterministic mode returns the
// squashed mean and needs no rng.
Vec select_action(const SacAgent& agent, const Vec& state, bool deterministic,
                  RngStream* rng = nullptr);

struct TransitionBatch {
  Mat states;       // state_dim x B
  Mat actions;      // action_dim x B
  Vec rewards;      // B
  Mat next_states;  // state_dim x B
  Vec done;         // B; 1 = true terminal (bootstrapping cut), 0 otherwise

  int size() const { return static_cast<int>(rewards.size()); }
};

struct SacLosses {
  double critic1 = 0.0;
  double critic2 = 0.0;
  double actor = 0.0;
  double alpha = 0.0;
};

struct SacGrads {
  nn::Gradients q1, q2, policy;
  double d_log_alpha = 0.0;
  SacLosses losses;
};

// Clipped-double-Q target y = r + gamma * (1 - done) * (min Q_target - alpha * log pi).
// target_eps holds the frozen standard normal draws (action_dim x B) for the
// next-state action sample.
Vec critic_targets(const SacAgent& agent, const TransitionBatch& batch, const Mat& target_eps);

// All gradients of one SAC update with frozen noise; pure function of the
// agent and batch, used directly by sac_update and by gradient checks.
SacGrads sac_gradients(const SacAgent& agent, const TransitionBatch& batch,
                       const Mat& target_eps, const Mat& actor_eps);

// Loss evaluators matching sac_gradients, for finite-difference verification.
double critic_loss_value(const SacAgent& agent, const TransitionBatch& batch,
                         const Mat& target_eps, int which);
double actor_loss_value(const SacAgent& agent, const TransitionBatch& batch,
                        const Mat& actor_eps);
double alpha_loss_value(const SacAgent& agent, const TransitionBatch& batch,
                        const Mat& actor_eps);

// Draws target/actor noise from rng, applies one Adam step to each loss and
// polyak-updates both targets. Returns the pre-update losses.
SacLosses sac_update(SacAgent& agent, const TransitionBatch& batch, RngStream& rng);

// FIFO ring buffer of transitions with uniform sampling.
class ReplayBuffer {
 public:
  ReplayBuffer(int capacity, int state_dim, int action_dim);

  void add(const Vec& state, const Vec& action, double reward, const Vec& next_state,
           bool done);
  int size() const { return size_; }
  int capacity() const { return capacity_; }
  TransitionBatch sample(int batch_size, RngStream& rng) const;

  // Direct views used by tests and on-sample relabeling.
  double reward_at(int index) const { return rewards_(index); }
  Vec state_at(int index) const { return states_.col(index); }

 private:
  int capacity_, size_ = 0, head_ = 0;
  Mat states_, actions_, next_states_;
  Vec rewards_, done_;
};

// A completed episode as collected from an EpisodicWrapper.
struct EpisodeRecord {
  Trajectory traj;                     // (s_t, a_t) and the episodic return
  std::vector<double> inner_rewards;   // dense env rewards, one per step
  std::vector<double> emitted_rewards; // wrapper output: 0 ... 0, R_ep
  Vec final_state;
  bool terminated = false;  // true terminal state (not a horizon cut)
};

enum class StoredReward {
  ModelMu,      // redistribute(model, traj): noise-free means
  Sparse,       // wrapper-emitted rewards (0 except the final step)
  OracleDense,  // the env's true per-step rewards
};

// Inserts the episode's transitions with rewards chosen by mode. model may
// be null unless mode == ModelMu. done is set only on true termination.
void relabel_and_store(ReplayBuffer& buffer, const EpisodeRecord& episode, StoredReward mode,
                       const RewardModel* model);

}  // namespace lrr
