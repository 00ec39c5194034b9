#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "lrr/common.hpp"
#include "lrr/rng.hpp"

namespace lrr {

struct EnvSpec {
  std::string name;
  int state_dim = 0;
  int action_dim = 0;
  Vec action_low;
  Vec action_high;
  int max_episode_length = 200;
};

struct StepResult {
  Vec next_state;
  double reward = 0.0;
  bool terminated = false;  // reached a terminal state
  bool truncated = false;   // cut off by the horizon; never set together with terminated
};

class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual Vec reset(std::uint64_t seed) = 0;
  virtual StepResult step(const Vec& action) = 0;
  // Number of steps whose action needed clipping into bounds.
  virtual long clip_count() const = 0;
};

// Shared machinery for concrete environments: seeds the reset stream, clips
// actions (counting clips), enforces the horizon (truncated, not terminated),
// and rejects step() after an episode has ended.
class BasicEnv : public Env {
 public:
  const EnvSpec& spec() const final { return spec_; }
  Vec reset(std::uint64_t seed) final;
  StepResult step(const Vec& action) final;
  long clip_count() const final { return clip_count_; }

 protected:
  virtual Vec do_reset(RngStream& rng) = 0;
  // Receives the clipped action; sets reward and terminated only.
  virtual StepResult do_step(const Vec& action) = 0;

  EnvSpec spec_;

 private:
  bool awaiting_reset_ = true;
  int steps_taken_ = 0;
  long clip_count_ = 0;
};

// Point mass on the plane: state (pos, vel), bounded acceleration control,
// reward -||pos - goal||. Terminates within 0.05 of the goal.
class PointMass2dEnv final : public BasicEnv {
 public:
  explicit PointMass2dEnv(int max_episode_length = 200);

 protected:
  Vec do_reset(RngStream& rng) override;
  StepResult do_step(const Vec& action) override;

 private:
  Eigen::Vector2d pos_, vel_;
  static constexpr double kDt = 0.05;
  static constexpr double kGoalX = 0.5, kGoalY = 0.5;
  static constexpr double kGoalRadius = 0.05;
};

// Torque-controlled swing-up: state (cos th, sin th, th_dot), reward
// -(th^2 + 0.1 th_dot^2 + 0.001 u^2) with th wrapped to [-pi, pi].
// Never terminates; episodes end by truncation.
class PendulumEnv final : public BasicEnv {
 public:
  explicit PendulumEnv(int max_episode_length = 200);

 protected:
  Vec do_reset(RngStream& rng) override;
  StepResult do_step(const Vec& action) override;

 private:
  double theta_ = 0.0, theta_dot_ = 0.0;
  static constexpr double kDt = 0.05;
  static constexpr double kGravity = 10.0;
  static constexpr double kMaxSpeed = 8.0;
};

// 1-D key-door chain embedded in continuous state [position, key_flag].
// Cells 0..4; picking up the key at cell 2 is required before the goal at
// cell 4 pays reward 1 and terminates. All other steps pay 0.
class DelayedChainEnv final : public BasicEnv {
 public:
  explicit DelayedChainEnv(int max_episode_length = 200);

 protected:
  Vec do_reset(RngStream& rng) override;
  StepResult do_step(const Vec& action) override;

 private:
  double x_ = 0.0;
  bool has_key_ = false;
  static constexpr double kKeyCell = 2.0;
  static constexpr double kGoalCell = 4.0;
};

// Episodic-reward wrapper: emits 0 at every non-final step and the sum of
// all inner per-step rewards at the final step, whether the episode
// terminated or was truncated.
class EpisodicWrapper final : public Env {
 public:
  explicit EpisodicWrapper(std::unique_ptr<Env> inner);

  const EnvSpec& spec() const override { return inner_->spec(); }
  Vec reset(std::uint64_t seed) override;
  StepResult step(const Vec& action) override;
  long clip_count() const override { return inner_->clip_count(); }

  double last_inner_reward() const { return last_inner_reward_; }
  double accumulated_return() const { return accumulated_return_; }
  Env& inner() { return *inner_; }

 private:
  std::unique_ptr<Env> inner_;
  double accumulated_return_ = 0.0;
  double last_inner_reward_ = 0.0;
};

// Registered names: "point_mass", "pendulum", "delayed_chain".
std::unique_ptr<Env> make_env(std::string_view name, int max_episode_length = 200);
const std::vector<std::string>& registered_env_names();

}  // namespace lrr
