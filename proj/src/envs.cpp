#include "lrr/env.hpp"

#include <cmath>
#include <numbers>

namespace lrr {

Vec BasicEnv::reset(std::uint64_t seed) {
  RngStream rng(seed);
  awaiting_reset_ = false;
  steps_taken_ = 0;
  return do_reset(rng);
}

StepResult BasicEnv::step(const Vec& action) {
  if (awaiting_reset_) {
    throw ContractError(spec_.name + ": step() after episode end without reset()");
  }
  require_shape(action.size() == spec_.action_dim,
                spec_.name + ": action has wrong dimension");
  Vec clipped = action;
  bool any_clip = false;
  for (int d = 0; d < spec_.action_dim; ++d) {
    if (clipped(d) < spec_.action_low(d)) {
      clipped(d) = spec_.action_low(d);
      any_clip = true;
    } else if (clipped(d) > spec_.action_high(d)) {
      clipped(d) = spec_.action_high(d);
      any_clip = true;
    }
  }
  if (any_clip) ++clip_count_;

  StepResult result = do_step(clipped);
  ++steps_taken_;
  result.truncated = false;
  if (!result.terminated && steps_taken_ >= spec_.max_episode_length) {
    result.truncated = true;
  }
  if (result.terminated || result.truncated) awaiting_reset_ = true;
  return result;
}

// ---------------------------------------------------------------------------
// PointMass2D

PointMass2dEnv::PointMass2dEnv(int max_episode_length) {
  spec_.name = "point_mass";
  spec_.state_dim = 4;
  spec_.action_dim = 2;
  spec_.action_low = Vec::Constant(2, -1.0);
  spec_.action_high = Vec::Constant(2, 1.0);
  spec_.max_episode_length = max_episode_length;
}

Vec PointMass2dEnv::do_reset(RngStream& rng) {
  pos_.x() = rng.uniform(-1.0, 1.0);
  pos_.y() = rng.uniform(-1.0, 1.0);
  vel_.setZero();
  Vec s(4);
  s << pos_.x(), pos_.y(), vel_.x(), vel_.y();
  return s;
}

StepResult PointMass2dEnv::do_step(const Vec& action) {
  // explicit Euler: position advances with the pre-update velocity
  const Eigen::Vector2d v_old = vel_;
  vel_ += kDt * Eigen::Vector2d(action(0), action(1));
  pos_ += kDt * v_old;

  const double dist = (pos_ - Eigen::Vector2d(kGoalX, kGoalY)).norm();
  StepResult r;
  r.next_state = Vec(4);
  r.next_state << pos_.x(), pos_.y(), vel_.x(), vel_.y();
  r.reward = -dist;
  r.terminated = dist < kGoalRadius;
  return r;
}

// ---------------------------------------------------------------------------
// Pendulum

namespace {
double wrap_angle(double theta) {
  const double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(theta + std::numbers::pi, two_pi);
  if (w < 0.0) w += two_pi;
  return w - std::numbers::pi;
}
}  // namespace

PendulumEnv::PendulumEnv(int max_episode_length) {
  spec_.name = "pendulum";
  spec_.state_dim = 3;
  spec_.action_dim = 1;
  spec_.action_low = Vec::Constant(1, -2.0);
  spec_.action_high = Vec::Constant(1, 2.0);
  spec_.max_episode_length = max_episode_length;
}

Vec PendulumEnv::do_reset(RngStream& rng) {
  theta_ = rng.uniform(-std::numbers::pi, std::numbers::pi);
  theta_dot_ = rng.uniform(-1.0, 1.0);
  Vec s(3);
  s << std::cos(theta_), std::sin(theta_), theta_dot_;
  return s;
}

StepResult PendulumEnv::do_step(const Vec& action) {
  const double u = action(0);
  const double th = wrap_angle(theta_);
  const double cost = th * th + 0.1 * theta_dot_ * theta_dot_ + 0.001 * u * u;

  // explicit Euler on (theta, theta_dot); unit mass and length
  const double accel = 1.5 * kGravity * std::sin(theta_) + 3.0 * u;
  const double theta_old_dot = theta_dot_;
  theta_ += kDt * theta_old_dot;
  theta_dot_ += kDt * accel;
  theta_dot_ = std::clamp(theta_dot_, -kMaxSpeed, kMaxSpeed);

  StepResult r;
  r.next_state = Vec(3);
  r.next_state << std::cos(theta_), std::sin(theta_), theta_dot_;
  r.reward = -cost;
  r.terminated = false;
  return r;
}

// ---------------------------------------------------------------------------
// DelayedChain

DelayedChainEnv::DelayedChainEnv(int max_episode_length) {
  spec_.name = "delayed_chain";
  spec_.state_dim = 2;
  spec_.action_dim = 1;
  spec_.action_low = Vec::Constant(1, -1.0);
  spec_.action_high = Vec::Constant(1, 1.0);
  spec_.max_episode_length = max_episode_length;
}

Vec DelayedChainEnv::do_reset(RngStream& /*rng*/) {
  // deterministic start: cell 0, no key
  x_ = 0.0;
  has_key_ = false;
  Vec s(2);
  s << x_, 0.0;
  return s;
}

StepResult DelayedChainEnv::do_step(const Vec& action) {
  x_ = std::clamp(x_ + action(0), 0.0, kGoalCell);
  const double cell = std::round(x_);
  if (cell == kKeyCell) has_key_ = true;

  StepResult r;
  r.terminated = has_key_ && cell == kGoalCell;
  r.reward = r.terminated ? 1.0 : 0.0;
  r.next_state = Vec(2);
  r.next_state << x_, has_key_ ? 1.0 : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// EpisodicWrapper

EpisodicWrapper::EpisodicWrapper(std::unique_ptr<Env> inner) : inner_(std::move(inner)) {
  if (!inner_) throw ContractError("EpisodicWrapper: null inner environment");
}

Vec EpisodicWrapper::reset(std::uint64_t seed) {
  accumulated_return_ = 0.0;
  last_inner_reward_ = 0.0;
  return inner_->reset(seed);
}

StepResult EpisodicWrapper::step(const Vec& action) {
  StepResult r = inner_->step(action);
  last_inner_reward_ = r.reward;
  accumulated_return_ += r.reward;
  r.reward = (r.terminated || r.truncated) ? accumulated_return_ : 0.0;
  return r;
}

// ---------------------------------------------------------------------------

std::unique_ptr<Env> make_env(std::string_view name, int max_episode_length) {
  if (max_episode_length < 1) throw DomainError("make_env: horizon must be >= 1");
  if (name == "point_mass") return std::make_unique<PointMass2dEnv>(max_episode_length);
  if (name == "pendulum") return std::make_unique<PendulumEnv>(max_episode_length);
  if (name == "delayed_chain") return std::make_unique<DelayedChainEnv>(max_episode_length);
  throw DomainError("make_env: unknown environment '" + std::string(name) + "'");
}

const std::vector<std::string>& registered_env_names() {
  static const std::vector<std::string> names = {"point_mass", "pendulum", "delayed_chain"};
  return names;
}

}  // namespace lrr
