#include "lrr/sac.hpp"

#include <cmath>
#include <numbers>

#include "lrr/math.hpp"

namespace lrr {

namespace {

constexpr double kSquashGuard = 1e-6;

struct PolicySample {
  nn::ForwardCache cache;
  Mat mean;        // action_dim x B
  Mat log_std;     // clamped
  Mat clamp_mask;  // 1 where the raw log-std is strictly inside the clamp
  Mat std;
  Mat u;           // pre-squash sample
  Mat tanh_u;
  Mat action_env;  // scaled into bounds
  Vec log_prob;    // per sample
};

// Forward the policy on a batch of states and squash the frozen-noise sample
// into the action bounds, keeping everything backward() needs.
PolicySample run_policy(const SacAgent& agent, const Mat& states, const Mat& eps) {
  const int a_dim = agent.action_dim;
  require_shape(eps.rows() == a_dim && eps.cols() == states.cols(),
                "run_policy: eps must be action_dim x batch");
  PolicySample s;
  const Mat out = nn::forward(agent.policy, states, &s.cache);
  s.mean = out.topRows(a_dim);
  const Mat raw_ls = out.bottomRows(a_dim);
  s.log_std = raw_ls.cwiseMax(agent.cfg.log_std_min).cwiseMin(agent.cfg.log_std_max);
  s.clamp_mask = ((raw_ls.array() > agent.cfg.log_std_min) &&
                  (raw_ls.array() < agent.cfg.log_std_max))
                     .cast<double>()
                     .matrix();
  s.std = s.log_std.array().exp().matrix();
  s.u = s.mean + s.std.cwiseProduct(eps);
  s.tanh_u = s.u.array().tanh().matrix();

  const Vec half = 0.5 * (agent.action_high - agent.action_low);
  const Vec center = 0.5 * (agent.action_high + agent.action_low);
  s.action_env = (s.tanh_u.array().colwise() * half.array()).colwise() + center.array();

  // log pi(a|s) = sum_d [ -log_std - eps^2/2 - log sqrt(2 pi)
  //                       - log(half * (1 - tanh(u)^2) + guard) ]
  const Eigen::ArrayXXd jac =
      ((1.0 - s.tanh_u.array().square()).colwise() * half.array()) + kSquashGuard;
  s.log_prob = (-s.log_std.array() - 0.5 * eps.array().square() - kLogSqrt2Pi -
                jac.log())
                   .colwise()
                   .sum()
                   .transpose();
  return s;
}

Mat stack_state_action(const Mat& states, const Mat& actions) {
  Mat x(states.rows() + actions.rows(), states.cols());
  x.topRows(states.rows()) = states;
  x.bottomRows(actions.rows()) = actions;
  return x;
}

}  // namespace

double SacAgent::alpha() const { return std::exp(log_alpha); }

SacAgent make_sac_agent(const EnvSpec& env_spec, const SacConfig& cfg, RngStream& init_rng) {
  SacAgent agent;
  agent.cfg = cfg;
  agent.state_dim = env_spec.state_dim;
  agent.action_dim = env_spec.action_dim;
  agent.action_low = env_spec.action_low;
  agent.action_high = env_spec.action_high;
  agent.target_entropy =
      cfg.target_entropy.value_or(-static_cast<double>(env_spec.action_dim));

  std::vector<int> policy_sizes{agent.state_dim};
  std::vector<int> q_sizes{agent.state_dim + agent.action_dim};
  for (int h : cfg.hidden_sizes) {
    policy_sizes.push_back(h);
    q_sizes.push_back(h);
  }
  policy_sizes.push_back(2 * agent.action_dim);
  q_sizes.push_back(1);

  RngStream policy_rng = init_rng.substream("policy_init");
  RngStream q1_rng = init_rng.substream("q1_init");
  RngStream q2_rng = init_rng.substream("q2_init");
  agent.policy = nn::make_net(policy_sizes, policy_rng);
  agent.q1 = nn::make_net(q_sizes, q1_rng);
  agent.q2 = nn::make_net(q_sizes, q2_rng);
  agent.q1_target = agent.q1;
  agent.q2_target = agent.q2;
  agent.policy_adam = nn::make_adam_state(agent.policy);
  agent.q1_adam = nn::make_adam_state(agent.q1);
  agent.q2_adam = nn::make_adam_state(agent.q2);
  agent.log_alpha = std::log(cfg.alpha_init);
  return agent;
}

Vec select_action(const SacAgent& agent, const Vec& state, bool deterministic, RngStream* rng) {
  require_shape(state.size() == agent.state_dim, "select_action: state dim mismatch");
  const Vec out = nn::forward(agent.policy, state);
  const int a_dim = agent.action_dim;
  Vec u = out.head(a_dim);
  if (!deterministic) {
    if (!rng) throw ContractError("select_action: stochastic mode needs an rng");
    for (int d = 0; d < a_dim; ++d) {
      const double ls =
          std::clamp(out(a_dim + d), agent.cfg.log_std_min, agent.cfg.log_std_max);
      u(d) += std::exp(ls) * rng->normal();
    }
  }
  Vec action(a_dim);
  for (int d = 0; d < a_dim; ++d) {
    const double half = 0.5 * (agent.action_high(d) - agent.action_low(d));
    const double center = 0.5 * (agent.action_high(d) + agent.action_low(d));
    action(d) = center + half * std::tanh(u(d));
  }
  return action;
}

Vec critic_targets(const SacAgent& agent, const TransitionBatch& batch, const Mat& target_eps) {
  const PolicySample next = run_policy(agent, batch.next_states, target_eps);
  const Mat x2 = stack_state_action(batch.next_states, next.action_env);
  const Vec q1t = nn::forward(agent.q1_target, x2, nullptr).row(0).transpose();
  const Vec q2t = nn::forward(agent.q2_target, x2, nullptr).row(0).transpose();
  const Vec qmin = q1t.cwiseMin(q2t);
  return batch.rewards.array() +
         agent.cfg.gamma * (1.0 - batch.done.array()) *
             (qmin.array() - agent.alpha() * next.log_prob.array());
}

SacGrads sac_gradients(const SacAgent& agent, const TransitionBatch& batch,
                       const Mat& target_eps, const Mat& actor_eps) {
  const int B = batch.size();
  if (B < 1) throw DomainError("sac_gradients: empty batch");
  const double inv_b = 1.0 / static_cast<double>(B);
  const double alpha = agent.alpha();

  SacGrads g;
  g.q1 = nn::zero_gradients(agent.q1);
  g.q2 = nn::zero_gradients(agent.q2);
  g.policy = nn::zero_gradients(agent.policy);

  // --- critics ---------------------------------------------------------
  const Vec y = critic_targets(agent, batch, target_eps);
  const Mat x = stack_state_action(batch.states, batch.actions);
  {
    nn::ForwardCache c1, c2;
    const Vec q1v = nn::forward(agent.q1, x, &c1).row(0).transpose();
    const Vec q2v = nn::forward(agent.q2, x, &c2).row(0).transpose();
    const Vec e1 = q1v - y;
    const Vec e2 = q2v - y;
    g.losses.critic1 = e1.squaredNorm() * inv_b;
    g.losses.critic2 = e2.squaredNorm() * inv_b;
    nn::backward(agent.q1, c1, (2.0 * inv_b * e1).transpose(), g.q1);
    nn::backward(agent.q2, c2, (2.0 * inv_b * e2).transpose(), g.q2);
  }

  // --- actor ------------------------------------------------------------
  const PolicySample cur = run_policy(agent, batch.states, actor_eps);
  const Mat xa = stack_state_action(batch.states, cur.action_env);
  nn::ForwardCache ca1, ca2;
  const Vec q1a = nn::forward(agent.q1, xa, &ca1).row(0).transpose();
  const Vec q2a = nn::forward(agent.q2, xa, &ca2).row(0).transpose();
  const Vec qmin = q1a.cwiseMin(q2a);
  g.losses.actor = inv_b * (alpha * cur.log_prob.sum() - qmin.sum());

  // d(actor loss)/d(action): backprop -1/B through the per-sample argmin critic
  Mat pick1 = Mat::Zero(1, B), pick2 = Mat::Zero(1, B);
  for (int b = 0; b < B; ++b) {
    (q1a(b) <= q2a(b) ? pick1 : pick2)(0, b) = -inv_b;
  }
  nn::Gradients scratch1 = nn::zero_gradients(agent.q1);
  nn::Gradients scratch2 = nn::zero_gradients(agent.q2);
  const Mat in1 = nn::backward(agent.q1, ca1, pick1, scratch1);
  const Mat in2 = nn::backward(agent.q2, ca2, pick2, scratch2);
  const Mat d_action_env =
      in1.bottomRows(agent.action_dim) + in2.bottomRows(agent.action_dim);

  const Vec half = 0.5 * (agent.action_high - agent.action_low);
  const Eigen::ArrayXXd one_minus_t2 = 1.0 - cur.tanh_u.array().square();
  const Eigen::ArrayXXd jac = (one_minus_t2.colwise() * half.array()) + kSquashGuard;

  // d log pi / d tanh(u) = 2 * half * tanh(u) / jac
  Eigen::ArrayXXd d_tanh = (d_action_env.array().colwise() * half.array()) +
                           (alpha * inv_b) *
                               (2.0 * (cur.tanh_u.array().colwise() * half.array()) / jac);
  Eigen::ArrayXXd d_u = d_tanh * one_minus_t2;

  Mat policy_grad(2 * agent.action_dim, B);
  policy_grad.topRows(agent.action_dim) = d_u.matrix();
  policy_grad.bottomRows(agent.action_dim) =
      ((d_u * cur.std.array() * actor_eps.array() - alpha * inv_b) *
       cur.clamp_mask.array())
          .matrix();
  nn::backward(agent.policy, cur.cache, policy_grad, g.policy);

  // --- temperature -------------------------------------------------------
  const double mean_logp = cur.log_prob.mean();
  g.losses.alpha = -agent.log_alpha * (mean_logp + agent.target_entropy);
  g.d_log_alpha = -(mean_logp + agent.target_entropy);

  return g;
}

double critic_loss_value(const SacAgent& agent, const TransitionBatch& batch,
                         const Mat& target_eps, int which) {
  if (which != 1 && which != 2) throw DomainError("critic_loss_value: which must be 1 or 2");
  const Vec y = critic_targets(agent, batch, target_eps);
  const Mat x = stack_state_action(batch.states, batch.actions);
  const nn::DenseNet& q = (which == 1) ? agent.q1 : agent.q2;
  const Vec qv = nn::forward(q, x, nullptr).row(0).transpose();
  return (qv - y).squaredNorm() / batch.size();
}

double actor_loss_value(const SacAgent& agent, const TransitionBatch& batch,
                        const Mat& actor_eps) {
  const PolicySample cur = run_policy(agent, batch.states, actor_eps);
  const Mat xa = stack_state_action(batch.states, cur.action_env);
  const Vec q1a = nn::forward(agent.q1, xa, nullptr).row(0).transpose();
  const Vec q2a = nn::forward(agent.q2, xa, nullptr).row(0).transpose();
  return (agent.alpha() * cur.log_prob.sum() - q1a.cwiseMin(q2a).sum()) / batch.size();
}

double alpha_loss_value(const SacAgent& agent, const TransitionBatch& batch,
                        const Mat& actor_eps) {
  const PolicySample cur = run_policy(agent, batch.states, actor_eps);
  return -agent.log_alpha * (cur.log_prob.mean() + agent.target_entropy);
}

SacLosses sac_update(SacAgent& agent, const TransitionBatch& batch, RngStream& rng) {
  const int B = batch.size();
  Mat target_eps(agent.action_dim, B), actor_eps(agent.action_dim, B);
  for (int b = 0; b < B; ++b) {
    for (int d = 0; d < agent.action_dim; ++d) target_eps(d, b) = rng.normal();
  }
  for (int b = 0; b < B; ++b) {
    for (int d = 0; d < agent.action_dim; ++d) actor_eps(d, b) = rng.normal();
  }

  SacGrads g = sac_gradients(agent, batch, target_eps, actor_eps);
  if (!std::isfinite(g.losses.critic1) || !std::isfinite(g.losses.critic2) ||
      !std::isfinite(g.losses.actor) || !std::isfinite(g.losses.alpha)) {
    throw NumericError("sac_update: non-finite loss (critic1=" +
                       std::to_string(g.losses.critic1) + ", critic2=" +
                       std::to_string(g.losses.critic2) + ", actor=" +
                       std::to_string(g.losses.actor) + ")");
  }
  nn::adam_step(agent.q1, g.q1, agent.q1_adam, agent.cfg.learning_rate);
  nn::adam_step(agent.q2, g.q2, agent.q2_adam, agent.cfg.learning_rate);
  nn::adam_step(agent.policy, g.policy, agent.policy_adam, agent.cfg.learning_rate);
  agent.log_alpha =
      nn::adam_scalar_step(agent.log_alpha, g.d_log_alpha, agent.alpha_adam,
                           agent.cfg.learning_rate);
  nn::polyak_update(agent.q1_target, agent.q1, agent.cfg.polyak_tau);
  nn::polyak_update(agent.q2_target, agent.q2, agent.cfg.polyak_tau);
  return g.losses;
}

ReplayBuffer::ReplayBuffer(int capacity, int state_dim, int action_dim)
    : capacity_(capacity),
      states_(state_dim, capacity),
      actions_(action_dim, capacity),
      next_states_(state_dim, capacity),
      rewards_(capacity),
      done_(capacity) {
  if (capacity < 1) throw DomainError("ReplayBuffer: capacity must be >= 1");
}

void ReplayBuffer::add(const Vec& state, const Vec& action, double reward,
                       const Vec& next_state, bool done) {
  require_shape(state.size() == states_.rows() && action.size() == actions_.rows() &&
                    next_state.size() == next_states_.rows(),
                "ReplayBuffer::add: dim mismatch");
  states_.col(head_) = state;
  actions_.col(head_) = action;
  next_states_.col(head_) = next_state;
  rewards_(head_) = reward;
  done_(head_) = done ? 1.0 : 0.0;
  head_ = (head_ + 1) % capacity_;
  if (size_ < capacity_) ++size_;
}

TransitionBatch ReplayBuffer::sample(int batch_size, RngStream& rng) const {
  if (batch_size < 1) throw DomainError("ReplayBuffer::sample: batch_size must be >= 1");
  if (size_ < batch_size) {
    throw ContractError("ReplayBuffer::sample: buffer holds " + std::to_string(size_) +
                        " < batch " + std::to_string(batch_size));
  }
  TransitionBatch b;
  b.states.resize(states_.rows(), batch_size);
  b.actions.resize(actions_.rows(), batch_size);
  b.next_states.resize(next_states_.rows(), batch_size);
  b.rewards.resize(batch_size);
  b.done.resize(batch_size);
  for (int k = 0; k < batch_size; ++k) {
    const int idx = rng.uniform_int(size_);
    b.states.col(k) = states_.col(idx);
    b.actions.col(k) = actions_.col(idx);
    b.next_states.col(k) = next_states_.col(idx);
    b.rewards(k) = rewards_(idx);
    b.done(k) = done_(idx);
  }
  return b;
}

void relabel_and_store(ReplayBuffer& buffer, const EpisodeRecord& episode, StoredReward mode,
                       const RewardModel* model) {
  const int T = episode.traj.length();
  if (T < 1) throw DomainError("relabel_and_store: empty episode");
  require_shape(static_cast<int>(episode.inner_rewards.size()) == T &&
                    static_cast<int>(episode.emitted_rewards.size()) == T,
                "relabel_and_store: reward arrays must have one entry per step");

  Vec dense;
  switch (mode) {
    case StoredReward::ModelMu:
      if (!model) throw ContractError("relabel_and_store: ModelMu mode needs a model");
      dense = redistribute(*model, episode.traj);
      break;
    case StoredReward::Sparse:
      dense = Eigen::Map<const Vec>(episode.emitted_rewards.data(), T);
      break;
    case StoredReward::OracleDense:
      dense = Eigen::Map<const Vec>(episode.inner_rewards.data(), T);
      break;
  }

  for (int t = 0; t < T; ++t) {
    const Vec& next = (t + 1 < T) ? episode.traj.states[t + 1] : episode.final_state;
    const bool done = episode.terminated && t == T - 1;
    buffer.add(episode.traj.states[t], episode.traj.actions[t], dense(t), next, done);
  }
}

}  // namespace lrr
