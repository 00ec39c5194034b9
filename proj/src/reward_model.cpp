#include "lrr/reward_model.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "lrr/math.hpp"

namespace lrr {

int head_width(RewardFamily family) {
  switch (family) {
    case RewardFamily::Gaussian: return 2;
    case RewardFamily::SkewNormal: return 3;
    case RewardFamily::FixedSigmaMse: return 1;
  }
  throw DomainError("head_width: unknown family");
}

std::string to_string(RewardFamily family) {
  switch (family) {
    case RewardFamily::Gaussian: return "gaussian";
    case RewardFamily::SkewNormal: return "skew_normal";
    case RewardFamily::FixedSigmaMse: return "fixed_sigma_mse";
  }
  throw DomainError("to_string: unknown family");
}

RewardFamily reward_family_from_string(const std::string& name) {
  if (name == "gaussian") return RewardFamily::Gaussian;
  if (name == "skew_normal") return RewardFamily::SkewNormal;
  if (name == "fixed_sigma_mse") return RewardFamily::FixedSigmaMse;
  throw DomainError("unknown reward family '" + name + "'");
}

RewardModel make_reward_model(RewardFamily family, int state_dim, int action_dim,
                              const std::vector<int>& hidden_sizes, RngStream& init_rng) {
  if (state_dim <= 0 || action_dim <= 0) {
    throw ShapeError("make_reward_model: state/action dims must be positive");
  }
  RewardModel model;
  model.family = family;
  model.state_dim = state_dim;
  model.action_dim = action_dim;
  std::vector<int> sizes;
  sizes.push_back(state_dim + action_dim);
  for (int h : hidden_sizes) sizes.push_back(h);
  sizes.push_back(head_width(family));
  model.net = nn::make_net(sizes, init_rng);
  model.adam = nn::make_adam_state(model.net);
  return model;
}

namespace {

struct HeadParams {
  Vec mu;
  Vec sigma;
  Vec lambda;
  // dsigma/d(raw log sigma) vanishes where the clamp is active.
  Eigen::Array<bool, Eigen::Dynamic, 1> sigma_clamped;
};

Mat stack_inputs(const RewardModel& model, const Trajectory& traj) {
  const int T = traj.length();
  if (T < 1) throw ShapeError("trajectory must have at least one step");
  Mat x(model.state_dim + model.action_dim, T);
  for (int t = 0; t < T; ++t) {
    require_shape(traj.states[t].size() == model.state_dim &&
                      traj.actions[t].size() == model.action_dim,
                  "trajectory step " + std::to_string(t) + " dims do not match reward model");
    x.col(t).head(model.state_dim) = traj.states[t];
    x.col(t).tail(model.action_dim) = traj.actions[t];
  }
  return x;
}

HeadParams map_heads(const RewardModel& model, const Mat& raw) {
  const int T = static_cast<int>(raw.cols());
  HeadParams p;
  p.mu = raw.row(0).transpose();
  p.sigma = Vec::Ones(T);
  p.lambda = Vec::Zero(T);
  p.sigma_clamped = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(T, true);
  if (model.family != RewardFamily::FixedSigmaMse) {
    for (int t = 0; t < T; ++t) {
      const double s = std::exp(raw(1, t));
      if (s <= model.sigma_min) {
        p.sigma(t) = model.sigma_min;
      } else if (s >= model.sigma_max) {
        p.sigma(t) = model.sigma_max;
      } else {
        p.sigma(t) = s;
        p.sigma_clamped(t) = false;
      }
    }
  }
  if (model.family == RewardFamily::SkewNormal) {
    p.lambda = raw.row(2).transpose();
  }
  return p;
}

}  // namespace

RewardDistributionParams predict_params(const RewardModel& model, const Vec& state,
                                        const Vec& action) {
  require_shape(state.size() == model.state_dim && action.size() == model.action_dim,
                "predict_params: state/action dims do not match the model");
  Vec x(model.state_dim + model.action_dim);
  x.head(model.state_dim) = state;
  x.tail(model.action_dim) = action;
  const Vec raw = nn::forward(model.net, x);
  RewardDistributionParams out;
  out.mu = raw(0);
  if (model.family != RewardFamily::FixedSigmaMse) {
    out.sigma = std::clamp(std::exp(raw(1)), model.sigma_min, model.sigma_max);
  }
  if (model.family == RewardFamily::SkewNormal) out.lambda = raw(2);
  return out;
}

Vec predict_mu_batch(const RewardModel& model, const Mat& states, const Mat& actions) {
  require_shape(states.rows() == model.state_dim && actions.rows() == model.action_dim &&
                    states.cols() == actions.cols(),
                "predict_mu_batch: batch shapes do not match the model");
  Mat x(model.state_dim + model.action_dim, states.cols());
  x.topRows(model.state_dim) = states;
  x.bottomRows(model.action_dim) = actions;
  return nn::forward(model.net, x, nullptr).row(0).transpose();
}

double sample_step_reward(const RewardDistributionParams& params, double epsilon) {
  return params.mu + epsilon * params.sigma;
}

double loo_return(const Trajectory& traj, const Vec& sampled_rewards, int i) {
  const int T = traj.length();
  if (i < 0 || i >= T) {
    throw DomainError("loo_return: index " + std::to_string(i) + " out of range [0," +
                      std::to_string(T) + ")");
  }
  require_shape(sampled_rewards.size() == T, "loo_return: sampled_rewards length != T");
  double sum = 0.0;
  for (int t = 0; t < T; ++t) {
    if (t != i) sum += sampled_rewards(t);
  }
  return traj.episodic_return - sum;
}

double gaussian_nll(double r_tilde, const RewardDistributionParams& params) {
  const double delta = r_tilde - params.mu;
  return std::log(params.sigma) + delta * delta / (2.0 * params.sigma * params.sigma);
}

double skew_normal_nll(double r_tilde, const RewardDistributionParams& params) {
  const double delta = r_tilde - params.mu;
  const double u = params.lambda * delta / params.sigma;
  double skew_term = 0.0;
  if (u != 0.0) {
    // -log(2*Phi(u)); exactly zero when u == 0, so the Gaussian case reduces
    // bit-for-bit (the quadratic term below is spelled exactly as in
    // gaussian_nll on purpose).
    skew_term = -std::numbers::ln2 - log_normal_cdf(u);
  }
  return std::log(params.sigma) + delta * delta / (2.0 * params.sigma * params.sigma) +
         skew_term;
}

Mat draw_loo_noise(RewardFamily family, int length, RngStream& rng, bool shared_noise) {
  if (length < 1) throw ShapeError("draw_loo_noise: length must be >= 1");
  Mat noise = Mat::Zero(length, length);
  if (family == RewardFamily::FixedSigmaMse) return noise;
  if (shared_noise) {
    Vec row(length);
    for (int t = 0; t < length; ++t) row(t) = rng.normal();
    for (int i = 0; i < length; ++i) noise.row(i) = row.transpose();
  } else {
    for (int i = 0; i < length; ++i) {
      for (int t = 0; t < length; ++t) {
        if (t != i) noise(i, t) = rng.normal();
      }
    }
  }
  return noise;
}

TrajectoryLoss trajectory_loss_with_noise(const RewardModel& model, const Trajectory& traj,
                                          const Mat& noise) {
  const int T = traj.length();
  require_shape(noise.rows() == T && noise.cols() == T,
                "trajectory_loss: noise matrix must be T x T");

  const Mat inputs = stack_inputs(model, traj);
  nn::ForwardCache cache;
  const Mat raw = nn::forward(model.net, inputs, &cache);
  const HeadParams p = map_heads(model, raw);

  Vec g_mu = Vec::Zero(T);
  Vec g_sigma = Vec::Zero(T);
  Vec g_lambda = Vec::Zero(T);

  double loss_sum = 0.0;
  for (int i = 0; i < T; ++i) {
    // r_tilde_i = R_ep - sum_{t != i} (mu_t + eps_{i,t} sigma_t)
    double sampled_sum = 0.0;
    for (int t = 0; t < T; ++t) {
      if (t != i) sampled_sum += p.mu(t) + noise(i, t) * p.sigma(t);
    }
    const double r_tilde = traj.episodic_return - sampled_sum;
    const double sigma_i = p.sigma(i);
    const double delta = r_tilde - p.mu(i);
    const double z = delta / sigma_i;

    const double quad = delta * delta / (2.0 * sigma_i * sigma_i);
    double li;
    double d_mu_i;     // density gradient at the held-out step
    double d_sigma_i;
    double d_lambda_i = 0.0;
    double d_rtilde;   // gradient w.r.t. the leave-one-out return
    if (model.family == RewardFamily::SkewNormal) {
      const double lam = p.lambda(i);
      const double u = lam * z;
      const double gamma = mills_ratio(u);
      const double skew_term = (u != 0.0) ? (-std::numbers::ln2 - log_normal_cdf(u)) : 0.0;
      li = std::log(sigma_i) + quad + skew_term;
      d_mu_i = -z / sigma_i + lam * gamma / sigma_i;
      d_sigma_i = 1.0 / sigma_i - z * z / sigma_i + lam * z * gamma / sigma_i;
      d_lambda_i = -gamma * z;
      d_rtilde = z / sigma_i - lam * gamma / sigma_i;
    } else {
      li = std::log(sigma_i) + quad;
      d_mu_i = -z / sigma_i;
      d_sigma_i = 1.0 / sigma_i - z * z / sigma_i;
      d_rtilde = z / sigma_i;
    }
    if (!std::isfinite(li)) {
      throw NumericError("trajectory_loss: non-finite per-step loss at hold-out index " +
                         std::to_string(i));
    }
    loss_sum += li;

    g_mu(i) += d_mu_i;
    g_sigma(i) += d_sigma_i;
    g_lambda(i) += d_lambda_i;
    for (int t = 0; t < T; ++t) {
      if (t == i) continue;
      g_mu(t) -= d_rtilde;
      g_sigma(t) -= d_rtilde * noise(i, t);
    }
  }

  const double inv_t = 1.0 / static_cast<double>(T);

  Mat head_grad = Mat::Zero(head_width(model.family), T);
  head_grad.row(0) = (inv_t * g_mu).transpose();
  if (model.family != RewardFamily::FixedSigmaMse) {
    for (int t = 0; t < T; ++t) {
      // chain through sigma = exp(raw); zero where the clamp is active
      head_grad(1, t) = p.sigma_clamped(t) ? 0.0 : inv_t * g_sigma(t) * p.sigma(t);
    }
  }
  if (model.family == RewardFamily::SkewNormal) {
    head_grad.row(2) = (inv_t * g_lambda).transpose();
  }

  TrajectoryLoss out;
  out.grads = nn::zero_gradients(model.net);
  nn::backward(model.net, cache, head_grad, out.grads);
  out.loss = loss_sum * inv_t;
  out.mean_sigma = p.sigma.mean();
  out.mean_abs_residual = std::abs(traj.episodic_return - p.mu.sum());
  return out;
}

TrajectoryLoss trajectory_loss(const RewardModel& model, const Trajectory& traj,
                               RngStream& rng, bool shared_noise) {
  const Mat noise = draw_loo_noise(model.family, traj.length(), rng, shared_noise);
  return trajectory_loss_with_noise(model, traj, noise);
}

double mse_rd_loss(const RewardModel& model, const Trajectory& traj) {
  const Mat inputs = stack_inputs(model, traj);
  const Mat raw = nn::forward(model.net, inputs, nullptr);
  const double residual = traj.episodic_return - raw.row(0).sum();
  return residual * residual;
}

TrainStepStats train_step(RewardModel& model, const std::vector<const Trajectory*>& minibatch,
                          double learning_rate, RngStream& rng, bool shared_noise) {
  if (minibatch.empty()) throw DomainError("train_step: empty minibatch");
  nn::Gradients grads = nn::zero_gradients(model.net);
  TrainStepStats stats;
  const double w = 1.0 / static_cast<double>(minibatch.size());
  for (std::size_t j = 0; j < minibatch.size(); ++j) {
    TrajectoryLoss tl;
    try {
      tl = trajectory_loss(model, *minibatch[j], rng, shared_noise);
    } catch (const NumericError& e) {
      throw NumericError("train_step: trajectory " + std::to_string(j) + ": " + e.what());
    }
    if (!std::isfinite(tl.loss)) {
      throw NumericError("train_step: non-finite loss for trajectory " + std::to_string(j));
    }
    grads.accumulate(tl.grads, w);
    stats.loss += w * tl.loss;
    stats.mean_sigma += w * tl.mean_sigma;
    stats.mean_abs_residual += w * tl.mean_abs_residual;
  }
  nn::adam_step(model.net, grads, model.adam, learning_rate);
  return stats;
}

Vec redistribute(const RewardModel& model, const Trajectory& traj) {
  const Mat inputs = stack_inputs(model, traj);
  return nn::forward(model.net, inputs, nullptr).row(0).transpose();
}

double optimal_sigma_gaussian(double delta) {
  if (delta == 0.0) {
    throw DomainError(
        "optimal_sigma_gaussian: delta = 0 is degenerate (infimum at sigma -> 0)");
  }
  return std::abs(delta);
}

namespace {

// d/dsigma of log(sigma) + delta^2/(2 sigma^2) - log Phi(lambda*delta/sigma).
double skew_sigma_derivative(double delta, double lambda, double sigma) {
  const double gamma = mills_ratio(lambda * delta / sigma);
  return 1.0 / sigma - delta * delta / (sigma * sigma * sigma) +
         lambda * delta * gamma / (sigma * sigma);
}

}  // namespace

double optimal_sigma_skew(double delta, double lambda, double tol) {
  if (!(delta > 0.0)) throw DomainError("optimal_sigma_skew: requires delta > 0");
  if (!(tol > 0.0)) throw DomainError("optimal_sigma_skew: requires tol > 0");

  double sigma = delta;
  bool reached_tol = false;
  for (int k = 0; k < 200; ++k) {
    const double lg = lambda * mills_ratio(lambda * delta / sigma);
    const double fixed_point = delta * (-lg + std::sqrt(lg * lg + 4.0)) / 2.0;
    const double next = 0.5 * sigma + 0.5 * fixed_point;
    const double step = std::abs(next - sigma);
    sigma = next;
    if (step < tol) reached_tol = true;
    // keep contracting to the numerical fixed point so the stationarity
    // residual is at machine level, not merely at tol
    if (step < 1e-15 * std::max(sigma, 1.0)) break;
  }
  if (!reached_tol) {
    throw ConvergenceError("optimal_sigma_skew: no convergence in 200 iterations; last sigma = " +
                           std::to_string(sigma));
  }
  const double resid = skew_sigma_derivative(delta, lambda, sigma);
  if (!(std::abs(resid) < 1e-8)) {
    throw ConvergenceError("optimal_sigma_skew: stationarity residual " +
                           std::to_string(resid) + " exceeds 1e-8");
  }
  return sigma;
}

GradPair analytic_grads_gaussian(double delta, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("analytic_grads_gaussian: sigma must be > 0");
  GradPair g;
  g.d_mu = -delta / (sigma * sigma);
  g.d_sigma = (sigma * sigma - delta * delta) / (sigma * sigma * sigma);
  return g;
}

GradPair analytic_grads_skew(double delta, double sigma, double lambda) {
  if (!(sigma > 0.0)) throw DomainError("analytic_grads_skew: sigma must be > 0");
  const double gamma = mills_ratio(lambda * delta / sigma);
  GradPair g;
  g.d_mu = -delta / (sigma * sigma) + lambda * gamma / sigma;
  g.d_sigma = 1.0 / sigma - delta * delta / (sigma * sigma * sigma) +
              lambda * delta * gamma / (sigma * sigma);
  return g;
}

namespace {
constexpr const char* kRewardMagic = "lrrreward";
constexpr int kRewardVersion = 1;
}  // namespace

void save_reward_model(const RewardModel& model, std::ostream& out) {
  out.precision(17);
  out << kRewardMagic << " " << kRewardVersion << "\n";
  out << to_string(model.family) << " " << model.state_dim << " " << model.action_dim << " "
      << model.sigma_min << " " << model.sigma_max << "\n";
  nn::save_net(model.net, out);
}

RewardModel load_reward_model(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kRewardMagic || version != kRewardVersion) {
    throw IoError("load_reward_model: not a lrrreward v1 checkpoint");
  }
  std::string family;
  RewardModel model;
  if (!(in >> family >> model.state_dim >> model.action_dim >> model.sigma_min >>
        model.sigma_max)) {
    throw IoError("load_reward_model: bad header");
  }
  model.family = reward_family_from_string(family);
  model.net = nn::load_net(in);
  if (model.net.input_dim() != model.state_dim + model.action_dim ||
      model.net.output_dim() != head_width(model.family)) {
    throw IoError("load_reward_model: net shape does not match family/dims");
  }
  model.adam = nn::make_adam_state(model.net);
  return model;
}

void save_reward_model_file(const RewardModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_reward_model_file: cannot open " + path);
  save_reward_model(model, out);
}

RewardModel load_reward_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_reward_model_file: cannot open " + path);
  return load_reward_model(in);
}

}  // namespace lrr
