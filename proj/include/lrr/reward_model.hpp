#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "lrr/common.hpp"
#include "lrr/nn.hpp"
#include "lrr/rng.hpp"

namespace lrr {

// One rollout: (state, action) per step plus the episodic return delivered
// at the end of the episode. The unit of reward-model training.
struct Trajectory {
  std::vector<Vec> states;
  std::vector<Vec> actions;
  double episodic_return = 0.0;

  int length() const { return static_cast<int>(states.size()); }
};

// FixedSigmaMse is the plain return-decomposition regime: sigma is pinned to
// 1, no noise is drawn, and the trajectory loss is half the squared residual.
enum class RewardFamily { Gaussian, SkewNormal, FixedSigmaMse };

int head_width(RewardFamily family);
std::string to_string(RewardFamily family);
RewardFamily reward_family_from_string(const std::string& name);

// Per-step distribution parameters emitted by the reward head.
struct RewardDistributionParams {
  double mu = 0.0;
  double sigma = 1.0;
  double lambda = 0.0;  // shape; meaningful only for SkewNormal
};

struct RewardModel {
  RewardFamily family = RewardFamily::Gaussian;
  int state_dim = 0;
  int action_dim = 0;
  nn::DenseNet net;  // concat(state, action) -> raw head outputs
  nn::AdamState adam;
  double sigma_min = 1e-4;
  double sigma_max = 1e2;
};

RewardModel make_reward_model(RewardFamily family, int state_dim, int action_dim,
                              const std::vector<int>& hidden_sizes, RngStream& init_rng);

// Head mapping: mu is raw, sigma = clamp(exp(raw_log_sigma), sigma_min,
// sigma_max), lambda raw (SkewNormal only).
RewardDistributionParams predict_params(const RewardModel& model, const Vec& state,
                                        const Vec& action);

// mu head for a batch of (state, action) columns.
Vec predict_mu_batch(const RewardModel& model, const Mat& states, const Mat& actions);

// Reparameterized draw mu + epsilon * sigma.
double sample_step_reward(const RewardDistributionParams& params, double epsilon);

// Leave-one-out return: episodic return minus the sampled rewards at every
// step except i. sampled_rewards[i] is ignored.
double loo_return(const Trajectory& traj, const Vec& sampled_rewards, int i);

// log(sigma) + (r_tilde - mu)^2 / (2 sigma^2); the additive constant
// log(sqrt(2*pi)) is dropped.
double gaussian_nll(double r_tilde, const RewardDistributionParams& params);

// log(sigma) + z^2/2 - log(2*Phi(lambda*z)) with z = (r_tilde - mu)/sigma.
// The constant is chosen so lambda = 0 reproduces gaussian_nll exactly.
double skew_normal_nll(double r_tilde, const RewardDistributionParams& params);

struct TrajectoryLoss {
  double loss = 0.0;
  nn::Gradients grads;        // d(loss)/d(theta)
  double mean_sigma = 0.0;    // mean of sigma over the trajectory's steps
  double mean_abs_residual = 0.0;  // |R_ep - sum_t mu_t|
};

// Noise matrix for the leave-one-out pass: entry (i, t) is the standard
// normal draw used for step t when index i is held out; the diagonal is
// unused. shared_noise draws one row and reuses it for every i (O(T) draws
// instead of O(T^2)); FixedSigmaMse draws nothing and returns zeros.
Mat draw_loo_noise(RewardFamily family, int length, RngStream& rng, bool shared_noise);

// Average over hold-out indices i of the per-step NLL of the leave-one-out
// return, with gradients flowing through mu/sigma at the sampled steps
// (reparameterization) and through the density parameters at step i.
TrajectoryLoss trajectory_loss(const RewardModel& model, const Trajectory& traj,
                               RngStream& rng, bool shared_noise = false);
TrajectoryLoss trajectory_loss_with_noise(const RewardModel& model, const Trajectory& traj,
                                          const Mat& noise);

// Squared return-decomposition residual (R_ep - sum_t mu_t)^2.
double mse_rd_loss(const RewardModel& model, const Trajectory& traj);

struct TrainStepStats {
  double loss = 0.0;  // pre-update minibatch loss
  double mean_sigma = 0.0;
  double mean_abs_residual = 0.0;
};

// One optimizer step on the minibatch-averaged trajectory loss.
TrainStepStats train_step(RewardModel& model, const std::vector<const Trajectory*>& minibatch,
                          double learning_rate, RngStream& rng, bool shared_noise = false);

// Dense proxy rewards handed to the policy learner: the noise-free means
// mu(s_t, a_t), independent of the sigma/lambda heads.
Vec redistribute(const RewardModel& model, const Trajectory& traj);

// Closed-form minimizer |delta| of the Gaussian per-step loss in sigma.
// delta = 0 has no minimizer (the infimum is at sigma -> 0) and throws.
double optimal_sigma_gaussian(double delta);

// Fixed point sigma* = delta * (-lambda*gamma + sqrt((lambda*gamma)^2 + 4))/2
// with gamma = mills_ratio(lambda*delta/sigma*), solved by damped iteration
// (damping 0.5, start sigma = delta). Requires delta > 0.
double optimal_sigma_skew(double delta, double lambda, double tol = 1e-12);

struct GradPair {
  double d_mu = 0.0;
  double d_sigma = 0.0;
};

// Partials of the Gaussian per-step loss treating r_tilde as constant:
// d/dmu = -delta/sigma^2, d/dsigma = (sigma^2 - delta^2)/sigma^3.
GradPair analytic_grads_gaussian(double delta, double sigma);

// Skew-normal partials: d/dmu = -delta/sigma^2 + (lambda/sigma)*gamma,
// d/dsigma = 1/sigma - delta^2/sigma^3 + (lambda*delta/sigma^2)*gamma.
GradPair analytic_grads_skew(double delta, double sigma, double lambda);

// Checkpoint: family tag and sigma bounds, then the net in lrrnet format.
void save_reward_model(const RewardModel& model, std::ostream& out);
RewardModel load_reward_model(std::istream& in);
void save_reward_model_file(const RewardModel& model, const std::string& path);
RewardModel load_reward_model_file(const std::string& path);

}  // namespace lrr
