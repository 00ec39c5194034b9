#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "lrr/math.hpp"
#include "lrr/reward_model.hpp"
#include "lrr/rng.hpp"
#include "oracles.hpp"

using namespace lrr;

namespace {

Trajectory random_trajectory(RngStream& rng, int state_dim, int action_dim, int length) {
  Trajectory traj;
  for (int t = 0; t < length; ++t) {
    Vec s(state_dim), a(action_dim);
    for (int d = 0; d < state_dim; ++d) s(d) = rng.uniform(-1.0, 1.0);
    for (int d = 0; d < action_dim; ++d) a(d) = rng.uniform(-1.0, 1.0);
    traj.states.push_back(s);
    traj.actions.push_back(a);
  }
  traj.episodic_return = rng.uniform(-5.0, 5.0);
  return traj;
}

RewardModel zero_model(RewardFamily family, int state_dim = 2, int action_dim = 1) {
  RngStream init(0);
  RewardModel m = make_reward_model(family, state_dim, action_dim, {8}, init);
  m.net = nn::make_zero_net(m.net.layer_sizes);
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// predict_params

TEST_CASE("predict_params: zero net gives mu=0, sigma=1 (lambda=0)") {
  for (RewardFamily family :
       {RewardFamily::Gaussian, RewardFamily::SkewNormal, RewardFamily::FixedSigmaMse}) {
    RewardModel m = zero_model(family);
    const RewardDistributionParams p = predict_params(m, Vec::Zero(2), Vec::Zero(1));
    CHECK(p.mu == 0.0);
    CHECK(p.sigma == 1.0);
    CHECK(p.lambda == 0.0);
  }
}

TEST_CASE("predict_params clamps sigma at the bounds") {
  RewardModel m = zero_model(RewardFamily::Gaussian);
  m.net.biases.back()(1) = -20.0;  // raw log sigma
  CHECK(predict_params(m, Vec::Zero(2), Vec::Zero(1)).sigma == 1e-4);
  m.net.biases.back()(1) = 20.0;
  CHECK(predict_params(m, Vec::Zero(2), Vec::Zero(1)).sigma == 1e2);
}

TEST_CASE("predict_params is pure") {
  RngStream rng(1);
  RewardModel m = make_reward_model(RewardFamily::SkewNormal, 3, 2, {16, 16}, rng);
  Vec s(3), a(2);
  for (int d = 0; d < 3; ++d) s(d) = rng.uniform(-1, 1);
  for (int d = 0; d < 2; ++d) a(d) = rng.uniform(-1, 1);
  const auto p1 = predict_params(m, s, a);
  const auto p2 = predict_params(m, s, a);
  CHECK(p1.mu == p2.mu);
  CHECK(p1.sigma == p2.sigma);
  CHECK(p1.lambda == p2.lambda);
}

TEST_CASE("predict_params rejects wrong dims") {
  RewardModel m = zero_model(RewardFamily::Gaussian);
  CHECK_THROWS_AS(predict_params(m, Vec::Zero(3), Vec::Zero(1)), ShapeError);
}

// ---------------------------------------------------------------------------
// sample_step_reward / loo_return

TEST_CASE("sample_step_reward is mu + eps*sigma") {
  CHECK(sample_step_reward({1.0, 2.0, 0.0}, 0.0) == 1.0);
  CHECK(sample_step_reward({1.0, 2.0, 0.0}, -1.0) == -1.0);
  CHECK(sample_step_reward({0.0, 1.0, 0.0}, 1.5) == 1.5);
}

TEST_CASE("loo_return subtracts the sum over the other steps") {
  RngStream rng(2);
  Trajectory traj = random_trajectory(rng, 2, 1, 3);
  traj.episodic_return = 6.0;
  Vec sampled(3);
  sampled << 1.0, 99.0, 3.0;  // entry 1 must be ignored
  CHECK(loo_return(traj, sampled, 1) == 2.0);

  Trajectory single = random_trajectory(rng, 2, 1, 1);
  single.episodic_return = -4.5;
  CHECK(loo_return(single, Vec::Zero(1), 0) == -4.5);

  CHECK_THROWS_AS(loo_return(traj, sampled, 3), DomainError);
  CHECK_THROWS_AS(loo_return(traj, sampled, -1), DomainError);
}

TEST_CASE("loo_return telescopes when sampled rewards are the true ones") {
  RngStream rng(3);
  Trajectory traj = random_trajectory(rng, 2, 1, 5);
  Vec true_rewards(5);
  for (int t = 0; t < 5; ++t) true_rewards(t) = rng.uniform(-1, 1);
  traj.episodic_return = true_rewards.sum();
  for (int i = 0; i < 5; ++i) {
    CHECK(loo_return(traj, true_rewards, i) == doctest::Approx(true_rewards(i)).epsilon(1e-12));
  }
}

// ---------------------------------------------------------------------------
// NLLs

TEST_CASE("gaussian_nll closed-form values") {
  CHECK(gaussian_nll(0.0, {0.0, 1.0, 0.0}) == 0.0);
  CHECK(gaussian_nll(2.0, {0.0, 2.0, 0.0}) ==
        doctest::Approx(std::log(2.0) + 0.5).epsilon(1e-12));
  CHECK(gaussian_nll(1.0, {0.0, 0.5, 0.0}) ==
        doctest::Approx(std::log(0.5) + 2.0).epsilon(1e-12));
}

TEST_CASE("skew_normal_nll with lambda=0 equals gaussian_nll") {
  RngStream rng(4);
  for (int i = 0; i < 1000; ++i) {
    const double delta = rng.uniform(-10, 10);
    const double sigma = std::exp(rng.uniform(std::log(1e-3), std::log(10.0)));
    RewardDistributionParams p{0.0, sigma, 0.0};
    CHECK(std::abs(skew_normal_nll(delta, p) - gaussian_nll(delta, p)) <= 1e-12);
  }
}

TEST_CASE("skew_normal_nll at lambda=1, delta=1, sigma=1 matches the Phi oracle") {
  const double got = skew_normal_nll(1.0, {0.0, 1.0, 1.0});
  // 0.5 - log(2 * Phi(1)); frozen from the series oracle
  const double want = 0.5 - std::log(2.0 * oracle::normal_cdf(1.0));
  CHECK(got == doctest::Approx(want).epsilon(1e-12));
  CHECK(got == doctest::Approx(-0.0203934015).epsilon(1e-8));
}

TEST_CASE("skew_normal_nll stays finite and accurate deep in the tail") {
  // lambda*z = -25: the log Phi branch must not underflow
  const double z = -25.0;
  const double got = skew_normal_nll(z, {0.0, 1.0, 1.0});
  const double want = 0.5 * z * z - std::log(2.0) - oracle::log_normal_cdf(-25.0);
  CHECK(std::isfinite(got));
  CHECK(oracle::close_rel(got, want, 1e-6, 1e-9));
}

// ---------------------------------------------------------------------------
// trajectory_loss

TEST_CASE("trajectory_loss under FixedSigmaMse is half the squared residual") {
  RngStream rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    RngStream init = rng.substream("init", trial);
    RewardModel m = make_reward_model(RewardFamily::FixedSigmaMse, 3, 2, {16}, init);
    const Trajectory traj = random_trajectory(rng, 3, 2, 1 + rng.uniform_int(12));
    RngStream noise = rng.substream("noise", trial);
    const double loss = trajectory_loss(m, traj, noise).loss;
    const double mse = mse_rd_loss(m, traj);
    CHECK(oracle::close_rel(2.0 * loss, mse, 1e-12, 1e-14));
  }
}

TEST_CASE("trajectory_loss with T=1 is the single-step NLL of R_ep") {
  RngStream rng(6);
  RewardModel m = make_reward_model(RewardFamily::Gaussian, 2, 1, {8}, rng);
  Trajectory traj = random_trajectory(rng, 2, 1, 1);
  RngStream noise(0);
  const double loss = trajectory_loss(m, traj, noise).loss;
  const RewardDistributionParams p = predict_params(m, traj.states[0], traj.actions[0]);
  CHECK(loss == doctest::Approx(gaussian_nll(traj.episodic_return, p)).epsilon(1e-12));
}

TEST_CASE("trajectory_loss is bitwise repeatable for a fixed seed") {
  RngStream rng(7);
  RewardModel m = make_reward_model(RewardFamily::Gaussian, 2, 1, {16}, rng);
  const Trajectory traj = random_trajectory(rng, 2, 1, 6);
  RngStream n1(123), n2(123);
  CHECK(trajectory_loss(m, traj, n1).loss == trajectory_loss(m, traj, n2).loss);
}

TEST_CASE("shared-noise mode draws O(T) and is also deterministic") {
  RngStream rng(8);
  RewardModel m = make_reward_model(RewardFamily::Gaussian, 2, 1, {16}, rng);
  const Trajectory traj = random_trajectory(rng, 2, 1, 6);
  RngStream n1(9), n2(9);
  const double a = trajectory_loss(m, traj, n1, true).loss;
  const double b = trajectory_loss(m, traj, n2, true).loss;
  CHECK(a == b);
  // noise rows are identical in shared mode
  RngStream n3(9);
  const Mat noise = draw_loo_noise(RewardFamily::Gaussian, 6, n3, true);
  for (int i = 1; i < 6; ++i) {
    for (int t = 0; t < 6; ++t) {
      if (t != i && t != 0) CHECK(noise(i, t) == noise(0, t));
    }
  }
}

TEST_CASE("FixedSigmaMse consumes no rng draws") {
  RngStream rng(10);
  RewardModel m = zero_model(RewardFamily::FixedSigmaMse);
  const Trajectory traj = random_trajectory(rng, 2, 1, 5);
  RngStream noise(77);
  trajectory_loss(m, traj, noise);
  RngStream fresh(77);
  CHECK(noise.next_u64() == fresh.next_u64());
}

// ---------------------------------------------------------------------------
// mse_rd_loss

TEST_CASE("mse_rd_loss closed-form cases") {
  RewardModel m = zero_model(RewardFamily::FixedSigmaMse);
  RngStream rng(11);
  Trajectory traj = random_trajectory(rng, 2, 1, 4);
  traj.episodic_return = 5.0;
  CHECK(mse_rd_loss(m, traj) == 25.0);  // mu == 0 everywhere

  // mu == R_ep / T at every step -> zero loss (constant-output net)
  RewardModel flat = zero_model(RewardFamily::FixedSigmaMse);
  flat.net.biases.back()(0) = 5.0 / 4.0;
  CHECK(mse_rd_loss(flat, traj) == doctest::Approx(0.0).epsilon(1e-12));
}

// ---------------------------------------------------------------------------
// train_step

TEST_CASE("train_step with learning_rate=0 leaves parameters unchanged") {
  RngStream rng(12);
  RewardModel m = make_reward_model(RewardFamily::Gaussian, 2, 1, {16}, rng);
  const nn::DenseNet before = m.net;
  const Trajectory traj = random_trajectory(rng, 2, 1, 5);
  RngStream noise(1);
  train_step(m, {&traj}, 0.0, noise);
  for (int l = 0; l < m.net.num_layers(); ++l) {
    CHECK((m.net.weights[l].array() == before.weights[l].array()).all());
  }
}

TEST_CASE("train_step returns the pre-update loss and is deterministic") {
  RngStream rng(13);
  RewardModel m1 = make_reward_model(RewardFamily::Gaussian, 2, 1, {16}, rng);
  RewardModel m2 = m1;
  const Trajectory traj = random_trajectory(rng, 2, 1, 5);
  RngStream na(2), nb(2);
  const double la = train_step(m1, {&traj}, 3e-4, na).loss;
  const double lb = train_step(m2, {&traj}, 3e-4, nb).loss;
  CHECK(la == lb);
  for (int l = 0; l < m1.net.num_layers(); ++l) {
    CHECK((m1.net.weights[l].array() == m2.net.weights[l].array()).all());
  }
}

TEST_CASE("train_step: Gaussian loss trends down on a fixed trajectory") {
  RngStream rng(14);
  RewardModel m = make_reward_model(RewardFamily::Gaussian, 2, 1, {32, 32}, rng);
  const Trajectory traj = random_trajectory(rng, 2, 1, 8);
  RngStream noise(3);
  std::vector<double> losses;
  for (int step = 0; step < 500; ++step) {
    losses.push_back(train_step(m, {&traj}, 3e-4, noise).loss);
  }
  // trailing-100 averages: end must not exceed start
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 100; ++i) {
    head += losses[i];
    tail += losses[losses.size() - 100 + i];
  }
  CHECK(tail / 100.0 <= head / 100.0 + 1e-9);
}

TEST_CASE("train_step: FixedSigmaMse mu-sum converges to the episodic return") {
  RngStream rng(15);
  RewardModel m = make_reward_model(RewardFamily::FixedSigmaMse, 2, 1, {32, 32}, rng);
  const Trajectory traj = random_trajectory(rng, 2, 1, 5);
  RngStream noise(4);
  for (int step = 0; step < 2000; ++step) {
    train_step(m, {&traj}, 3e-4, noise);
  }
  const Vec mu = redistribute(m, traj);
  CHECK(std::abs(mu.sum() - traj.episodic_return) < 1e-2);
}

TEST_CASE("train_step rejects an empty minibatch") {
  RngStream rng(16);
  RewardModel m = make_reward_model(RewardFamily::Gaussian, 2, 1, {8}, rng);
  RngStream noise(5);
  CHECK_THROWS_AS(train_step(m, {}, 1e-3, noise), DomainError);
}

// ---------------------------------------------------------------------------
// redistribute

TEST_CASE("redistribute: zero net gives all-zero dense rewards") {
  RewardModel m = zero_model(RewardFamily::Gaussian);
  RngStream rng(17);
  const Trajectory traj = random_trajectory(rng, 2, 1, 6);
  CHECK(redistribute(m, traj).isZero(0.0));
}

TEST_CASE("redistribute is independent of the sigma and lambda heads") {
  RngStream rng(18);
  RewardModel m = make_reward_model(RewardFamily::SkewNormal, 2, 1, {16}, rng);
  const Trajectory traj = random_trajectory(rng, 2, 1, 6);
  const Vec before = redistribute(m, traj);
  // rewire the sigma and lambda output rows; mu must not move
  m.net.weights.back().row(1).setConstant(3.21);
  m.net.weights.back().row(2).setConstant(-1.23);
  m.net.biases.back()(1) = 0.7;
  m.net.biases.back()(2) = -0.4;
  const Vec after = redistribute(m, traj);
  CHECK((before.array() == after.array()).all());
}

// ---------------------------------------------------------------------------
// optimal sigma

TEST_CASE("optimal_sigma_gaussian is |delta| and rejects 0") {
  CHECK(optimal_sigma_gaussian(3.0) == 3.0);
  CHECK(optimal_sigma_gaussian(-2.5) == 2.5);
  CHECK_THROWS_AS(optimal_sigma_gaussian(0.0), DomainError);
}

TEST_CASE("optimal_sigma_gaussian agrees with a grid search") {
  std::vector<double> grid;
  for (int k = 0; k < 4000; ++k) {
    grid.push_back(std::exp(std::log(1e-3) + k * (std::log(1e2) - std::log(1e-3)) / 3999));
  }
  const double delta = 0.7;
  const auto loss = [delta](double s) { return std::log(s) + delta * delta / (2 * s * s); };
  const double best = oracle::grid_argmin(loss, grid);
  const double cell = (std::log(1e2) - std::log(1e-3)) / 3999;
  CHECK(std::abs(std::log(best) - std::log(0.7)) <= cell);
}

TEST_CASE("optimal_sigma_skew: lambda=0 returns delta exactly") {
  CHECK(optimal_sigma_skew(1.0, 0.0, 1e-10) == 1.0);
  CHECK(optimal_sigma_skew(0.37, 0.0, 1e-10) == 0.37);
}

TEST_CASE("optimal_sigma_skew matches golden-section and has the right sign") {
  const auto full_loss = [](double delta, double lambda, double s) {
    return std::log(s) + delta * delta / (2 * s * s) -
           oracle::log_normal_cdf(lambda * delta / s);
  };
  {
    const double s = optimal_sigma_skew(1.0, 1.0, 1e-13);
    CHECK(s < 1.0);
    const double argmin = oracle::golden_section(
        [&](double x) { return full_loss(1.0, 1.0, x); }, 1e-3, 1e3, 1e-9);
    CHECK(std::abs(s - argmin) < 1e-6);
  }
  {
    const double s = optimal_sigma_skew(1.0, -1.0, 1e-13);
    CHECK(s > 1.0);
    const double argmin = oracle::golden_section(
        [&](double x) { return full_loss(1.0, -1.0, x); }, 1e-3, 1e3, 1e-9);
    CHECK(std::abs(s - argmin) < 1e-6);
  }
}

TEST_CASE("optimal_sigma_skew rejects bad domains") {
  CHECK_THROWS_AS(optimal_sigma_skew(-1.0, 0.5, 1e-8), DomainError);
  CHECK_THROWS_AS(optimal_sigma_skew(0.0, 0.5, 1e-8), DomainError);
  CHECK_THROWS_AS(optimal_sigma_skew(1.0, 0.5, 0.0), DomainError);
}

// ---------------------------------------------------------------------------
// analytic gradients

TEST_CASE("analytic_grads_gaussian closed-form spot values") {
  auto g = analytic_grads_gaussian(0.0, 1.0);
  CHECK(g.d_mu == 0.0);
  CHECK(g.d_sigma == 1.0);
  g = analytic_grads_gaussian(1.0, 1.0);
  CHECK(g.d_mu == -1.0);
  CHECK(g.d_sigma == 0.0);
  g = analytic_grads_gaussian(2.0, 1.0);
  CHECK(g.d_mu == -2.0);
  CHECK(g.d_sigma == -3.0);
}

TEST_CASE("analytic_grads_skew reduces to Gaussian at lambda=0") {
  RngStream rng(19);
  for (int i = 0; i < 1000; ++i) {
    const double delta = rng.uniform(-5, 5);
    const double sigma = std::exp(rng.uniform(std::log(1e-2), std::log(10.0)));
    const GradPair a = analytic_grads_skew(delta, sigma, 0.0);
    const GradPair b = analytic_grads_gaussian(delta, sigma);
    // gamma(0) = sqrt(2/pi), so the lambda terms vanish with lambda
    CHECK(std::abs(a.d_mu - b.d_mu) <= 1e-12 * std::max(1.0, std::abs(b.d_mu)));
    CHECK(std::abs(a.d_sigma - b.d_sigma) <= 1e-12 * std::max(1.0, std::abs(b.d_sigma)));
  }
}

TEST_CASE("analytic_grads_skew matches finite differences of skew_normal_nll") {
  const double delta = 1.0, sigma = 1.0, lambda = 1.0;
  const GradPair g = analytic_grads_skew(delta, sigma, lambda);
  const double d_mu_fd = -oracle::central_diff(
      [&](double d) { return skew_normal_nll(d, {0.0, sigma, lambda}); }, delta, 1e-6);
  const double d_sigma_fd = oracle::central_diff(
      [&](double s) { return skew_normal_nll(delta, {0.0, s, lambda}); }, sigma, 1e-6);
  CHECK(oracle::close_rel(g.d_mu, d_mu_fd, 1e-6));
  CHECK(oracle::close_rel(g.d_sigma, d_sigma_fd, 1e-6));
}

TEST_CASE("d_sigma vanishes at the skew fixed point") {
  for (double lambda : {-3.0, -1.0, 0.5, 2.0}) {
    for (double delta : {0.3, 1.0, 4.0}) {
      const double s = optimal_sigma_skew(delta, lambda, 1e-13);
      CHECK(std::abs(analytic_grads_skew(delta, s, lambda).d_sigma) < 1e-7);
    }
  }
}

// ---------------------------------------------------------------------------
// checkpoints

TEST_CASE("reward model checkpoint round-trips") {
  RngStream rng(20);
  RewardModel m = make_reward_model(RewardFamily::SkewNormal, 3, 2, {16, 16}, rng);
  m.sigma_min = 1e-3;
  m.sigma_max = 50.0;
  std::stringstream buf;
  save_reward_model(m, buf);
  const RewardModel loaded = load_reward_model(buf);
  CHECK(loaded.family == RewardFamily::SkewNormal);
  CHECK(loaded.sigma_min == 1e-3);
  CHECK(loaded.sigma_max == 50.0);
  CHECK(loaded.state_dim == 3);
  for (int l = 0; l < m.net.num_layers(); ++l) {
    CHECK((loaded.net.weights[l].array() == m.net.weights[l].array()).all());
  }
}
