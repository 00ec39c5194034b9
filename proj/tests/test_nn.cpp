#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "lrr/math.hpp"
#include "lrr/nn.hpp"
#include "lrr/rng.hpp"
#include "oracles.hpp"

using namespace lrr;

TEST_CASE("log_normal_cdf matches the high-precision oracle") {
  for (double x = -37.0; x <= 8.0; x += 0.25) {
    const double got = log_normal_cdf(x);
    const double want = oracle::log_normal_cdf(x);
    CHECK(oracle::close_rel(got, want, 1e-12, 1e-13));
  }
  // asymptotic branch stays finite and accurate well past the switch
  for (double x : {-31.0, -35.0, -50.0, -100.0}) {
    CHECK(std::isfinite(log_normal_cdf(x)));
    CHECK(oracle::close_rel(log_normal_cdf(x), oracle::log_normal_cdf(x), 1e-9, 1e-9));
  }
  CHECK(log_normal_cdf(0.0) == doctest::Approx(std::log(0.5)).epsilon(1e-15));
}

TEST_CASE("mills_ratio is finite and positive far into the left tail") {
  for (double x : {-30.0, -20.0, -5.0, 0.0, 3.0}) {
    const double g = mills_ratio(x);
    CHECK(std::isfinite(g));
    CHECK(g > 0.0);
  }
  // gamma(x) ~ -x as x -> -inf
  CHECK(mills_ratio(-25.0) == doctest::Approx(25.0).epsilon(1e-2));
}

TEST_CASE("RngStream is reproducible and substreams are independent") {
  RngStream a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.normal() == b.normal());
    CHECK(a.uniform01() == b.uniform01());
  }
  RngStream s1 = RngStream(7).substream("env");
  RngStream s2 = RngStream(7).substream("sac");
  CHECK(s1.next_u64() != s2.next_u64());
  CHECK(derive_seed(7, "env", 0) != derive_seed(7, "env", 1));
}

TEST_CASE("uniform_int stays in range") {
  RngStream rng(3);
  for (int i = 0; i < 1000; ++i) {
    const int v = rng.uniform_int(7);
    CHECK(v >= 0);
    CHECK(v < 7);
  }
}

TEST_CASE("forward: zero net maps anything to zero") {
  nn::DenseNet net = nn::make_zero_net({3, 8, 2});
  Vec x(3);
  x << 1.0, -2.0, 0.5;
  CHECK(nn::forward(net, x).isZero(0.0));
}

TEST_CASE("forward: single affine layer") {
  nn::DenseNet net = nn::make_zero_net({1, 1});
  net.weights[0](0, 0) = 2.0;
  net.biases[0](0) = 1.0;
  Vec x(1);
  x << 3.0;
  CHECK(nn::forward(net, x)(0) == 7.0);
}

TEST_CASE("forward: ReLU clips negative pre-activations") {
  nn::DenseNet net = nn::make_zero_net({2, 2, 2});
  net.weights[0] << 1.0, 0.0, 0.0, 1.0;  // identity into hidden
  net.weights[1] << 1.0, 0.0, 0.0, 1.0;
  Vec x(2);
  x << -1.0, 2.0;
  const Vec y = nn::forward(net, x);
  CHECK(y(0) == 0.0);
  CHECK(y(1) == 2.0);
}

TEST_CASE("forward is pure: repeated calls agree bitwise") {
  RngStream rng(5);
  nn::DenseNet net = nn::make_net({4, 16, 3}, rng);
  Vec x(4);
  for (int d = 0; d < 4; ++d) x(d) = rng.uniform(-1, 1);
  const Vec y1 = nn::forward(net, x);
  const Vec y2 = nn::forward(net, x);
  CHECK((y1.array() == y2.array()).all());
}

TEST_CASE("forward rejects wrong input dimension") {
  nn::DenseNet net = nn::make_zero_net({3, 2});
  const Vec bad = Vec::Zero(4);
  CHECK_THROWS_AS(nn::forward(net, bad), ShapeError);
}

TEST_CASE("backward: zero output gradient gives zero parameter gradients") {
  RngStream rng(11);
  nn::DenseNet net = nn::make_net({3, 8, 2}, rng);
  nn::ForwardCache cache;
  nn::forward(net, Mat(Vec::Ones(3)), &cache);
  nn::Gradients g = nn::zero_gradients(net);
  nn::backward(net, cache, Mat::Zero(2, 1), g);
  for (const auto& w : g.weights) CHECK(w.isZero(0.0));
  for (const auto& b : g.biases) CHECK(b.isZero(0.0));
}

TEST_CASE("backward: 1-layer linear net, loss = output") {
  nn::DenseNet net = nn::make_zero_net({3, 1});
  Vec x(3);
  x << 0.5, -1.5, 2.0;
  nn::ForwardCache cache;
  nn::forward(net, Mat(x), &cache);
  nn::Gradients g = nn::zero_gradients(net);
  nn::backward(net, cache, Mat::Ones(1, 1), g);
  CHECK((g.weights[0].transpose() - x).norm() == 0.0);
  CHECK(g.biases[0](0) == 1.0);
}

TEST_CASE("backward rejects a cache from a different net") {
  RngStream rng(13);
  nn::DenseNet net = nn::make_net({3, 8, 2}, rng);
  nn::DenseNet other = nn::make_net({3, 4, 2}, rng);
  nn::ForwardCache cache;
  nn::forward(other, Mat(Vec::Ones(3)), &cache);
  nn::Gradients g = nn::zero_gradients(net);
  CHECK_THROWS_AS(nn::backward(net, cache, Mat::Zero(2, 1), g), ContractError);
}

namespace {

// Smallest |pre-activation| over the hidden layers; finite differences are
// only meaningful away from the ReLU kinks.
double kink_margin(const lrr::nn::DenseNet& net, const Vec& x) {
  double margin = std::numeric_limits<double>::infinity();
  Vec a = x;
  for (int l = 0; l + 1 < net.num_layers(); ++l) {
    const Vec z = net.weights[l] * a + net.biases[l];
    margin = std::min(margin, z.cwiseAbs().minCoeff());
    a = z.cwiseMax(0.0);
  }
  return margin;
}

}  // namespace

// The central finite-difference oracle: perturb every parameter of a random
// net and compare the analytic gradient of loss = sum(output * coeffs).
TEST_CASE("backward matches central finite differences on random nets") {
  RngStream rng(17);
  int checked = 0;
  int trials_used = 0;
  for (int trial = 0; trials_used < 100 && trial < 400; ++trial) {
    RngStream init = rng.substream("init", trial);
    nn::DenseNet net = nn::make_net({4, 8, 8, 3}, init);
    Vec x(4);
    for (int d = 0; d < 4; ++d) x(d) = rng.uniform(-2.0, 2.0);
    Vec coeffs(3);
    for (int d = 0; d < 3; ++d) coeffs(d) = rng.uniform(-1.0, 1.0);
    if (kink_margin(net, x) < 1e-3) continue;
    ++trials_used;

    const auto loss = [&](const nn::DenseNet& n) {
      return (nn::forward(n, x).array() * coeffs.array()).sum();
    };

    nn::ForwardCache cache;
    nn::forward(net, Mat(x), &cache);
    nn::Gradients g = nn::zero_gradients(net);
    nn::backward(net, cache, Mat(coeffs), g);

    const double h = 1e-5;
    for (int l = 0; l < net.num_layers(); ++l) {
      for (Eigen::Index r = 0; r < net.weights[l].rows(); ++r) {
        for (Eigen::Index c = 0; c < net.weights[l].cols(); ++c) {
          nn::DenseNet pert = net;
          pert.weights[l](r, c) += h;
          const double up = loss(pert);
          pert.weights[l](r, c) -= 2 * h;
          const double dn = loss(pert);
          const double fd = (up - dn) / (2 * h);
          CHECK(oracle::close_rel(g.weights[l](r, c), fd, 1e-5, 1e-8));
          ++checked;
        }
      }
      for (Eigen::Index r = 0; r < net.biases[l].size(); ++r) {
        nn::DenseNet pert = net;
        pert.biases[l](r) += h;
        const double up = loss(pert);
        pert.biases[l](r) -= 2 * h;
        const double dn = loss(pert);
        CHECK(oracle::close_rel(g.biases[l](r), (up - dn) / (2 * h), 1e-5, 1e-8));
        ++checked;
      }
    }
  }
  CHECK(trials_used == 100);
  CHECK(checked > 1000);
}

TEST_CASE("backward input gradient matches finite differences") {
  RngStream rng(23);
  nn::DenseNet net = nn::make_net({4, 8, 2}, rng);
  Vec x(4);
  for (int d = 0; d < 4; ++d) x(d) = rng.uniform(-1.0, 1.0);
  nn::ForwardCache cache;
  nn::forward(net, Mat(x), &cache);
  nn::Gradients g = nn::zero_gradients(net);
  const Mat dx = nn::backward(net, cache, Mat::Ones(2, 1), g);
  const double h = 1e-6;
  for (int d = 0; d < 4; ++d) {
    Vec xp = x, xm = x;
    xp(d) += h;
    xm(d) -= h;
    const double fd = (nn::forward(net, xp).sum() - nn::forward(net, xm).sum()) / (2 * h);
    CHECK(oracle::close_rel(dx(d, 0), fd, 1e-5, 1e-8));
  }
}

TEST_CASE("adam: zero gradients leave parameters unchanged for any step count") {
  RngStream rng(29);
  nn::DenseNet net = nn::make_net({2, 4, 1}, rng);
  const nn::DenseNet before = net;
  nn::AdamState state = nn::make_adam_state(net);
  const nn::Gradients zeros = nn::zero_gradients(net);
  for (int step = 0; step < 10; ++step) nn::adam_step(net, zeros, state, 1e-3);
  CHECK(state.step_count == 10);
  for (int l = 0; l < net.num_layers(); ++l) {
    CHECK((net.weights[l].array() == before.weights[l].array()).all());
    CHECK((net.biases[l].array() == before.biases[l].array()).all());
  }
}

TEST_CASE("adam: first-step update is -lr * g/(|g| + eps)") {
  nn::DenseNet net = nn::make_zero_net({1, 1});
  nn::AdamState state = nn::make_adam_state(net);
  nn::Gradients g = nn::zero_gradients(net);
  g.weights[0](0, 0) = 0.5;
  nn::adam_step(net, g, state, 1e-3);
  const double expected = -1e-3 * 0.5 / (0.5 + 1e-8);
  CHECK(net.weights[0](0, 0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(state.step_count == 1);
}

TEST_CASE("adam: identical calls from identical states are bitwise identical") {
  RngStream rng(31);
  nn::DenseNet net1 = nn::make_net({3, 8, 2}, rng);
  nn::DenseNet net2 = net1;
  nn::AdamState s1 = nn::make_adam_state(net1);
  nn::AdamState s2 = nn::make_adam_state(net2);
  nn::Gradients g = nn::zero_gradients(net1);
  for (auto& w : g.weights) w.setConstant(0.3);
  for (auto& b : g.biases) b.setConstant(-0.1);
  nn::adam_step(net1, g, s1, 3e-4);
  nn::adam_step(net2, g, s2, 3e-4);
  for (int l = 0; l < net1.num_layers(); ++l) {
    CHECK((net1.weights[l].array() == net2.weights[l].array()).all());
    CHECK((net1.biases[l].array() == net2.biases[l].array()).all());
  }
}

TEST_CASE("adam rejects non-finite gradients and names the parameter") {
  nn::DenseNet net = nn::make_zero_net({2, 2});
  nn::AdamState state = nn::make_adam_state(net);
  nn::Gradients g = nn::zero_gradients(net);
  g.weights[0](1, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    nn::adam_step(net, g, state, 1e-3);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("layer 0") != std::string::npos);
    CHECK(msg.find("(1,0)") != std::string::npos);
  }
}

TEST_CASE("polyak: tau endpoints and midpoint") {
  nn::DenseNet target = nn::make_zero_net({1, 1});
  nn::DenseNet online = nn::make_zero_net({1, 1});
  online.weights[0](0, 0) = 2.0;

  nn::DenseNet t1 = target;
  nn::polyak_update(t1, online, 1.0);
  CHECK(t1.weights[0](0, 0) == 2.0);

  nn::DenseNet t0 = target;
  nn::polyak_update(t0, online, 0.0);
  CHECK(t0.weights[0](0, 0) == 0.0);

  nn::DenseNet th = target;
  nn::polyak_update(th, online, 0.5);
  CHECK(th.weights[0](0, 0) == 1.0);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  RngStream rng(37);
  nn::DenseNet net = nn::make_net({5, 16, 16, 3}, rng);
  std::stringstream buf;
  nn::save_net(net, buf);
  const nn::DenseNet loaded = nn::load_net(buf);
  REQUIRE(loaded.layer_sizes == net.layer_sizes);
  for (int l = 0; l < net.num_layers(); ++l) {
    CHECK((loaded.weights[l].array() == net.weights[l].array()).all());
    CHECK((loaded.biases[l].array() == net.biases[l].array()).all());
  }
}

TEST_CASE("load_net rejects garbage") {
  std::stringstream buf("not a checkpoint");
  CHECK_THROWS_AS(nn::load_net(buf), IoError);
}
