#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "lrr/common.hpp"
#include "lrr/rng.hpp"

namespace lrr::nn {

// Fully connected network: ReLU on hidden layers, identity output.
// weights[l] has shape (layer_sizes[l+1], layer_sizes[l]); activations are
// column vectors, so a batch is a matrix with one sample per column.
struct DenseNet {
  std::vector<int> layer_sizes;
  std::vector<Mat> weights;
  std::vector<Vec> biases;

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  int num_layers() const { return static_cast<int>(weights.size()); }
};

// Uniform init in +-sqrt(6/(fan_in+fan_out)).
DenseNet make_net(const std::vector<int>& layer_sizes, RngStream& rng);
DenseNet make_zero_net(const std::vector<int>& layer_sizes);

std::size_t parameter_count(const DenseNet& net);

// Per-layer activations recorded by forward(); activations[0] is the input
// batch, activations[l+1] the output of layer l. Enough to run backward():
// the ReLU mask is recovered from the sign of the stored activations.
struct ForwardCache {
  std::vector<Mat> activations;
};

Mat forward(const DenseNet& net, const Mat& inputs, ForwardCache* cache = nullptr);
Vec forward(const DenseNet& net, const Vec& input);

struct Gradients {
  std::vector<Mat> weights;
  std::vector<Vec> biases;

  void set_zero();
  void scale(double s);
  void accumulate(const Gradients& other, double weight = 1.0);
};

Gradients zero_gradients(const DenseNet& net);

// Backpropagates output_grad (same shape as the forward output batch) through
// the cached pass, accumulates parameter gradients into grads, and returns
// the gradient with respect to the input batch. Column b of output_grad is
// d(loss)/d(output of sample b); batch reductions are the caller's business.
Mat backward(const DenseNet& net, const ForwardCache& cache, const Mat& output_grad,
             Gradients& grads);

struct AdamState {
  std::vector<Mat> m_w, v_w;
  std::vector<Vec> m_b, v_b;
  long step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon_hat = 1e-8;
};

AdamState make_adam_state(const DenseNet& net);

// Bias-corrected Adam update; throws NumericError naming the offending
// parameter if any gradient entry is non-finite.
void adam_step(DenseNet& net, const Gradients& grads, AdamState& state, double learning_rate);

// Adam for a single scalar parameter (used for the SAC temperature).
struct ScalarAdam {
  double m = 0.0;
  double v = 0.0;
  long step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon_hat = 1e-8;
};

double adam_scalar_step(double param, double grad, ScalarAdam& state, double learning_rate);

// target <- (1 - tau) * target + tau * online, elementwise.
void polyak_update(DenseNet& target, const DenseNet& online, double tau);

// Checkpoint format (text, whitespace separated, 17 significant digits so
// doubles round-trip bit-exactly):
//   lrrnet 1
//   <num_sizes> <size_0> ... <size_{L}>
//   weights of layer 0 in row-major order, then its biases, then layer 1, ...
void save_net(const DenseNet& net, std::ostream& out);
DenseNet load_net(std::istream& in);
void save_net_file(const DenseNet& net, const std::string& path);
DenseNet load_net_file(const std::string& path);

}  // namespace lrr::nn
