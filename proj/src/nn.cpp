#include "lrr/nn.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace lrr::nn {

namespace {

void check_sizes(const std::vector<int>& sizes) {
  if (sizes.size() < 2) throw ShapeError("DenseNet needs at least input and output layers");
  for (int s : sizes) {
    if (s <= 0) throw ShapeError("DenseNet layer sizes must be positive");
  }
}

}  // namespace

DenseNet make_net(const std::vector<int>& layer_sizes, RngStream& rng) {
  check_sizes(layer_sizes);
  DenseNet net;
  net.layer_sizes = layer_sizes;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int fan_in = layer_sizes[l];
    const int fan_out = layer_sizes[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    Mat w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) {
        w(r, c) = rng.uniform(-bound, bound);
      }
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(Vec::Zero(fan_out));
  }
  return net;
}

DenseNet make_zero_net(const std::vector<int>& layer_sizes) {
  check_sizes(layer_sizes);
  DenseNet net;
  net.layer_sizes = layer_sizes;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    net.weights.push_back(Mat::Zero(layer_sizes[l + 1], layer_sizes[l]));
    net.biases.push_back(Vec::Zero(layer_sizes[l + 1]));
  }
  return net;
}

std::size_t parameter_count(const DenseNet& net) {
  std::size_t n = 0;
  for (int l = 0; l < net.num_layers(); ++l) {
    n += static_cast<std::size_t>(net.weights[l].size()) +
         static_cast<std::size_t>(net.biases[l].size());
  }
  return n;
}

Mat forward(const DenseNet& net, const Mat& inputs, ForwardCache* cache) {
  require_shape(inputs.rows() == net.input_dim(),
                "forward: input has " + std::to_string(inputs.rows()) +
                    " rows, net expects " + std::to_string(net.input_dim()));
  if (cache) {
    cache->activations.clear();
    cache->activations.reserve(net.num_layers() + 1);
    cache->activations.push_back(inputs);
  }
  Mat a = inputs;
  for (int l = 0; l < net.num_layers(); ++l) {
    Mat z = (net.weights[l] * a).colwise() + net.biases[l];
    if (l + 1 < net.num_layers()) {
      a = z.cwiseMax(0.0);  // ReLU; subgradient at 0 is taken as 0
    } else {
      a = std::move(z);
    }
    if (cache) cache->activations.push_back(a);
  }
  return a;
}

Vec forward(const DenseNet& net, const Vec& input) {
  return Vec(forward(net, Mat(input), nullptr));
}

void Gradients::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

void Gradients::scale(double s) {
  for (auto& w : weights) w *= s;
  for (auto& b : biases) b *= s;
}

void Gradients::accumulate(const Gradients& other, double weight) {
  require_shape(weights.size() == other.weights.size(), "Gradients::accumulate: layer mismatch");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += weight * other.weights[l];
    biases[l] += weight * other.biases[l];
  }
}

Gradients zero_gradients(const DenseNet& net) {
  Gradients g;
  for (int l = 0; l < net.num_layers(); ++l) {
    g.weights.push_back(Mat::Zero(net.weights[l].rows(), net.weights[l].cols()));
    g.biases.push_back(Vec::Zero(net.biases[l].size()));
  }
  return g;
}

Mat backward(const DenseNet& net, const ForwardCache& cache, const Mat& output_grad,
             Gradients& grads) {
  const int layers = net.num_layers();
  if (static_cast<int>(cache.activations.size()) != layers + 1) {
    throw ContractError("backward: cache does not match this net (stale or foreign cache?)");
  }
  for (int l = 0; l <= layers; ++l) {
    if (cache.activations[l].rows() != net.layer_sizes[l]) {
      throw ContractError("backward: cached activation width differs from net layer size");
    }
  }
  require_shape(output_grad.rows() == net.output_dim() &&
                    output_grad.cols() == cache.activations.back().cols(),
                "backward: output_grad shape does not match forward output");
  require_shape(static_cast<int>(grads.weights.size()) == layers,
                "backward: gradient accumulator layer count mismatch");

  Mat delta = output_grad;  // output layer is identity
  for (int l = layers - 1; l >= 0; --l) {
    if (l < layers - 1) {
      // ReLU mask: stored activation is positive iff pre-activation was.
      delta = delta.cwiseProduct(
          (cache.activations[l + 1].array() > 0.0).cast<double>().matrix());
    }
    grads.weights[l].noalias() += delta * cache.activations[l].transpose();
    grads.biases[l] += delta.rowwise().sum();
    if (l > 0) {
      delta = net.weights[l].transpose() * delta;
    } else {
      return net.weights[0].transpose() * delta;
    }
  }
  return Mat();  // unreachable; layers >= 1 by construction
}

AdamState make_adam_state(const DenseNet& net) {
  AdamState s;
  for (int l = 0; l < net.num_layers(); ++l) {
    s.m_w.push_back(Mat::Zero(net.weights[l].rows(), net.weights[l].cols()));
    s.v_w.push_back(Mat::Zero(net.weights[l].rows(), net.weights[l].cols()));
    s.m_b.push_back(Vec::Zero(net.biases[l].size()));
    s.v_b.push_back(Vec::Zero(net.biases[l].size()));
  }
  return s;
}

namespace {

void check_finite(const Mat& g, int layer, const char* kind) {
  if (g.allFinite()) return;
  for (Eigen::Index c = 0; c < g.cols(); ++c) {
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      if (!std::isfinite(g(r, c))) {
        std::ostringstream msg;
        msg << "adam_step: non-finite gradient at layer " << layer << " " << kind << " ("
            << r << "," << c << ")";
        throw NumericError(msg.str());
      }
    }
  }
}

}  // namespace

void adam_step(DenseNet& net, const Gradients& grads, AdamState& state, double learning_rate) {
  if (!(learning_rate >= 0.0)) throw DomainError("adam_step: learning_rate must be >= 0");
  require_shape(static_cast<int>(grads.weights.size()) == net.num_layers() &&
                    static_cast<int>(state.m_w.size()) == net.num_layers(),
                "adam_step: layer count mismatch");
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (int l = 0; l < net.num_layers(); ++l) {
    check_finite(grads.weights[l], l, "weight");
    check_finite(Mat(grads.biases[l]), l, "bias");

    state.m_w[l] = state.beta1 * state.m_w[l] + (1.0 - state.beta1) * grads.weights[l];
    state.v_w[l] = state.beta2 * state.v_w[l] +
                   (1.0 - state.beta2) * grads.weights[l].cwiseProduct(grads.weights[l]);
    net.weights[l].array() -= learning_rate * (state.m_w[l].array() / bc1) /
                              ((state.v_w[l].array() / bc2).sqrt() + state.epsilon_hat);

    state.m_b[l] = state.beta1 * state.m_b[l] + (1.0 - state.beta1) * grads.biases[l];
    state.v_b[l] = state.beta2 * state.v_b[l] +
                   (1.0 - state.beta2) * grads.biases[l].cwiseProduct(grads.biases[l]);
    net.biases[l].array() -= learning_rate * (state.m_b[l].array() / bc1) /
                             ((state.v_b[l].array() / bc2).sqrt() + state.epsilon_hat);
  }
}

double adam_scalar_step(double param, double grad, ScalarAdam& state, double learning_rate) {
  if (!std::isfinite(grad)) throw NumericError("adam_scalar_step: non-finite gradient");
  state.step_count += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad;
  const double mhat = state.m / (1.0 - std::pow(state.beta1, static_cast<double>(state.step_count)));
  const double vhat = state.v / (1.0 - std::pow(state.beta2, static_cast<double>(state.step_count)));
  return param - learning_rate * mhat / (std::sqrt(vhat) + state.epsilon_hat);
}

void polyak_update(DenseNet& target, const DenseNet& online, double tau) {
  require_shape(target.layer_sizes == online.layer_sizes, "polyak_update: shape mismatch");
  if (!(tau >= 0.0 && tau <= 1.0)) throw DomainError("polyak_update: tau must be in [0,1]");
  if (tau == 0.0) return;
  if (tau == 1.0) {
    target.weights = online.weights;
    target.biases = online.biases;
    return;
  }
  // incremental form: an exact no-op when target == online
  for (int l = 0; l < target.num_layers(); ++l) {
    target.weights[l] += tau * (online.weights[l] - target.weights[l]);
    target.biases[l] += tau * (online.biases[l] - target.biases[l]);
  }
}

namespace {
constexpr const char* kMagic = "lrrnet";
constexpr int kVersion = 1;
}  // namespace

void save_net(const DenseNet& net, std::ostream& out) {
  out.precision(17);
  out << kMagic << " " << kVersion << "\n";
  out << net.layer_sizes.size();
  for (int s : net.layer_sizes) out << " " << s;
  out << "\n";
  for (int l = 0; l < net.num_layers(); ++l) {
    const Mat& w = net.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        out << w(r, c) << (c + 1 < w.cols() ? ' ' : '\n');
      }
    }
    const Vec& b = net.biases[l];
    for (Eigen::Index r = 0; r < b.size(); ++r) {
      out << b(r) << (r + 1 < b.size() ? ' ' : '\n');
    }
  }
  if (!out) throw IoError("save_net: write failed");
}

DenseNet load_net(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMagic || version != kVersion) {
    throw IoError("load_net: not a lrrnet v1 checkpoint");
  }
  std::size_t n = 0;
  if (!(in >> n) || n < 2) throw IoError("load_net: bad layer count");
  std::vector<int> sizes(n);
  for (auto& s : sizes) {
    if (!(in >> s) || s <= 0) throw IoError("load_net: bad layer size");
  }
  DenseNet net = make_zero_net(sizes);
  for (int l = 0; l < net.num_layers(); ++l) {
    Mat& w = net.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        if (!(in >> w(r, c))) throw IoError("load_net: truncated weights");
      }
    }
    Vec& b = net.biases[l];
    for (Eigen::Index r = 0; r < b.size(); ++r) {
      if (!(in >> b(r))) throw IoError("load_net: truncated biases");
    }
  }
  return net;
}

void save_net_file(const DenseNet& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_net_file: cannot open " + path);
  save_net(net, out);
}

DenseNet load_net_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_net_file: cannot open " + path);
  return load_net(in);
}

}  // namespace lrr::nn
