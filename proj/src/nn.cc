/* Copyright 2026 The oosguard Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "oosguard/nn.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace oosguard {
namespace {

bool is_relu(Activation a) { return a == Activation::kRelu; }

void add_bias_rows(Matrix& z, const std::vector<double>& bias) {
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto row = z.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += bias[j];
  }
}

void apply_relu(Matrix& m) {
  for (double& v : m.values()) v = v > 0.0 ? v : 0.0;
}

}  // namespace

DenseNetwork::DenseNetwork(std::vector<std::size_t> layer_dims,
                           Activation hidden, Activation output)
    : dims_(std::move(layer_dims)), hidden_(hidden), output_(output) {
  if (dims_.size() < 2) throw ConfigError("a network needs at least 2 layer dims");
  for (std::size_t d : dims_) {
    if (d == 0) throw ConfigError("layer dims must be positive");
  }
  layers_.reserve(dims_.size() - 1);
  for (std::size_t k = 0; k + 1 < dims_.size(); ++k) {
    layers_.push_back({Matrix(dims_[k + 1], dims_[k]),
                       std::vector<double>(dims_[k + 1], 0.0)});
  }
}

DenseNetwork DenseNetwork::glorot(std::vector<std::size_t> layer_dims,
                                  CounterRng& rng, Activation hidden,
                                  Activation output) {
  DenseNetwork net(std::move(layer_dims), hidden, output);
  for (auto& layer : net.layers_) {
    const double fan_sum =
        static_cast<double>(layer.weights.rows() + layer.weights.cols());
    const double limit = std::sqrt(6.0 / fan_sum);
    for (double& w : layer.weights.values()) w = rng.uniform(-limit, limit);
  }
  return net;
}

std::size_t DenseNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

ForwardTrace forward(const DenseNetwork& net, const Matrix& batch) {
  if (batch.cols() != net.input_dim()) {
    throw DataError("network expects input dim " +
                    std::to_string(net.input_dim()) + ", got " +
                    std::to_string(batch.cols()));
  }
  ForwardTrace trace;
  trace.inputs.reserve(net.layer_count());
  trace.pre_activations.reserve(net.layer_count());
  Matrix current = batch;
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    const auto& layer = net.layers()[k];
    Matrix z = matmul_bt(current, layer.weights);
    add_bias_rows(z, layer.bias);
    trace.inputs.push_back(std::move(current));
    current = z;
    if (is_relu(net.activation(k))) apply_relu(current);
    trace.pre_activations.push_back(std::move(z));
  }
  trace.output = std::move(current);
  return trace;
}

Matrix predict(const DenseNetwork& net, const Matrix& batch) {
  if (batch.cols() != net.input_dim()) {
    throw DataError("network expects input dim " +
                    std::to_string(net.input_dim()) + ", got " +
                    std::to_string(batch.cols()));
  }
  Matrix current = batch;
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    const auto& layer = net.layers()[k];
    Matrix z = matmul_bt(current, layer.weights);
    add_bias_rows(z, layer.bias);
    if (is_relu(net.activation(k))) apply_relu(z);
    current = std::move(z);
  }
  return current;
}

GradientSet GradientSet::zeros_like(const DenseNetwork& net) {
  GradientSet g;
  g.layers.reserve(net.layer_count());
  for (const auto& l : net.layers()) {
    g.layers.push_back({Matrix(l.weights.rows(), l.weights.cols()),
                        std::vector<double>(l.bias.size(), 0.0)});
  }
  return g;
}

GradientSet& GradientSet::operator+=(const GradientSet& other) {
  if (other.layers.size() != layers.size()) {
    throw DataError("gradient sets have different layer counts");
  }
  for (std::size_t k = 0; k < layers.size(); ++k) {
    layers[k].weights += other.layers[k].weights;
    auto& b = layers[k].bias;
    for (std::size_t j = 0; j < b.size(); ++j) b[j] += other.layers[k].bias[j];
  }
  return *this;
}

BackwardResult backward(const DenseNetwork& net, const ForwardTrace& trace,
                        const Matrix& output_gradient) {
  if (trace.inputs.size() != net.layer_count() ||
      trace.pre_activations.size() != net.layer_count()) {
    throw DataError("forward trace does not match the network");
  }
  if (output_gradient.rows() != trace.output.rows() ||
      output_gradient.cols() != trace.output.cols()) {
    throw DataError("output gradient shape does not match the network output");
  }
  BackwardResult result;
  result.gradients.layers.resize(net.layer_count());
  Matrix delta = output_gradient;
  for (std::size_t k = net.layer_count(); k-- > 0;) {
    if (is_relu(net.activation(k))) {
      const auto z = trace.pre_activations[k].values();
      auto dv = delta.values();
      for (std::size_t i = 0; i < dv.size(); ++i) {
        if (!(z[i] > 0.0)) dv[i] = 0.0;
      }
    }
    auto& grad = result.gradients.layers[k];
    grad.weights = matmul_at(delta, trace.inputs[k]);
    grad.bias.assign(delta.cols(), 0.0);
    for (std::size_t i = 0; i < delta.rows(); ++i) {
      const auto row = delta.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) grad.bias[j] += row[j];
    }
    delta = matmul(delta, net.layers()[k].weights);
  }
  result.input_gradient = std::move(delta);
  return result;
}

Matrix softmax(const Matrix& logits) {
  Matrix probs(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto z = logits.row(i);
    const double peak = *std::max_element(z.begin(), z.end());
    auto p = probs.row(i);
    double total = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
      p[j] = std::exp(z[j] - peak);
      total += p[j];
    }
    for (double& v : p) v /= total;
  }
  return probs;
}

LossAndGradient softmax_cross_entropy(const Matrix& logits,
                                      std::span<const ClassIndex> labels) {
  const std::size_t batch = logits.rows();
  const std::size_t classes = logits.cols();
  if (labels.size() != batch) throw DataError("label count differs from batch size");
  if (batch == 0) throw DataError("empty batch");
  LossAndGradient out;
  out.gradient = Matrix(batch, classes);
  const double inv_batch = 1.0 / static_cast<double>(batch);
  double total = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    const ClassIndex y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw DataError("label " + std::to_string(y) + " outside 0.." +
                      std::to_string(classes - 1));
    }
    const auto z = logits.row(i);
    const double peak = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - peak);
    const double log_sum = std::log(sum);
    // -log softmax_y = log(sum exp(z - peak)) - (z_y - peak)
    total += log_sum - (z[static_cast<std::size_t>(y)] - peak);
    auto g = out.gradient.row(i);
    for (std::size_t j = 0; j < classes; ++j) {
      const double p = std::exp(z[j] - peak - log_sum);
      g[j] = (p - (static_cast<std::size_t>(y) == j ? 1.0 : 0.0)) * inv_batch;
    }
  }
  out.loss = total * inv_batch;
  return out;
}

LossAndGradient mse_reconstruction(const Matrix& targets,
                                   const Matrix& reconstructions) {
  if (targets.rows() != reconstructions.rows() ||
      targets.cols() != reconstructions.cols()) {
    throw DataError("reconstruction shape differs from target shape");
  }
  if (targets.rows() == 0 || targets.cols() == 0) throw DataError("empty batch");
  const double scale =
      1.0 / static_cast<double>(targets.rows() * targets.cols());
  LossAndGradient out;
  out.gradient = Matrix(targets.rows(), targets.cols());
  double total = 0.0;
  const auto s = targets.values();
  const auto r = reconstructions.values();
  auto g = out.gradient.values();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double diff = r[i] - s[i];
    total += diff * diff;
    g[i] = 2.0 * diff * scale;
  }
  out.loss = total * scale;
  return out;
}

double joint_loss(double ce, double ae, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("alpha must lie in [0, 1], got " + std::to_string(alpha));
  }
  return (1.0 - alpha) * ce + alpha * ae;
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "sgd") return OptimizerKind::kSgd;
  throw ConfigError("unknown optimizer '" + std::string(name) +
                    "' (expected adam or sgd)");
}

std::string_view optimizer_name(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "sgd";
}

OptimizerState OptimizerState::for_network(const DenseNetwork& net,
                                           const OptimizerSettings& settings) {
  OptimizerState state;
  state.settings = settings;
  if (settings.kind == OptimizerKind::kAdam) {
    state.first_moment = GradientSet::zeros_like(net);
    state.second_moment = GradientSet::zeros_like(net);
  }
  return state;
}

void optimizer_step(DenseNetwork& net, const GradientSet& grads,
                    OptimizerState& state) {
  auto& layers = net.layers();
  if (grads.layers.size() != layers.size()) {
    throw DataError("gradient set does not match the network");
  }
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& g = grads.layers[k];
    if (g.weights.rows() != layers[k].weights.rows() ||
        g.weights.cols() != layers[k].weights.cols() ||
        g.bias.size() != layers[k].bias.size()) {
      throw DataError("gradient shape mismatch at layer " + std::to_string(k));
    }
    const auto w = g.weights.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!std::isfinite(w[i])) {
        throw NumericError("non-finite gradient in layer " + std::to_string(k) +
                           " weights[" + std::to_string(i / g.weights.cols()) +
                           "," + std::to_string(i % g.weights.cols()) + "]");
      }
    }
    for (std::size_t i = 0; i < g.bias.size(); ++i) {
      if (!std::isfinite(g.bias[i])) {
        throw NumericError("non-finite gradient in layer " + std::to_string(k) +
                           " bias[" + std::to_string(i) + "]");
      }
    }
  }

  const auto& s = state.settings;
  ++state.step;
  if (s.kind == OptimizerKind::kSgd) {
    for (std::size_t k = 0; k < layers.size(); ++k) {
      auto w = layers[k].weights.values();
      const auto gw = grads.layers[k].weights.values();
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= s.learning_rate * gw[i];
      auto& b = layers[k].bias;
      for (std::size_t i = 0; i < b.size(); ++i) {
        b[i] -= s.learning_rate * grads.layers[k].bias[i];
      }
    }
    return;
  }

  if (state.first_moment.layers.size() != layers.size()) {
    state.first_moment = GradientSet::zeros_like(net);
    state.second_moment = GradientSet::zeros_like(net);
  }
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(s.beta1, t);
  const double correction2 = 1.0 - std::pow(s.beta2, t);
  auto update = [&](std::span<double> p, std::span<const double> g,
                    std::span<double> m, std::span<double> v) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
      v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
    }
  };
  for (std::size_t k = 0; k < layers.size(); ++k) {
    update(layers[k].weights.values(), grads.layers[k].weights.values(),
           state.first_moment.layers[k].weights.values(),
           state.second_moment.layers[k].weights.values());
    update(layers[k].bias, grads.layers[k].bias,
           state.first_moment.layers[k].bias, state.second_moment.layers[k].bias);
  }
}

std::vector<std::span<double>> parameter_views(DenseNetwork& net) {
  std::vector<std::span<double>> views;
  for (auto& layer : net.layers()) {
    views.push_back(layer.weights.values());
    views.push_back(layer.bias);
  }
  return views;
}

std::vector<std::vector<double>> flatten(const GradientSet& grads) {
  std::vector<std::vector<double>> blocks;
  for (const auto& layer : grads.layers) {
    const auto w = layer.weights.values();
    blocks.emplace_back(w.begin(), w.end());
    blocks.push_back(layer.bias);
  }
  return blocks;
}

double grad_check(const GradCheckTarget& target, double step) {
  const auto analytic = target.gradient();
  if (analytic.size() != target.parameters.size()) {
    throw DataError("analytic gradient has the wrong number of blocks");
  }
  double worst = 0.0;
  for (std::size_t b = 0; b < target.parameters.size(); ++b) {
    auto block = target.parameters[b];
    if (analytic[b].size() != block.size()) {
      throw DataError("analytic gradient block " + std::to_string(b) +
                      " has the wrong length");
    }
    for (std::size_t i = 0; i < block.size(); ++i) {
      const double original = block[i];
      block[i] = original + step;
      const double up = target.loss();
      block[i] = original - step;
      const double down = target.loss();
      block[i] = original;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[b][i];
      const double denom =
          std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

double grad_check(DenseNetwork net, GradCheckLoss loss, std::uint64_t seed,
                  std::size_t batch_size) {
  CounterRng rng(seed, RngStream::kTest);
  Matrix x(batch_size, net.input_dim());
  for (double& v : x.values()) v = rng.normal();
  Matrix target;
  if (loss == GradCheckLoss::kReconstruction) {
    if (net.input_dim() != net.output_dim()) {
      throw ConfigError("reconstruction grad check needs input dim == output dim");
    }
    target = x;
  } else {
    target = Matrix(batch_size, net.output_dim());
    for (double& v : target.values()) v = rng.normal();
  }

  // Returns the loss and dLoss/dOutput at the current parameters.
  auto evaluate = [&](const Matrix& output) -> LossAndGradient {
    if (loss == GradCheckLoss::kReconstruction) {
      return mse_reconstruction(target, output);
    }
    LossAndGradient out;
    out.gradient = Matrix(target.rows(), target.cols());
    const auto o = output.values();
    const auto t = target.values();
    auto g = out.gradient.values();
    for (std::size_t i = 0; i < o.size(); ++i) {
      out.loss += 0.5 * (o[i] - t[i]) * (o[i] - t[i]);
      g[i] = o[i] - t[i];
    }
    return out;
  };

  GradCheckTarget target_fn;
  target_fn.parameters = parameter_views(net);
  target_fn.loss = [&] { return evaluate(predict(net, x)).loss; };
  target_fn.gradient = [&] {
    const ForwardTrace trace = forward(net, x);
    return flatten(backward(net, trace, evaluate(trace.output).gradient).gradients);
  };
  return grad_check(target_fn);
}

}  // namespace oosguard
