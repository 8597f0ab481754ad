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

#ifndef OOSGUARD_NN_H_
#define OOSGUARD_NN_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "oosguard/error.h"
#include "oosguard/linalg.h"
#include "oosguard/random.h"

namespace oosguard {

enum class Activation { kRelu, kLinear };

struct DenseLayer {
  Matrix weights;             // out x in
  std::vector<double> bias;   // out

  bool operator==(const DenseLayer&) const = default;
};

// Fully connected feed-forward network. Hidden layers use the hidden
// activation, the last layer the output activation.
class DenseNetwork {
 public:
  DenseNetwork() = default;
  // Zero-initialized parameters.
  explicit DenseNetwork(std::vector<std::size_t> layer_dims,
                        Activation hidden = Activation::kRelu,
                        Activation output = Activation::kLinear);

  // Glorot-uniform weights, zero biases.
  static DenseNetwork glorot(std::vector<std::size_t> layer_dims,
                             CounterRng& rng,
                             Activation hidden = Activation::kRelu,
                             Activation output = Activation::kLinear);

  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  std::size_t input_dim() const { return dims_.empty() ? 0 : dims_.front(); }
  std::size_t output_dim() const { return dims_.empty() ? 0 : dims_.back(); }
  std::size_t layer_count() const { return layers_.size(); }
  std::size_t parameter_count() const;

  Activation hidden_activation() const { return hidden_; }
  Activation output_activation() const { return output_; }
  Activation activation(std::size_t layer) const {
    return layer + 1 == layers_.size() ? output_ : hidden_;
  }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  bool operator==(const DenseNetwork&) const = default;

 private:
  std::vector<std::size_t> dims_;
  Activation hidden_ = Activation::kRelu;
  Activation output_ = Activation::kLinear;
  std::vector<DenseLayer> layers_;
};

// Everything backward() needs: the input of every layer and every
// pre-activation.
struct ForwardTrace {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre_activations;
  Matrix output;
};

ForwardTrace forward(const DenseNetwork& net, const Matrix& batch);
// Forward pass without retaining intermediates.
Matrix predict(const DenseNetwork& net, const Matrix& batch);

struct GradientSet {
  std::vector<DenseLayer> layers;  // same shapes as the owning network

  static GradientSet zeros_like(const DenseNetwork& net);
  GradientSet& operator+=(const GradientSet& other);
};

struct BackwardResult {
  GradientSet gradients;
  Matrix input_gradient;
};

// Reverse-mode gradients of a scalar loss given dLoss/dOutput.
BackwardResult backward(const DenseNetwork& net, const ForwardTrace& trace,
                        const Matrix& output_gradient);

struct LossAndGradient {
  double loss = 0.0;
  Matrix gradient;
};

// Row-wise max-subtracted softmax.
Matrix softmax(const Matrix& logits);

// Mean over the batch of -log softmax(logits)[label]; gradient w.r.t. logits.
LossAndGradient softmax_cross_entropy(const Matrix& logits,
                                      std::span<const ClassIndex> labels);

// Mean over the batch of (1/d) * sum_k (s_k - r_k)^2; gradient w.r.t. the
// reconstructions r. The gradient w.r.t. the targets s is its negation.
LossAndGradient mse_reconstruction(const Matrix& targets,
                                   const Matrix& reconstructions);

// (1 - alpha) * ce + alpha * ae, alpha in [0, 1].
double joint_loss(double ce, double ae, double alpha);

enum class OptimizerKind { kAdam, kSgd };

OptimizerKind parse_optimizer(std::string_view name);
std::string_view optimizer_name(OptimizerKind kind);

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const OptimizerSettings&) const = default;
};

struct OptimizerState {
  OptimizerSettings settings;
  std::uint64_t step = 0;
  GradientSet first_moment;   // adam only
  GradientSet second_moment;  // adam only

  static OptimizerState for_network(const DenseNetwork& net,
                                    const OptimizerSettings& settings);
};

// One update of every parameter in net. Throws NumericError naming the first
// non-finite gradient entry, before any parameter is modified.
void optimizer_step(DenseNetwork& net, const GradientSet& grads,
                    OptimizerState& state);

// Finite-difference gradient checking ---------------------------------------

// A scalar function of a set of parameter blocks plus its analytic gradient.
struct GradCheckTarget {
  std::vector<std::span<double>> parameters;
  std::function<double()> loss;
  // One vector per parameter block, same lengths.
  std::function<std::vector<std::vector<double>>()> gradient;
};

// Relative error denominator floor: |a - n| / max(|a|, |n|, floor).
inline constexpr double kGradCheckFloor = 1e-3;

// Max relative error between the analytic gradient and central differences
// with the given step, over every parameter.
double grad_check(const GradCheckTarget& target, double step = 1e-5);

// Mutable views of every weight and bias block, layer by layer.
std::vector<std::span<double>> parameter_views(DenseNetwork& net);
std::vector<std::vector<double>> flatten(const GradientSet& grads);

enum class GradCheckLoss {
  kReconstruction,  // MSE of the network output against its own input
  kQuadratic,       // 0.5 * sum (output - target)^2 over a random target
};

// Checks net on a seeded random batch of batch_size rows.
double grad_check(DenseNetwork net, GradCheckLoss loss, std::uint64_t seed,
                  std::size_t batch_size = 8);

}  // namespace oosguard

#endif  // OOSGUARD_NN_H_
