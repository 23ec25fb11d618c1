#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fnns/arith.hpp"
#include "fnns/tensor.hpp"

namespace fnns {

enum class LayerKind {
  conv2d,   ///< valid padding, stride 1; weights [out, in, kh, kw], bias [out]
  dense,    ///< weights [out, in], bias [out]
  scale,    ///< per-channel affine x * weights[c] + bias[c] on the last axis
  relu,
  flatten,
  softmax,
};

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

struct Layer {
  LayerKind kind = LayerKind::relu;
  Tensor weights;
  Tensor bias;

  static Layer conv2d(Tensor weights, Tensor bias);
  static Layer dense(Tensor weights, Tensor bias);
  static Layer scale(Tensor factors, Tensor shift);
  static Layer relu() { return {LayerKind::relu, {}, {}}; }
  static Layer flatten() { return {LayerKind::flatten, {}, {}}; }
  static Layer softmax() { return {LayerKind::softmax, {}, {}}; }

  bool has_parameters() const noexcept {
    return kind == LayerKind::conv2d || kind == LayerKind::dense || kind == LayerKind::scale;
  }
  /// Output shape for a given input shape; throws ShapeError.
  Shape output_shape(const Shape& input) const;
};

/// Ordered layer stack. Input tensors are [h, w, channels].
struct Model {
  std::string name;
  Shape input_shape;
  std::vector<Layer> layers;

  /// Shape after every layer; throws ShapeError on the first inconsistency.
  std::vector<Shape> shape_chain() const;
  Shape output_shape() const { return shape_chain().back(); }
  std::size_t class_count() const;
  bool ends_in_softmax() const { return !layers.empty() && layers.back().kind == LayerKind::softmax; }
  std::size_t parameter_count() const;
};

Tensor conv2d_forward(const Tensor& input, const Layer& layer, const ExecProfile& profile);
Tensor dense_forward(const Tensor& input, const Layer& layer, const ExecProfile& profile);
Tensor scale_forward(const Tensor& input, const Layer& layer);
Tensor relu_forward(const Tensor& input);

/// Max-subtracted softmax over a rank-1 tensor; the sum of exponentials uses
/// the profile's reduction.
Tensor softmax(const Tensor& v, const ExecProfile& profile);

Tensor layer_forward(const Tensor& input, const Layer& layer, const ExecProfile& profile);

/// Output of the whole stack (confidences for classifiers).
Tensor forward(const Model& model, const Tensor& input, const ExecProfile& profile);

/// Every intermediate activation, starting with the input.
std::vector<Tensor> forward_trace(const Model& model, const Tensor& input, const ExecProfile& profile);

std::size_t predict_label(const Model& model, const Tensor& input, const ExecProfile& profile);

/// Reverse-mode gradients of the cross-entropy loss -log p[target].
struct Gradients {
  Tensor input;
  std::vector<Tensor> weights;  ///< per layer; empty tensor for parameterless layers
  std::vector<Tensor> bias;
  Tensor output;  ///< softmax output of the forward pass
  float loss = 0.0f;
};

/// Requires a final softmax layer. The forward pass runs under `profile`;
/// backward arithmetic is sequential binary32.
Gradients backprop(const Model& model, const Tensor& input, std::size_t target, const ExecProfile& profile,
                   bool parameter_gradients = true);

Tensor input_gradient(const Model& model, const Tensor& input, std::size_t target, const ExecProfile& profile);

// --- mock models -----------------------------------------------------------

enum class MockVariant { mlp, conv1, conv2 };

/// Untrained, seeded models of increasing complexity. Weights and biases are
/// uniform in [-0.5, 0.5) from SplitMix64(seed), drawn layer by layer in
/// storage order. Convolutional mocks use no activation and output the
/// flattened final feature map.
struct MockSpec {
  MockVariant variant = MockVariant::conv2;
  std::size_t filters = 1;  ///< conv2 only: 1 or 2
  std::size_t kernel = 3;   ///< conv2 only: 2, 3 or 4
  std::uint64_t seed = 0;

  static MockSpec mlp(std::uint64_t seed = 0) { return {MockVariant::mlp, 0, 0, seed}; }
  static MockSpec conv1(std::uint64_t seed = 0) { return {MockVariant::conv1, 32, 3, seed}; }
  static MockSpec conv2(std::size_t filters, std::size_t kernel, std::uint64_t seed = 0) {
    return {MockVariant::conv2, filters, kernel, seed};
  }

  /// "mlp", "conv1", "conv2-1x2x2", ...
  std::string name() const;
  static MockSpec parse(std::string_view name, std::uint64_t seed = 0);
};

inline constexpr std::size_t kMnistSide = 28;

/// mlp: flatten, dense 784->32, relu, dense 32->10.
/// conv1: one conv layer, 32 filters 3x3.
/// conv2: two conv layers of `filters` filters, kernel x kernel.
Model build_mock(const MockSpec& spec, Shape input_shape = {kMnistSide, kMnistSide, 1});

/// The default mock list for complexity sweeps: mlp, conv1, and conv2 with
/// 1x2x2, 1x3x3, 1x4x4, 2x4x4.
std::vector<MockSpec> default_sweep_specs(std::uint64_t seed = 0);

// --- trainable classifiers -------------------------------------------------

/// conv 4@5x5, relu, conv 8@3x3, relu, flatten, dense -> classes, softmax.
/// Uniform fan-in scaled initialisation from SplitMix64(seed).
Model build_toy_cnn(const Shape& input_shape, std::size_t classes, std::uint64_t seed);

/// flatten, dense -> hidden, relu, dense -> classes, softmax.
Model build_toy_mlp(const Shape& input_shape, std::size_t hidden, std::size_t classes, std::uint64_t seed);

struct Dataset {
  std::vector<Tensor> images;
  std::vector<std::size_t> labels;

  std::size_t size() const { return images.size(); }
};

struct TrainOptions {
  std::size_t epochs = 1;
  float learning_rate = 0.01f;
  std::uint64_t seed = 0;
  std::size_t batch_size = 8;
};

/// Mini-batch SGD on cross-entropy under the seq32 profile. Sample order is a
/// SplitMix64 Fisher-Yates shuffle per epoch.
Model train_small(Model model, const Dataset& data, const TrainOptions& options);

double accuracy(const Model& model, const Dataset& data, const ExecProfile& profile);

}  // namespace fnns
