#include "fnns/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fnns/error.hpp"
#include "fnns/rng.hpp"

namespace fnns {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::dense: return "dense";
    case LayerKind::scale: return "scale";
    case LayerKind::relu: return "relu";
    case LayerKind::flatten: return "flatten";
    case LayerKind::softmax: return "softmax";
  }
  return "?";
}

LayerKind layer_kind_from_string(std::string_view name) {
  for (auto k : {LayerKind::conv2d, LayerKind::dense, LayerKind::scale, LayerKind::relu, LayerKind::flatten,
                 LayerKind::softmax}) {
    if (to_string(k) == name) return k;
  }
  throw LookupError("unknown layer kind '" + std::string(name) + "'");
}

Layer Layer::conv2d(Tensor weights, Tensor bias) {
  if (weights.rank() != 4) throw ShapeError("conv2d weights must be [out, in, kh, kw]");
  if (bias.shape() != Shape{weights.shape()[0]}) throw ShapeError("conv2d bias must be [out]");
  return {LayerKind::conv2d, std::move(weights), std::move(bias)};
}

Layer Layer::dense(Tensor weights, Tensor bias) {
  if (weights.rank() != 2) throw ShapeError("dense weights must be [out, in]");
  if (bias.shape() != Shape{weights.shape()[0]}) throw ShapeError("dense bias must be [out]");
  return {LayerKind::dense, std::move(weights), std::move(bias)};
}

Layer Layer::scale(Tensor factors, Tensor shift) {
  if (factors.rank() != 1 || factors.shape() != shift.shape()) {
    throw ShapeError("scale factors and shift must be equal-length vectors");
  }
  return {LayerKind::scale, std::move(factors), std::move(shift)};
}

Shape Layer::output_shape(const Shape& in) const {
  auto fail = [&](const std::string& why) {
    return ShapeError(std::string(to_string(kind)) + ": " + why + " (input " + shape_to_string(in) + ")");
  };
  switch (kind) {
    case LayerKind::conv2d: {
      const auto& w = weights.shape();
      if (w.size() != 4 || bias.shape() != Shape{w[0]}) throw fail("malformed parameters");
      if (in.size() != 3) throw fail("expects [h, w, c]");
      if (in[2] != w[1]) throw fail("expects " + std::to_string(w[1]) + " input channels");
      if (in[0] < w[2] || in[1] < w[3]) throw fail("kernel larger than input");
      return {in[0] - w[2] + 1, in[1] - w[3] + 1, w[0]};
    }
    case LayerKind::dense: {
      const auto& w = weights.shape();
      if (w.size() != 2 || bias.shape() != Shape{w[0]}) throw fail("malformed parameters");
      if (in.size() != 1 || in[0] != w[1]) throw fail("expects [" + std::to_string(w[1]) + "]");
      return {w[0]};
    }
    case LayerKind::scale:
      if (weights.rank() != 1 || bias.shape() != weights.shape()) throw fail("malformed parameters");
      if (in.empty() || in.back() != weights.size()) throw fail("channel count mismatch");
      return in;
    case LayerKind::relu:
      return in;
    case LayerKind::flatten:
      return {element_count(in)};
    case LayerKind::softmax:
      if (in.size() != 1) throw fail("expects a vector");
      return in;
  }
  throw fail("unknown layer");
}

std::vector<Shape> Model::shape_chain() const {
  if (input_shape.empty()) throw ShapeError("model '" + name + "' has no input shape");
  std::vector<Shape> chain{input_shape};
  for (const auto& layer : layers) chain.push_back(layer.output_shape(chain.back()));
  return chain;
}

std::size_t Model::class_count() const { return element_count(output_shape()); }

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

// --- forward ---------------------------------------------------------------

Tensor conv2d_forward(const Tensor& input, const Layer& layer, const ExecProfile& profile) {
  if (layer.kind != LayerKind::conv2d) throw ShapeError("conv2d_forward: layer is not conv2d");
  const Shape out_shape = layer.output_shape(input.shape());
  const auto& w = layer.weights.shape();
  const std::size_t out_c = w[0], in_c = w[1], kh = w[2], kw = w[3];
  const std::size_t width = input.shape()[1];
  const std::size_t oh = out_shape[0], ow = out_shape[1];
  const std::size_t field = in_c * kh * kw;

  Tensor out(out_shape);
  std::vector<float> patch(field);
  auto x = input.data();
  auto k = layer.weights.data();
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t xo = 0; xo < ow; ++xo) {
      // Receptive field in kernel storage order [in, kh, kw].
      std::size_t n = 0;
      for (std::size_t c = 0; c < in_c; ++c)
        for (std::size_t dy = 0; dy < kh; ++dy)
          for (std::size_t dx = 0; dx < kw; ++dx) patch[n++] = x[((y + dy) * width + (xo + dx)) * in_c + c];
      for (std::size_t o = 0; o < out_c; ++o) {
        out[(y * ow + xo) * out_c + o] = dot(patch, k.subspan(o * field, field), profile) + layer.bias[o];
      }
    }
  }
  return out;
}

Tensor dense_forward(const Tensor& input, const Layer& layer, const ExecProfile& profile) {
  if (layer.kind != LayerKind::dense) throw ShapeError("dense_forward: layer is not dense");
  const Shape out_shape = layer.output_shape(input.shape());
  const std::size_t in = input.size();
  Tensor out(out_shape);
  auto w = layer.weights.data();
  for (std::size_t o = 0; o < out_shape[0]; ++o) {
    out[o] = dot(input.data(), w.subspan(o * in, in), profile) + layer.bias[o];
  }
  return out;
}

Tensor scale_forward(const Tensor& input, const Layer& layer) {
  layer.output_shape(input.shape());
  Tensor out(input.shape());
  const std::size_t c = layer.weights.size();
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] * layer.weights[i % c] + layer.bias[i % c];
  return out;
}

Tensor relu_forward(const Tensor& input) {
  Tensor out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0f ? input[i] : 0.0f;
  return out;
}

Tensor softmax(const Tensor& v, const ExecProfile& profile) {
  if (v.rank() != 1) throw ShapeError("softmax expects a vector, got " + shape_to_string(v.shape()));
  const float m = *std::max_element(v.data().begin(), v.data().end());
  Tensor e(v.shape());
  for (std::size_t i = 0; i < v.size(); ++i) e[i] = std::exp(v[i] - m);
  const float total = reduce_sum(e.data(), profile);
  for (std::size_t i = 0; i < e.size(); ++i) e[i] /= total;
  return e;
}

Tensor layer_forward(const Tensor& input, const Layer& layer, const ExecProfile& profile) {
  switch (layer.kind) {
    case LayerKind::conv2d: return conv2d_forward(input, layer, profile);
    case LayerKind::dense: return dense_forward(input, layer, profile);
    case LayerKind::scale: return scale_forward(input, layer);
    case LayerKind::relu: return relu_forward(input);
    case LayerKind::flatten: return input.reshaped({input.size()});
    case LayerKind::softmax: return softmax(input, profile);
  }
  throw ShapeError("unknown layer kind");
}

namespace {

void check_input(const Model& model, const Tensor& input) {
  if (input.shape() != model.input_shape) {
    throw ShapeError("model '" + model.name + "' expects input " + shape_to_string(model.input_shape) + ", got " +
                     shape_to_string(input.shape()));
  }
}

}  // namespace

Tensor forward(const Model& model, const Tensor& input, const ExecProfile& profile) {
  check_input(model, input);
  Tensor x = input;
  for (const auto& layer : model.layers) x = layer_forward(x, layer, profile);
  return x;
}

std::vector<Tensor> forward_trace(const Model& model, const Tensor& input, const ExecProfile& profile) {
  check_input(model, input);
  std::vector<Tensor> acts{input};
  acts.reserve(model.layers.size() + 1);
  for (const auto& layer : model.layers) acts.push_back(layer_forward(acts.back(), layer, profile));
  return acts;
}

std::size_t predict_label(const Model& model, const Tensor& input, const ExecProfile& profile) {
  return argmax(forward(model, input, profile));
}

// --- backward --------------------------------------------------------------

namespace {

Tensor conv2d_backward(const Tensor& input, const Layer& layer, const Tensor& grad_out, Tensor* grad_w,
                       Tensor* grad_b) {
  const auto& w = layer.weights.shape();
  const std::size_t out_c = w[0], in_c = w[1], kh = w[2], kw = w[3];
  const std::size_t width = input.shape()[1];
  const std::size_t oh = grad_out.shape()[0], ow = grad_out.shape()[1];
  const std::size_t field = in_c * kh * kw;

  Tensor grad_in(input.shape());
  auto x = input.data();
  auto k = layer.weights.data();
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t xo = 0; xo < ow; ++xo) {
      for (std::size_t o = 0; o < out_c; ++o) {
        const float g = grad_out[(y * ow + xo) * out_c + o];
        if (grad_b) (*grad_b)[o] += g;
        std::size_t n = 0;
        for (std::size_t c = 0; c < in_c; ++c)
          for (std::size_t dy = 0; dy < kh; ++dy)
            for (std::size_t dx = 0; dx < kw; ++dx, ++n) {
              const std::size_t xi = ((y + dy) * width + (xo + dx)) * in_c + c;
              grad_in[xi] += k[o * field + n] * g;
              if (grad_w) (*grad_w)[o * field + n] += x[xi] * g;
            }
      }
    }
  }
  return grad_in;
}

Tensor dense_backward(const Tensor& input, const Layer& layer, const Tensor& grad_out, Tensor* grad_w,
                      Tensor* grad_b) {
  const std::size_t in = input.size();
  Tensor grad_in(input.shape());
  auto w = layer.weights.data();
  for (std::size_t o = 0; o < grad_out.size(); ++o) {
    const float g = grad_out[o];
    if (grad_b) (*grad_b)[o] += g;
    for (std::size_t i = 0; i < in; ++i) {
      grad_in[i] += w[o * in + i] * g;
      if (grad_w) (*grad_w)[o * in + i] += input[i] * g;
    }
  }
  return grad_in;
}

Tensor scale_backward(const Tensor& input, const Layer& layer, const Tensor& grad_out, Tensor* grad_w,
                      Tensor* grad_b) {
  const std::size_t c = layer.weights.size();
  Tensor grad_in(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    grad_in[i] = grad_out[i] * layer.weights[i % c];
    if (grad_w) (*grad_w)[i % c] += grad_out[i] * input[i];
    if (grad_b) (*grad_b)[i % c] += grad_out[i];
  }
  return grad_in;
}

}  // namespace

Gradients backprop(const Model& model, const Tensor& input, std::size_t target, const ExecProfile& profile,
                   bool parameter_gradients) {
  if (!model.ends_in_softmax()) throw ShapeError("gradient needs a model ending in softmax");
  const auto acts = forward_trace(model, input, profile);
  const Tensor& probs = acts.back();
  if (target >= probs.size()) {
    throw std::out_of_range("target label " + std::to_string(target) + " out of range for " +
                            std::to_string(probs.size()) + " classes");
  }

  Gradients g;
  g.loss = -std::log(std::max(probs[target], std::numeric_limits<float>::min()));
  const std::size_t n = model.layers.size();
  g.weights.resize(n);
  g.bias.resize(n);

  // d(-log p_t)/dz = p - onehot(t) for the logits z entering the softmax.
  Tensor grad = probs;
  grad[target] -= 1.0f;

  for (std::size_t li = n - 1; li-- > 0;) {
    const Layer& layer = model.layers[li];
    const Tensor& in = acts[li];
    Tensor* gw = nullptr;
    Tensor* gb = nullptr;
    if (parameter_gradients && layer.has_parameters()) {
      g.weights[li] = Tensor(layer.weights.shape());
      g.bias[li] = Tensor(layer.bias.shape());
      gw = &g.weights[li];
      gb = &g.bias[li];
    }
    switch (layer.kind) {
      case LayerKind::conv2d: grad = conv2d_backward(in, layer, grad, gw, gb); break;
      case LayerKind::dense: grad = dense_backward(in, layer, grad, gw, gb); break;
      case LayerKind::scale: grad = scale_backward(in, layer, grad, gw, gb); break;
      case LayerKind::relu:
        for (std::size_t i = 0; i < grad.size(); ++i)
          if (!(in[i] > 0.0f)) grad[i] = 0.0f;
        break;
      case LayerKind::flatten: grad = grad.reshaped(in.shape()); break;
      case LayerKind::softmax: throw ShapeError("softmax is only supported as the final layer");
    }
  }
  g.input = std::move(grad);
  g.output = probs;
  return g;
}

Tensor input_gradient(const Model& model, const Tensor& input, std::size_t target, const ExecProfile& profile) {
  return backprop(model, input, target, profile, false).input;
}

// --- mocks -----------------------------------------------------------------

namespace {

Tensor uniform_tensor(Shape shape, SplitMix64& rng, float lo, float hi) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

Layer mock_conv(std::size_t out, std::size_t in, std::size_t k, SplitMix64& rng) {
  auto w = uniform_tensor({out, in, k, k}, rng, -0.5f, 0.5f);
  auto b = uniform_tensor({out}, rng, -0.5f, 0.5f);
  return Layer::conv2d(std::move(w), std::move(b));
}

Layer mock_dense(std::size_t out, std::size_t in, SplitMix64& rng) {
  auto w = uniform_tensor({out, in}, rng, -0.5f, 0.5f);
  auto b = uniform_tensor({out}, rng, -0.5f, 0.5f);
  return Layer::dense(std::move(w), std::move(b));
}

}  // namespace

std::string MockSpec::name() const {
  switch (variant) {
    case MockVariant::mlp: return "mlp";
    case MockVariant::conv1: return "conv1";
    case MockVariant::conv2:
      return "conv2-" + std::to_string(filters) + "x" + std::to_string(kernel) + "x" + std::to_string(kernel);
  }
  return "?";
}

MockSpec MockSpec::parse(std::string_view name, std::uint64_t seed) {
  if (name == "mlp") return mlp(seed);
  if (name == "conv1") return conv1(seed);
  // conv2-FxKxK
  if (name.size() == 11 && name.substr(0, 6) == "conv2-" && name[7] == 'x' && name[9] == 'x' &&
      name[8] == name[10]) {
    const int f = name[6] - '0';
    const int k = name[8] - '0';
    if ((f == 1 || f == 2) && k >= 2 && k <= 4) return conv2(f, k, seed);
  }
  throw LookupError("unknown mock variant '" + std::string(name) +
                    "' (valid: mlp, conv1, conv2-FxKxK with F in {1,2}, K in {2,3,4})");
}

Model build_mock(const MockSpec& spec, Shape input_shape) {
  SplitMix64 rng(spec.seed);
  Model m;
  m.name = "mock-" + spec.name();
  m.input_shape = std::move(input_shape);
  if (m.input_shape.size() != 3) throw ShapeError("mock models take [h, w, c] inputs");
  const std::size_t channels = m.input_shape[2];
  switch (spec.variant) {
    case MockVariant::mlp:
      m.layers.push_back(Layer::flatten());
      m.layers.push_back(mock_dense(32, element_count(m.input_shape), rng));
      m.layers.push_back(Layer::relu());
      m.layers.push_back(mock_dense(10, 32, rng));
      break;
    case MockVariant::conv1:
      m.layers.push_back(mock_conv(32, channels, 3, rng));
      m.layers.push_back(Layer::flatten());
      break;
    case MockVariant::conv2:
      if (spec.filters < 1 || spec.filters > 2 || spec.kernel < 2 || spec.kernel > 4) {
        throw LookupError("unknown mock variant '" + spec.name() + "'");
      }
      m.layers.push_back(mock_conv(spec.filters, channels, spec.kernel, rng));
      m.layers.push_back(mock_conv(spec.filters, spec.filters, spec.kernel, rng));
      m.layers.push_back(Layer::flatten());
      break;
  }
  m.shape_chain();
  return m;
}

std::vector<MockSpec> default_sweep_specs(std::uint64_t seed) {
  return {MockSpec::mlp(seed),         MockSpec::conv1(seed),       MockSpec::conv2(1, 2, seed),
          MockSpec::conv2(1, 3, seed), MockSpec::conv2(1, 4, seed), MockSpec::conv2(2, 4, seed)};
}

// --- trainable models ------------------------------------------------------

namespace {

Layer init_conv(std::size_t out, std::size_t in, std::size_t k, SplitMix64& rng) {
  const float a = std::sqrt(6.0f / static_cast<float>(in * k * k));
  return Layer::conv2d(uniform_tensor({out, in, k, k}, rng, -a, a), Tensor({out}));
}

Layer init_dense(std::size_t out, std::size_t in, SplitMix64& rng) {
  const float a = std::sqrt(6.0f / static_cast<float>(in));
  return Layer::dense(uniform_tensor({out, in}, rng, -a, a), Tensor({out}));
}

}  // namespace

Model build_toy_cnn(const Shape& input_shape, std::size_t classes, std::uint64_t seed) {
  if (input_shape.size() != 3) throw ShapeError("toy CNN takes [h, w, c] inputs");
  SplitMix64 rng(seed);
  Model m;
  m.name = "toy-cnn";
  m.input_shape = input_shape;
  m.layers.push_back(init_conv(4, input_shape[2], 5, rng));
  m.layers.push_back(Layer::relu());
  m.layers.push_back(init_conv(8, 4, 3, rng));
  m.layers.push_back(Layer::relu());
  m.layers.push_back(Layer::flatten());
  const auto flat = m.shape_chain().back()[0];
  m.layers.push_back(init_dense(classes, flat, rng));
  m.layers.push_back(Layer::softmax());
  m.shape_chain();
  return m;
}

Model build_toy_mlp(const Shape& input_shape, std::size_t hidden, std::size_t classes, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Model m;
  m.name = "toy-mlp";
  m.input_shape = input_shape;
  m.layers.push_back(Layer::flatten());
  m.layers.push_back(init_dense(hidden, element_count(input_shape), rng));
  m.layers.push_back(Layer::relu());
  m.layers.push_back(init_dense(classes, hidden, rng));
  m.layers.push_back(Layer::softmax());
  m.shape_chain();
  return m;
}

// --- training --------------------------------------------------------------

Model train_small(Model model, const Dataset& data, const TrainOptions& options) {
  if (data.size() == 0) throw std::invalid_argument("train_small: empty dataset");
  if (data.labels.size() != data.images.size()) throw std::invalid_argument("train_small: label count mismatch");
  if (options.batch_size == 0) throw std::invalid_argument("train_small: batch size must be positive");
  const ExecProfile& profile = find_profile("seq32");
  SplitMix64 rng(options.seed);

  std::vector<std::size_t> order(data.size());
  const std::size_t n_layers = model.layers.size();
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      std::vector<Tensor> sum_w(n_layers), sum_b(n_layers);
      for (std::size_t li = 0; li < n_layers; ++li) {
        if (!model.layers[li].has_parameters()) continue;
        sum_w[li] = Tensor(model.layers[li].weights.shape());
        sum_b[li] = Tensor(model.layers[li].bias.shape());
      }
      for (std::size_t s = start; s < end; ++s) {
        const auto idx = order[s];
        const auto g = backprop(model, data.images[idx], data.labels[idx], profile, true);
        for (std::size_t li = 0; li < n_layers; ++li) {
          if (!model.layers[li].has_parameters()) continue;
          for (std::size_t k = 0; k < sum_w[li].size(); ++k) sum_w[li][k] += g.weights[li][k];
          for (std::size_t k = 0; k < sum_b[li].size(); ++k) sum_b[li][k] += g.bias[li][k];
        }
      }
      const float rate = options.learning_rate / static_cast<float>(end - start);
      auto apply = [rate](Tensor& param, const Tensor& grad) {
        for (std::size_t k = 0; k < param.size(); ++k) {
          const float step = rate * grad[k];
          // Skipping zero steps keeps signed zeros intact when the rate is 0.
          if (step != 0.0f) param[k] -= step;
        }
      };
      for (std::size_t li = 0; li < n_layers; ++li) {
        if (!model.layers[li].has_parameters()) continue;
        apply(model.layers[li].weights, sum_w[li]);
        apply(model.layers[li].bias, sum_b[li]);
      }
    }
  }
  return model;
}

double accuracy(const Model& model, const Dataset& data, const ExecProfile& profile) {
  if (data.size() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) hits += predict_label(model, data.images[i], profile) == data.labels[i];
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace fnns
