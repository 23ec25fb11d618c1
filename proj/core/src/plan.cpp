#include "fnns/plan.hpp"

#include <array>
#include <cmath>

#include "fnns/error.hpp"
#include "fnns/rng.hpp"

namespace fnns {

namespace {

bool is_affine(LayerKind k) { return k == LayerKind::conv2d || k == LayerKind::dense; }

bool foldable_pair(const Layer& a, const Layer& b) {
  if (b.kind == LayerKind::scale) return is_affine(a.kind) || a.kind == LayerKind::scale;
  return a.kind == LayerKind::dense && b.kind == LayerKind::dense;
}

// x * s + t as a two-term reduction under the plan profile.
float fused_affine(float x, float s, float t, const ExecProfile& p) {
  const std::array<float, 2> lhs{x, t};
  const std::array<float, 2> rhs{s, 1.0f};
  return dot(lhs, rhs, p);
}

float product(float x, float s, const ExecProfile& p) {
  const std::array<float, 1> lhs{x};
  const std::array<float, 1> rhs{s};
  return dot(lhs, rhs, p);
}

Layer fold_scale_into(const Layer& producer, const Layer& scale, const ExecProfile& p) {
  const std::size_t out = producer.bias.size();
  if (scale.weights.size() != out) throw ShapeError("scale does not match producer channels");
  Tensor w = producer.weights;
  Tensor b = producer.bias;
  if (producer.kind == LayerKind::scale) {
    for (std::size_t o = 0; o < out; ++o) {
      w[o] = product(producer.weights[o], scale.weights[o], p);
      b[o] = fused_affine(producer.bias[o], scale.weights[o], scale.bias[o], p);
    }
    return Layer::scale(std::move(w), std::move(b));
  }
  const std::size_t per_out = w.size() / out;
  for (std::size_t o = 0; o < out; ++o) {
    for (std::size_t k = 0; k < per_out; ++k) w[o * per_out + k] = product(w[o * per_out + k], scale.weights[o], p);
    b[o] = fused_affine(producer.bias[o], scale.weights[o], scale.bias[o], p);
  }
  return {producer.kind, std::move(w), std::move(b)};
}

Layer fold_dense_pair(const Layer& first, const Layer& second, const ExecProfile& p) {
  const std::size_t in = first.weights.shape()[1];
  const std::size_t mid = first.weights.shape()[0];
  const std::size_t out = second.weights.shape()[0];
  if (second.weights.shape()[1] != mid) throw ShapeError("dense pair does not chain");
  Tensor w({out, in});
  Tensor b({out});
  std::vector<float> column(mid);
  for (std::size_t i = 0; i < in; ++i) {
    for (std::size_t m = 0; m < mid; ++m) column[m] = first.weights[m * in + i];
    for (std::size_t o = 0; o < out; ++o) w[o * in + i] = dot(second.weights.data().subspan(o * mid, mid), column, p);
  }
  for (std::size_t o = 0; o < out; ++o) {
    b[o] = dot(second.weights.data().subspan(o * mid, mid), first.bias.data(), p) + second.bias[o];
  }
  return Layer::dense(std::move(w), std::move(b));
}

}  // namespace

bool has_foldable(const Model& model) {
  for (std::size_t i = 0; i + 1 < model.layers.size(); ++i) {
    if (foldable_pair(model.layers[i], model.layers[i + 1])) return true;
  }
  return false;
}

ComputePlan prepare_plan(const Model& model, const ExecProfile& plan_profile, float prune_threshold) {
  if (!(prune_threshold >= 0.0f)) throw std::invalid_argument("prune threshold must be nonnegative");
  model.shape_chain();

  std::vector<Layer> layers = model.layers;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
      const Layer& a = layers[i];
      const Layer& b = layers[i + 1];
      if (!foldable_pair(a, b)) continue;
      Layer merged = b.kind == LayerKind::scale ? fold_scale_into(a, b, plan_profile)
                                                : fold_dense_pair(a, b, plan_profile);
      layers[i] = std::move(merged);
      layers.erase(layers.begin() + static_cast<std::ptrdiff_t>(i) + 1);
      changed = true;
      break;
    }
  }

  if (prune_threshold > 0.0f) {
    for (auto& layer : layers) {
      if (!is_affine(layer.kind)) continue;
      for (auto& w : layer.weights.data()) {
        if (std::fabs(w) < prune_threshold) w = 0.0f;
      }
    }
  }

  ComputePlan plan;
  plan.source_model = model.name;
  plan.plan_profile = plan_profile.id;
  plan.prune_threshold = prune_threshold;
  plan.model.name = model.name;
  plan.model.input_shape = model.input_shape;
  plan.model.layers = std::move(layers);
  plan.model.shape_chain();
  return plan;
}

Tensor execute_plan(const ComputePlan& plan, const Tensor& input, const ExecProfile& exec_profile) {
  return forward(plan.model, input, exec_profile);
}

OutputDigest plan_digest(const ComputePlan& plan) {
  DigestBuilder b;
  for (const auto& layer : plan.model.layers) {
    b.update(layer.weights.data());
    b.update(layer.bias.data());
  }
  return b.finish();
}

Model build_foldable_model(std::uint64_t seed) {
  SplitMix64 rng(seed);
  auto fill = [&rng](Shape shape, float lo, float hi) {
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    return t;
  };
  Model m;
  m.name = "foldable-" + std::to_string(seed);
  m.input_shape = {12, 12, 1};
  m.layers.push_back(Layer::conv2d(fill({4, 1, 3, 3}, -0.5f, 0.5f), fill({4}, -0.5f, 0.5f)));
  m.layers.push_back(Layer::scale(fill({4}, 0.05f, 0.15f), fill({4}, -0.1f, 0.1f)));
  m.layers.push_back(Layer::relu());
  m.layers.push_back(Layer::flatten());
  m.layers.push_back(Layer::dense(fill({32, 400}, -0.1f, 0.1f), fill({32}, -0.1f, 0.1f)));
  m.layers.push_back(Layer::dense(fill({10, 32}, -0.5f, 0.5f), fill({10}, -0.1f, 0.1f)));
  m.layers.push_back(Layer::softmax());
  m.shape_chain();
  return m;
}

}  // namespace fnns
