#include "fnns/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "fnns/error.hpp"

namespace fnns {

namespace {

bool all_finite(const Tensor& t) {
  return std::all_of(t.data().begin(), t.data().end(), [](float v) { return std::isfinite(v); });
}

}  // namespace

Tensor fgsm_step(const Tensor& x, const Tensor& grad, float alpha, float delta_conf, int direction, float clip_min,
                 float clip_max) {
  if (x.shape() != grad.shape()) {
    throw ShapeError("fgsm_step: sample " + shape_to_string(x.shape()) + " vs gradient " +
                     shape_to_string(grad.shape()));
  }
  if (delta_conf < 0.0f) throw std::invalid_argument("fgsm_step: delta_conf must be nonnegative");
  if (direction != 1 && direction != -1) throw std::invalid_argument("fgsm_step: direction must be +1 or -1");
  const float step = static_cast<float>(direction) * alpha * delta_conf;
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float g = grad[i];
    const float s = g > 0.0f ? 1.0f : (g < 0.0f ? -1.0f : 0.0f);
    out[i] = std::clamp(x[i] + s * step, clip_min, clip_max);
  }
  return out;
}

double psnr(const Tensor& a, const Tensor& b, double peak) {
  if (a.shape() != b.shape()) {
    throw ShapeError("psnr: shapes " + shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()));
  }
  if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be positive");
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    se += d * d;
  }
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = se / static_cast<double>(a.size());
  return 10.0 * std::log10(peak * peak / mse);
}

bool operator==(const ProfilePrediction& a, const ProfilePrediction& b) {
  return a.profile == b.profile && a.label == b.label && float_bits(a.confidence) == float_bits(b.confidence) &&
         float_bits(a.second_confidence) == float_bits(b.second_confidence) && float_bits(a.gap) == float_bits(b.gap);
}

std::vector<ProfilePrediction> flip_matrix(const Tensor& sample, const Model& model,
                                           const std::vector<ExecProfile>& profiles) {
  std::vector<ProfilePrediction> table;
  for (const auto& p : profiles) {
    const Tensor out = forward(model, sample, p);
    const TopTwo t = top2_gap(out);
    table.push_back({p.id, t.label, t.top, t.second, t.gap});
  }
  return table;
}

bool has_flip(const std::vector<ProfilePrediction>& table) {
  std::set<std::size_t> labels;
  for (const auto& row : table) labels.insert(row.label);
  return labels.size() >= 2;
}

BoundaryResult generate_boundary(const Model& model, const Tensor& x_in, const BoundaryParams& params,
                                 const ExecProfile& gen_profile, const std::vector<ExecProfile>& eval_profiles) {
  if (!model.ends_in_softmax()) throw std::invalid_argument("generate_boundary: model must end in softmax");
  if (!(params.alpha > 0.0f) || !(params.gap_threshold > 0.0f) || params.max_iter == 0) {
    throw std::invalid_argument("generate_boundary: alpha, gap threshold and max_iter must be positive");
  }
  if (!all_finite(x_in)) throw std::domain_error("generate_boundary: input contains non-finite values");

  BoundaryResult r;
  r.original_label = predict_label(model, x_in, gen_profile);
  Tensor x = x_in;
  for (std::size_t i = 0; i < params.max_iter; ++i) {
    // Gradient at the previous iterate; its forward pass also provides delta_conf.
    const Gradients g = backprop(model, x, r.original_label, gen_profile, false);
    if (!all_finite(g.output) || !all_finite(g.input)) {
      throw std::domain_error("generate_boundary: non-finite forward or gradient at iteration " +
                              std::to_string(i));
    }
    const TopTwo top = top2_gap(g.output);
    if (top.gap < params.gap_threshold) break;
    const int direction = top.label == r.original_label ? 1 : -1;
    r.trace.push_back({top.label, top.gap, direction});
    x = fgsm_step(x, g.input, params.alpha, top.gap, direction, params.clip_min, params.clip_max);
    ++r.iterations;
  }

  r.final_gap = top2_gap(forward(model, x, gen_profile)).gap;
  r.predictions = flip_matrix(x, model, eval_profiles);
  r.flipped = has_flip(r.predictions);
  r.psnr_db = psnr(x_in, x);
  r.sample = std::move(x);
  return r;
}

}  // namespace fnns
