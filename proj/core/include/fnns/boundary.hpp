#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fnns/arith.hpp"
#include "fnns/nn.hpp"
#include "fnns/tensor.hpp"

namespace fnns {

struct BoundaryParams {
  float alpha = 0.01f;
  /// Stop once the top-two confidence gap under the generating profile drops below this.
  float gap_threshold = 1e-8f;
  std::size_t max_iter = 300;
  float clip_min = 0.0f;
  float clip_max = 1.0f;
};

/// One row of a flip table: what a single environment predicts for a sample.
struct ProfilePrediction {
  std::string profile;
  std::size_t label = 0;
  float confidence = 0.0f;
  float second_confidence = 0.0f;
  float gap = 0.0f;
};

/// Field-wise, floats compared by bit pattern.
bool operator==(const ProfilePrediction& a, const ProfilePrediction& b);

struct BoundaryStep {
  std::size_t label = 0;  ///< prediction before the step
  float gap = 0.0f;       ///< delta_conf used by the step
  int direction = 1;      ///< +1 away from the original class, -1 back towards it
};

struct BoundaryResult {
  Tensor sample;
  std::size_t original_label = 0;
  std::size_t iterations = 0;
  /// Top-two gap of `sample` under the generating profile.
  float final_gap = 0.0f;
  std::vector<BoundaryStep> trace;
  std::vector<ProfilePrediction> predictions;
  double psnr_db = 0.0;
  bool flipped = false;
};

/// x + direction * alpha * delta_conf * sign(grad), clipped to [clip_min, clip_max].
/// sign(0) = 0. Throws ShapeError on shape mismatch.
Tensor fgsm_step(const Tensor& x, const Tensor& grad, float alpha, float delta_conf, int direction,
                 float clip_min = 0.0f, float clip_max = 1.0f);

/// Peak signal-to-noise ratio in dB; +inf for identical inputs.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

/// Label and top-two confidences of `sample` under each profile.
std::vector<ProfilePrediction> flip_matrix(const Tensor& sample, const Model& model,
                                           const std::vector<ExecProfile>& profiles);

/// True when the table holds at least two distinct labels.
bool has_flip(const std::vector<ProfilePrediction>& table);

/// Iterative FGSM damped by the top-two confidence gap. The step direction is
/// +1 while the generating profile still predicts the original label and -1
/// once the sample has crossed. The gradient is that of the cross-entropy at
/// the original label, evaluated at the previous iterate under `gen_profile`.
/// Stops when the gap falls below `gap_threshold` or after `max_iter` steps,
/// then evaluates the sample under every profile in `eval_profiles`.
BoundaryResult generate_boundary(const Model& model, const Tensor& x_in, const BoundaryParams& params,
                                 const ExecProfile& gen_profile, const std::vector<ExecProfile>& eval_profiles);

}  // namespace fnns
