#pragma once

#include <cstdint>
#include <string>

#include "fnns/arith.hpp"
#include "fnns/nn.hpp"
#include "fnns/tensor.hpp"

namespace fnns {

/// Prepared form of a model: constants folded under `plan_profile`, small
/// weights pruned, ready to run under any execution profile.
struct ComputePlan {
  std::string source_model;
  std::string plan_profile;
  float prune_threshold = 0.0f;
  /// Folded layer stack; executes with the ordinary engine.
  Model model;
};

/// Folds, to fixpoint:
///   conv2d|dense + scale  -> conv2d|dense   (w*s, b*s + t)
///   scale + scale         -> scale          (s1*s2, t1*s2 + t2)
///   dense + dense         -> dense          (W2*W1, W2*b1 + b2)
/// Every folded constant is computed with `plan_profile` arithmetic, so plans
/// prepared under different profiles may differ bitwise. Afterwards conv2d and
/// dense weights with |w| < prune_threshold become exactly 0.
ComputePlan prepare_plan(const Model& model, const ExecProfile& plan_profile, float prune_threshold = 0.0f);

/// True if the stack still contains one of the foldable patterns above.
bool has_foldable(const Model& model);

Tensor execute_plan(const ComputePlan& plan, const Tensor& input, const ExecProfile& exec_profile);

/// SHA-256 over every folded weight and bias tensor, in layer order.
OutputDigest plan_digest(const ComputePlan& plan);

/// Seeded classifier with foldable structure: conv 4@3x3, scale, relu,
/// flatten, dense 400->32, dense 32->10, softmax on 12x12x1 inputs.
Model build_foldable_model(std::uint64_t seed);

}  // namespace fnns
