#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fnns {

enum class ReductionOrder {
  sequential,  ///< left-to-right
  blocked,     ///< `block_size` interleaved lanes, lanes combined left-to-right
  pairwise,    ///< recursive halving, left half has floor(n/2) elements
};

enum class Accumulator {
  f32,          ///< every partial sum rounded to binary32
  f64,          ///< products and partial sums in binary64, one final rounding
  compensated,  ///< binary32 Kahan summation
};

/// One simulated execution environment: the order, fusion and accumulator
/// width used by every reduction inside the engine.
///
/// `fma` fuses each multiply into the running accumulator with a single
/// rounding to binary32 (emulated in binary64, so hosts without FMA hardware
/// produce the same bits). It applies to the sequential and blocked orders;
/// pairwise leaves are rounded products.
struct ExecProfile {
  std::string id;
  ReductionOrder order = ReductionOrder::sequential;
  std::size_t block_size = 1;
  bool fma = false;
  Accumulator accumulator = Accumulator::f32;
  std::string description;
};

/// The closed built-in registry, in stable order:
/// seq32, blk4, blk8, pairwise, kahan, fma, acc64.
const std::vector<ExecProfile>& list_profiles();

/// Registry lookup; throws LookupError naming the valid ids.
const ExecProfile& find_profile(std::string_view id);

/// Comma-separated registry ids, for diagnostics.
std::string profile_ids();

/// Position of `id` in the registry, or registry size when unknown.
std::size_t profile_rank(std::string_view id);

float reduce_sum(std::span<const float> v, const ExecProfile& profile);

/// Inner product; throws ShapeError on length mismatch.
float dot(std::span<const float> a, std::span<const float> b, const ExecProfile& profile);

}  // namespace fnns
