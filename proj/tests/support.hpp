#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fnns/rng.hpp"
#include "fnns/tensor.hpp"

namespace fnns::test {

inline Tensor random_tensor(Shape shape, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f) {
  SplitMix64 rng(seed);
  std::vector<float> v(element_count(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

inline std::vector<float> random_vector(std::size_t n, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f) {
  SplitMix64 rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline std::filesystem::path data_dir() { return FNNS_DATA_DIR; }
inline std::filesystem::path golden_dir() { return FNNS_GOLDEN_DIR; }
inline std::filesystem::path fixture_dir() { return FNNS_FIXTURE_DIR; }

/// Fresh per-test scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::path(FNNS_SCRATCH_DIR) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fnns::test
