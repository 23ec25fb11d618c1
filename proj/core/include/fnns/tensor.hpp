#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fnns {

using Shape = std::vector<std::size_t>;

/// Number of elements described by a shape. The empty shape is a scalar.
std::size_t element_count(const Shape& shape);

std::string shape_to_string(const Shape& shape);

/// Dense row-major single-precision tensor. All bit-exact comparison in the
/// toolkit happens on this type.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<float> data);

  /// Rank-1 tensor holding `values`.
  static Tensor vector(std::initializer_list<float> values);
  static Tensor vector(std::vector<float> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  /// Same data, new shape with equal element count.
  Tensor reshaped(Shape shape) const;

 private:
  Shape shape_;
  std::vector<float> data_;
};

/// True iff shapes match and every element pair has an identical bit pattern.
/// +0.0 and -0.0 compare unequal; NaNs compare by payload.
bool bit_equal(const Tensor& a, const Tensor& b) noexcept;

/// SHA-256 of the little-endian element bytes, row-major.
struct OutputDigest {
  std::array<std::uint8_t, 32> bytes{};

  std::string hex() const;
  static OutputDigest from_hex(std::string_view hex);

  friend bool operator==(const OutputDigest&, const OutputDigest&) = default;
  friend auto operator<=>(const OutputDigest&, const OutputDigest&) = default;
};

OutputDigest digest(const Tensor& t);

/// Incremental digest over a sequence of tensors (used for plan fingerprints).
class DigestBuilder {
 public:
  DigestBuilder();
  ~DigestBuilder();

  void update(std::span<const float> values);
  OutputDigest finish();

 private:
  struct State;
  std::unique_ptr<State> state_;
};

/// Index of the largest element; ties resolve to the lowest index.
std::size_t argmax(std::span<const float> v);
inline std::size_t argmax(const Tensor& v) { return argmax(v.data()); }

struct TopTwo {
  std::size_t label = 0;
  std::size_t second_label = 0;
  float top = 0.0f;
  float second = 0.0f;
  /// top - second, evaluated in single precision.
  float gap = 0.0f;
};

TopTwo top2_gap(std::span<const float> v);
inline TopTwo top2_gap(const Tensor& v) { return top2_gap(v.data()); }

/// Bit pattern helpers.
std::uint32_t float_bits(float x) noexcept;
float bits_float(std::uint32_t bits) noexcept;

}  // namespace fnns
