#include "fnns/tensor.hpp"

#include <openssl/evp.h>

#include <bit>
#include <functional>
#include <numeric>
#include <sstream>

#include "fnns/error.hpp"

namespace fnns {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape) : Tensor(shape, std::vector<float>(element_count(shape), 0.0f)) {}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_to_string(shape_));
  }
  if (data_.size() != element_count(shape_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_to_string(shape_));
  }
}

Tensor Tensor::vector(std::initializer_list<float> values) { return vector(std::vector<float>(values)); }

Tensor Tensor::vector(std::vector<float> values) {
  Shape shape{values.size()};
  return Tensor(std::move(shape), std::move(values));
}

Tensor Tensor::reshaped(Shape shape) const {
  if (element_count(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

std::uint32_t float_bits(float x) noexcept { return std::bit_cast<std::uint32_t>(x); }
float bits_float(std::uint32_t bits) noexcept { return std::bit_cast<float>(bits); }

bool bit_equal(const Tensor& a, const Tensor& b) noexcept {
  if (a.shape() != b.shape()) return false;
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (float_bits(x[i]) != float_bits(y[i])) return false;
  }
  return true;
}

namespace {

constexpr char kHexDigits[] = "0123456789abcdef";

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

void append_le(std::vector<unsigned char>& out, std::span<const float> values) {
  for (float v : values) {
    auto bits = float_bits(v);
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<unsigned char>(bits >> (8 * k)));
  }
}

}  // namespace

std::string OutputDigest::hex() const {
  std::string s;
  s.reserve(64);
  for (auto b : bytes) {
    s.push_back(kHexDigits[b >> 4]);
    s.push_back(kHexDigits[b & 0xF]);
  }
  return s;
}

OutputDigest OutputDigest::from_hex(std::string_view hex) {
  if (hex.size() != 64) throw FormatError("digest must be 64 lowercase hex characters");
  OutputDigest d;
  for (std::size_t i = 0; i < 32; ++i) {
    int hi = hex_value(hex[2 * i]);
    int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw FormatError("digest contains a non-hex character");
    d.bytes[i] = static_cast<std::uint8_t>(hi << 4 | lo);
  }
  return d;
}

struct DigestBuilder::State {
  EVP_MD_CTX* ctx = nullptr;
  ~State() { EVP_MD_CTX_free(ctx); }
};

DigestBuilder::DigestBuilder() : state_(std::make_unique<State>()) {
  state_->ctx = EVP_MD_CTX_new();
  if (!state_->ctx || EVP_DigestInit_ex(state_->ctx, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 initialisation failed");
  }
}

DigestBuilder::~DigestBuilder() = default;

void DigestBuilder::update(std::span<const float> values) {
  std::vector<unsigned char> buf;
  buf.reserve(values.size() * 4);
  append_le(buf, values);
  if (!buf.empty()) EVP_DigestUpdate(state_->ctx, buf.data(), buf.size());
}

OutputDigest DigestBuilder::finish() {
  OutputDigest d;
  unsigned int len = 0;
  EVP_DigestFinal_ex(state_->ctx, d.bytes.data(), &len);
  return d;
}

OutputDigest digest(const Tensor& t) {
  DigestBuilder b;
  b.update(t.data());
  return b.finish();
}

std::size_t argmax(std::span<const float> v) {
  if (v.empty()) throw std::invalid_argument("empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

TopTwo top2_gap(std::span<const float> v) {
  if (v.size() < 2) throw std::invalid_argument("top2_gap needs at least 2 elements");
  TopTwo r;
  r.label = argmax(v);
  r.second_label = r.label == 0 ? 1 : 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i == r.label) continue;
    if (v[i] > v[r.second_label]) r.second_label = i;
  }
  r.top = v[r.label];
  r.second = v[r.second_label];
  r.gap = r.top - r.second;
  return r;
}

}  // namespace fnns
