#include "fnns/arith.hpp"

#include <algorithm>

#include "fnns/error.hpp"

namespace fnns {

namespace {

std::vector<ExecProfile> make_registry() {
  std::vector<ExecProfile> r;
  r.push_back({"seq32", ReductionOrder::sequential, 1, false, Accumulator::f32,
               "sequential binary32 accumulation, multiply rounded before add"});
  r.push_back({"blk4", ReductionOrder::blocked, 4, false, Accumulator::f32,
               "4 interleaved binary32 lanes (128-bit SIMD), lanes summed in order"});
  r.push_back({"blk8", ReductionOrder::blocked, 8, false, Accumulator::f32,
               "8 interleaved binary32 lanes (256-bit SIMD), lanes summed in order"});
  r.push_back({"pairwise", ReductionOrder::pairwise, 1, false, Accumulator::f32,
               "recursive pairwise binary32 summation"});
  r.push_back({"kahan", ReductionOrder::sequential, 1, false, Accumulator::compensated,
               "sequential Kahan-compensated binary32 summation"});
  r.push_back({"fma", ReductionOrder::sequential, 1, true, Accumulator::f32,
               "sequential fused multiply-add, one rounding per step"});
  r.push_back({"acc64", ReductionOrder::sequential, 1, false, Accumulator::f64,
               "sequential binary64 accumulation, rounded once to binary32"});
  return r;
}

// Terms of a reduction: a[i] alone, or a[i]*b[i] when b is present.
struct Terms {
  std::span<const float> a;
  std::span<const float> b;

  std::size_t size() const { return a.size(); }
  // binary32 products are exact in binary64.
  double exact(std::size_t i) const {
    return b.empty() ? static_cast<double>(a[i]) : static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  float rounded(std::size_t i) const { return b.empty() ? a[i] : a[i] * b[i]; }
};

class Accum {
 public:
  explicit Accum(const ExecProfile& p) : kind_(p.accumulator), fma_(p.fma) {}

  void add(const Terms& t, std::size_t i) {
    switch (kind_) {
      case Accumulator::f64:
        wide_ += t.exact(i);
        break;
      case Accumulator::compensated: {
        const float y = t.rounded(i) - comp_;
        const float s = sum_ + y;
        comp_ = (s - sum_) - y;
        sum_ = s;
        break;
      }
      case Accumulator::f32:
        if (fma_) {
          sum_ = static_cast<float>(t.exact(i) + static_cast<double>(sum_));
        } else {
          sum_ += t.rounded(i);
        }
        break;
    }
  }

  double wide() const { return wide_; }
  float value() const { return kind_ == Accumulator::f64 ? static_cast<float>(wide_) : sum_; }

 private:
  Accumulator kind_;
  bool fma_;
  float sum_ = 0.0f;
  float comp_ = 0.0f;
  double wide_ = 0.0;
};

float sequential(const Terms& t, const ExecProfile& p) {
  Accum acc(p);
  for (std::size_t i = 0; i < t.size(); ++i) acc.add(t, i);
  return acc.value();
}

float blocked(const Terms& t, const ExecProfile& p) {
  const std::size_t lanes = std::max<std::size_t>(p.block_size, 1);
  std::vector<Accum> lane(lanes, Accum(p));
  for (std::size_t i = 0; i < t.size(); ++i) lane[i % lanes].add(t, i);
  if (p.accumulator == Accumulator::f64) {
    double total = 0.0;
    for (const auto& l : lane) total += l.wide();
    return static_cast<float>(total);
  }
  float total = 0.0f;
  for (const auto& l : lane) total += l.value();
  return total;
}

float pairwise32(const Terms& t, std::size_t lo, std::size_t n) {
  if (n == 1) return t.rounded(lo);
  const std::size_t half = n / 2;
  return pairwise32(t, lo, half) + pairwise32(t, lo + half, n - half);
}

double pairwise64(const Terms& t, std::size_t lo, std::size_t n) {
  if (n == 1) return t.exact(lo);
  const std::size_t half = n / 2;
  return pairwise64(t, lo, half) + pairwise64(t, lo + half, n - half);
}

float reduce(const Terms& t, const ExecProfile& p) {
  if (t.size() == 0) return 0.0f;
  switch (p.order) {
    case ReductionOrder::blocked:
      return blocked(t, p);
    case ReductionOrder::pairwise:
      return p.accumulator == Accumulator::f64 ? static_cast<float>(pairwise64(t, 0, t.size()))
                                               : pairwise32(t, 0, t.size());
    case ReductionOrder::sequential:
      break;
  }
  return sequential(t, p);
}

}  // namespace

const std::vector<ExecProfile>& list_profiles() {
  static const std::vector<ExecProfile> registry = make_registry();
  return registry;
}

const ExecProfile& find_profile(std::string_view id) {
  for (const auto& p : list_profiles()) {
    if (p.id == id) return p;
  }
  throw LookupError("unknown profile '" + std::string(id) + "' (valid: " + profile_ids() + ")");
}

std::string profile_ids() {
  std::string s;
  for (const auto& p : list_profiles()) {
    if (!s.empty()) s += ", ";
    s += p.id;
  }
  return s;
}

std::size_t profile_rank(std::string_view id) {
  const auto& r = list_profiles();
  auto it = std::find_if(r.begin(), r.end(), [&](const ExecProfile& p) { return p.id == id; });
  return static_cast<std::size_t>(it - r.begin());
}

float reduce_sum(std::span<const float> v, const ExecProfile& profile) { return reduce({v, {}}, profile); }

float dot(std::span<const float> a, std::span<const float> b, const ExecProfile& profile) {
  if (a.size() != b.size()) {
    throw ShapeError("dot: length mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  if (a.empty()) return 0.0f;
  return reduce({a, b}, profile);
}

}  // namespace fnns
