#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "fnns/arith.hpp"
#include "fnns/error.hpp"
#include "fnns/tensor.hpp"
#include "support.hpp"

using namespace fnns;

namespace {

float ref_sequential(const std::vector<float>& v) {
  float s = 0.0f;
  for (float x : v) s += x;
  return s;
}

float ref_pairwise(const float* v, std::size_t n) {
  if (n == 0) return 0.0f;
  if (n == 1) return v[0];
  const std::size_t h = n / 2;
  return ref_pairwise(v, h) + ref_pairwise(v + h, n - h);
}

float ref_blocked(const std::vector<float>& v, std::size_t lanes) {
  std::vector<float> acc(lanes, 0.0f);
  for (std::size_t i = 0; i < v.size(); ++i) acc[i % lanes] += v[i];
  float s = 0.0f;
  for (float a : acc) s += a;
  return s;
}

float ref_kahan(const std::vector<float>& v) {
  float s = 0.0f, c = 0.0f;
  for (float x : v) {
    const float y = x - c;
    const float t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s;
}

double exact_sum(const std::vector<float>& v) {
  double s = 0.0;
  for (float x : v) s += x;
  return s;
}

std::vector<float> products(const std::vector<float>& a, const std::vector<float>& b) {
  std::vector<float> p(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) p[i] = a[i] * b[i];
  return p;
}

}  // namespace

TEST(Registry, ShapeAndStability) {
  const auto& r = list_profiles();
  ASSERT_GE(r.size(), 6u);
  std::set<std::string> ids;
  for (const auto& p : r) ids.insert(p.id);
  EXPECT_EQ(ids.size(), r.size());
  const auto& again = list_profiles();
  ASSERT_EQ(again.size(), r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    EXPECT_EQ(again[i].id, r[i].id);
    EXPECT_EQ(profile_rank(r[i].id), i);
  }
  for (const char* id : {"seq32", "blk8", "pairwise", "kahan", "fma", "acc64"}) EXPECT_TRUE(ids.count(id)) << id;
}

TEST(Registry, UnknownProfileListsIds) {
  try {
    find_profile("x87");
    FAIL();
  } catch (const LookupError& e) {
    EXPECT_NE(std::string(e.what()).find("seq32"), std::string::npos);
  }
}

TEST(ReduceSum, AbsorptionExamples) {
  const std::vector<float> v{16777216.0f, 1.0f, 1.0f};
  EXPECT_EQ(reduce_sum(v, find_profile("seq32")), 16777216.0f);
  EXPECT_EQ(reduce_sum(v, find_profile("pairwise")), 16777218.0f);
  EXPECT_EQ(reduce_sum(v, find_profile("acc64")), 16777218.0f);
}

TEST(ReduceSum, MatchesReferenceOrders) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto v = test::random_vector(1 + s * 7 % 130, s);
    EXPECT_EQ(float_bits(reduce_sum(v, find_profile("seq32"))), float_bits(ref_sequential(v)));
    EXPECT_EQ(float_bits(reduce_sum(v, find_profile("pairwise"))), float_bits(ref_pairwise(v.data(), v.size())));
    EXPECT_EQ(float_bits(reduce_sum(v, find_profile("blk4"))), float_bits(ref_blocked(v, 4)));
    EXPECT_EQ(float_bits(reduce_sum(v, find_profile("blk8"))), float_bits(ref_blocked(v, 8)));
    EXPECT_EQ(float_bits(reduce_sum(v, find_profile("kahan"))), float_bits(ref_kahan(v)));
    EXPECT_EQ(float_bits(reduce_sum(v, find_profile("acc64"))), float_bits(static_cast<float>(exact_sum(v))));
  }
}

TEST(ReduceSum, KahanWithinTwoUlpOfDouble) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto v = test::random_vector(1000, 1000 + s, 0.0f, 1.0f);
    const double exact = exact_sum(v);
    const float k = reduce_sum(v, find_profile("kahan"));
    const float ref = static_cast<float>(exact);
    const double ulp = std::nextafter(ref, INFINITY) - ref;
    EXPECT_LE(std::fabs(k - exact), 2.0 * ulp) << "seed " << s;
  }
}

TEST(ReduceSum, KahanErrorBound) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto v = test::random_vector(257, 5000 + s, -4.0f, 4.0f);
    double abs_sum = 0.0;
    for (float x : v) abs_sum += std::fabs(x);
    const double err = std::fabs(reduce_sum(v, find_profile("kahan")) - exact_sum(v));
    EXPECT_LE(err, 2.0 * 0x1.0p-24 * abs_sum) << "seed " << s;
  }
}

TEST(ReduceSum, DeterministicPerProfile) {
  const auto v = test::random_vector(333, 9);
  for (const auto& p : list_profiles()) {
    EXPECT_EQ(float_bits(reduce_sum(v, p)), float_bits(reduce_sum(v, p))) << p.id;
  }
}

TEST(ReduceSum, EmptyIsZero) {
  for (const auto& p : list_profiles()) EXPECT_EQ(float_bits(reduce_sum({}, p)), 0u) << p.id;
}

TEST(Dot, Examples) {
  const std::vector<float> a{1, 2, 3}, z{0, 0, 0}, ones(4, 1.0f);
  for (const auto& p : list_profiles()) {
    EXPECT_EQ(dot(a, z, p), 0.0f) << p.id;
    EXPECT_EQ(dot(ones, ones, p), 4.0f) << p.id;
  }
  EXPECT_THROW(dot(a, ones, find_profile("seq32")), ShapeError);
}

TEST(Dot, NonFusedProfilesReduceRoundedProducts) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto a = test::random_vector(37, 2 * s), b = test::random_vector(37, 2 * s + 1);
    const auto p = products(a, b);
    EXPECT_EQ(float_bits(dot(a, b, find_profile("seq32"))), float_bits(ref_sequential(p)));
    EXPECT_EQ(float_bits(dot(a, b, find_profile("blk8"))), float_bits(ref_blocked(p, 8)));
    EXPECT_EQ(float_bits(dot(a, b, find_profile("pairwise"))), float_bits(ref_pairwise(p.data(), p.size())));
    EXPECT_EQ(float_bits(dot(a, b, find_profile("kahan"))), float_bits(ref_kahan(p)));
  }
}

TEST(Dot, FusedProfileRoundsOncePerStep) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto a = test::random_vector(37, 300 + s), b = test::random_vector(37, 600 + s);
    float acc = 0.0f;
    for (std::size_t i = 0; i < a.size(); ++i) acc = static_cast<float>(static_cast<double>(a[i]) * b[i] + acc);
    EXPECT_EQ(float_bits(dot(a, b, find_profile("fma"))), float_bits(acc));

    double wide = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) wide += static_cast<double>(a[i]) * b[i];
    EXPECT_EQ(float_bits(dot(a, b, find_profile("acc64"))), float_bits(static_cast<float>(wide)));
  }
}

TEST(Dot, SequentialAndBlockedDisagreeForSomeSeed) {
  std::size_t differing = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto a = test::random_vector(64, s), b = test::random_vector(64, s + 10000);
    if (float_bits(dot(a, b, find_profile("seq32"))) != float_bits(dot(a, b, find_profile("blk8")))) ++differing;
  }
  EXPECT_GT(differing, 0u);
}

TEST(Dot, ProfilesAgreeOnSmallIntegers) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    SplitMix64 rng(s);
    std::vector<float> a(50), b(50);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = static_cast<float>(rng.below(201)) - 100.0f;
      b[i] = static_cast<float>(rng.below(201)) - 100.0f;
    }
    const auto ref = float_bits(dot(a, b, find_profile("seq32")));
    for (const auto& p : list_profiles()) EXPECT_EQ(float_bits(dot(a, b, p)), ref) << p.id;
  }
}

TEST(Dot, SomeProfilesDisagreeBitwise) {
  const std::vector<float> v{16777216.0f, 1.0f, 1.0f};
  std::set<std::uint32_t> sums;
  for (const auto& p : list_profiles()) sums.insert(float_bits(reduce_sum(v, p)));
  EXPECT_GE(sums.size(), 2u);
}
