#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "fnns/arith.hpp"
#include "fnns/boundary.hpp"
#include "fnns/error.hpp"
#include "fnns/io.hpp"
#include "support.hpp"

using namespace fnns;

namespace {

const ExecProfile& seq() { return find_profile("seq32"); }

struct Trained {
  Model model;
  Dataset test;
};

const Trained& trained() {
  static const Trained t = [] {
    const auto dir = test::data_dir();
    auto train = io::load_idx_dataset(dir / "mnist-train-images.idx", dir / "mnist-train-labels.idx");
    train.images.resize(512);
    train.labels.resize(512);
    auto test_set = io::load_idx_dataset(dir / "mnist-test-images.idx", dir / "mnist-test-labels.idx");
    return Trained{train_small(build_toy_cnn({28, 28, 1}, 10, 1), train, {1, 0.05f, 7, 8}), std::move(test_set)};
  }();
  return t;
}

}  // namespace

TEST(FgsmStep, Examples) {
  const auto x = Tensor::vector({0.5f, 0.5f});
  const auto g = Tensor::vector({2.0f, -3.0f});
  const auto up = fgsm_step(x, g, 0.01f, 1.0f, 1);
  EXPECT_FLOAT_EQ(up[0], 0.51f);
  EXPECT_FLOAT_EQ(up[1], 0.49f);
  const auto down = fgsm_step(x, g, 0.01f, 1.0f, -1);
  EXPECT_FLOAT_EQ(down[0], 0.49f);
  EXPECT_FLOAT_EQ(down[1], 0.51f);
  EXPECT_TRUE(bit_equal(fgsm_step(x, g, 0.01f, 0.0f, 1), x));
}

TEST(FgsmStep, ZeroGradientAndClipping) {
  const auto x = Tensor::vector({0.995f, 0.005f, 0.3f});
  const auto y = fgsm_step(x, Tensor::vector({1.0f, -1.0f, 0.0f}), 0.01f, 1.0f, 1);
  EXPECT_EQ(y[0], 1.0f);
  EXPECT_EQ(y[1], 0.0f);
  EXPECT_EQ(y[2], 0.3f);
  const auto out_of_range = fgsm_step(Tensor::vector({1.5f}), Tensor::vector({0.0f}), 0.01f, 1.0f, 1);
  EXPECT_EQ(out_of_range[0], 1.0f);
}

TEST(FgsmStep, Errors) {
  const auto x = Tensor::vector({0.5f, 0.5f});
  EXPECT_THROW(fgsm_step(x, Tensor::vector({1.0f}), 0.01f, 1.0f, 1), ShapeError);
  EXPECT_THROW(fgsm_step(x, x, 0.01f, -1.0f, 1), std::invalid_argument);
  EXPECT_THROW(fgsm_step(x, x, 0.01f, 1.0f, 0), std::invalid_argument);
}

TEST(Psnr, Examples) {
  const auto a = Tensor::vector({0.2f, 0.4f});
  EXPECT_EQ(psnr(a, a), std::numeric_limits<double>::infinity());
  EXPECT_DOUBLE_EQ(psnr(Tensor::vector({0.0f}), Tensor::vector({1.0f})), 0.0);
  EXPECT_DOUBLE_EQ(psnr(Tensor::vector({0.0f}), Tensor::vector({2.0f}), 2.0), 0.0);
  EXPECT_NEAR(psnr(Tensor::vector({0.0f}), Tensor::vector({0.5f})), 6.0206, 1e-4);
  EXPECT_THROW(psnr(a, Tensor::vector({0.0f})), ShapeError);
}

TEST(Psnr, Symmetric) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto a = test::random_tensor({16}, s, 0.0f, 1.0f), b = test::random_tensor({16}, s + 99, 0.0f, 1.0f);
    EXPECT_EQ(psnr(a, b), psnr(b, a));
    EXPECT_GE(psnr(a, b), 0.0);
  }
}

TEST(FlipMatrix, CleanDigitsAgreeAcrossProfiles) {
  const auto& t = trained();
  for (std::size_t i = 0; i < 20; ++i) {
    const auto table = flip_matrix(t.test.images[i], t.model, list_profiles());
    ASSERT_EQ(table.size(), list_profiles().size());
    EXPECT_FALSE(has_flip(table)) << "image " << i;
  }
}

TEST(FlipMatrix, ConstantInput) {
  const auto& t = trained();
  const Tensor flat({28, 28, 1}, std::vector<float>(784, 0.5f));
  EXPECT_EQ(flip_matrix(flat, t.model, list_profiles()).size(), list_profiles().size());
}

TEST(HasFlip, Basics) {
  std::vector<ProfilePrediction> table{{"a", 3}, {"b", 3}};
  EXPECT_FALSE(has_flip(table));
  table.push_back({"c", 5});
  EXPECT_TRUE(has_flip(table));
}

TEST(Boundary, StoppingRuleClippingAndBound) {
  const auto& t = trained();
  const BoundaryParams params;
  EXPECT_EQ(params.gap_threshold, 1e-8f);
  EXPECT_EQ(params.max_iter, 300u);
  for (std::size_t i = 0; i < 8; ++i) {
    const auto& x = t.test.images[i];
    const auto r = generate_boundary(t.model, x, params, seq(), list_profiles());
    EXPECT_LE(r.iterations, params.max_iter);
    EXPECT_EQ(r.trace.size(), r.iterations);
    if (r.iterations < params.max_iter) {
      EXPECT_LT(r.final_gap, params.gap_threshold) << "image " << i;
    }
    EXPECT_EQ(r.final_gap, top2_gap(forward(t.model, r.sample, seq())).gap);

    float max_gap = 0.0f;
    for (const auto& s : r.trace) {
      EXPECT_GE(s.gap, params.gap_threshold);
      max_gap = std::max(max_gap, s.gap);
    }
    double linf = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      EXPECT_GE(r.sample[k], params.clip_min);
      EXPECT_LE(r.sample[k], params.clip_max);
      linf = std::max(linf, std::fabs(static_cast<double>(r.sample[k]) - x[k]));
    }
    EXPECT_LE(linf, static_cast<double>(params.max_iter) * params.alpha * max_gap * (1.0 + 1e-6));
    EXPECT_TRUE(r.psnr_db >= 0.0);
    EXPECT_EQ(r.psnr_db, psnr(x, r.sample));
    EXPECT_EQ(r.flipped, has_flip(r.predictions));
  }
}

TEST(Boundary, DirectionFollowsPrediction) {
  const auto& t = trained();
  const auto r = generate_boundary(t.model, t.test.images[0], {}, seq(), list_profiles());
  for (const auto& s : r.trace) EXPECT_EQ(s.direction, s.label == r.original_label ? 1 : -1);
}

TEST(Boundary, Deterministic) {
  const auto& t = trained();
  const auto a = generate_boundary(t.model, t.test.images[3], {}, seq(), list_profiles());
  const auto b = generate_boundary(t.model, t.test.images[3], {}, seq(), list_profiles());
  EXPECT_TRUE(bit_equal(a.sample, b.sample));
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.predictions, b.predictions);
}

TEST(Boundary, SomeSampleFlipsLabels) {
  const auto& t = trained();
  std::size_t flips = 0;
  for (std::size_t i = 0; i < 20 && flips == 0; ++i) {
    const auto r = generate_boundary(t.model, t.test.images[i], {}, seq(), list_profiles());
    if (!r.flipped) continue;
    ++flips;
    std::set<std::size_t> labels;
    for (const auto& p : r.predictions) labels.insert(p.label);
    EXPECT_GE(labels.size(), 2u);
  }
  EXPECT_GT(flips, 0u);
}

TEST(Boundary, Errors) {
  const auto& t = trained();
  auto bad = t.test.images[0];
  bad[5] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(generate_boundary(t.model, bad, {}, seq(), list_profiles()), std::domain_error);
  EXPECT_THROW(generate_boundary(build_mock(MockSpec::conv1()), t.test.images[0], {}, seq(), list_profiles()),
               std::invalid_argument);
  BoundaryParams zero;
  zero.alpha = 0.0f;
  EXPECT_THROW(generate_boundary(t.model, t.test.images[0], zero, seq(), list_profiles()), std::invalid_argument);
}
