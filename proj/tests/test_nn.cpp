#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "fnns/arith.hpp"
#include "fnns/error.hpp"
#include "fnns/io.hpp"
#include "fnns/nn.hpp"
#include "reference.hpp"
#include "support.hpp"

using namespace fnns;

namespace {

const ExecProfile& seq() { return find_profile("seq32"); }

Layer random_conv(std::size_t out, std::size_t in, std::size_t k, std::uint64_t seed) {
  return Layer::conv2d(test::random_tensor({out, in, k, k}, seed), test::random_tensor({out}, seed + 1));
}

Tensor identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t[i * n + i] = 1.0f;
  return t;
}

}  // namespace

TEST(Conv2d, SmallIntegerExample) {
  const Tensor x({2, 2, 1}, {1, 2, 3, 4});
  const auto layer = Layer::conv2d(Tensor({1, 1, 2, 2}, {1, 1, 1, 1}), Tensor({1}));
  for (const auto& p : list_profiles()) {
    const auto y = conv2d_forward(x, layer, p);
    EXPECT_EQ(y.shape(), (Shape{1, 1, 1}));
    EXPECT_EQ(y[0], 10.0f) << p.id;
  }
}

TEST(Conv2d, OneByOneIdentity) {
  const auto x = test::random_tensor({3, 3, 1}, 4);
  const auto layer = Layer::conv2d(Tensor({1, 1, 1, 1}, {1.0f}), Tensor({1}));
  for (const auto& p : list_profiles()) EXPECT_TRUE(bit_equal(conv2d_forward(x, layer, p), x)) << p.id;
}

TEST(Conv2d, OutputShapeAndErrors) {
  const auto layer = random_conv(5, 2, 3, 1);
  EXPECT_EQ(conv2d_forward(test::random_tensor({7, 6, 2}, 2), layer, seq()).shape(), (Shape{5, 4, 5}));
  EXPECT_THROW(conv2d_forward(test::random_tensor({7, 6, 3}, 2), layer, seq()), ShapeError);
  EXPECT_THROW(conv2d_forward(test::random_tensor({2, 6, 2}, 2), layer, seq()), ShapeError);
}

TEST(Conv2d, MatchesIm2colOracle) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    SplitMix64 rng(s);
    const std::size_t in = 1 + rng.below(3), out = 1 + rng.below(4), k = 1 + rng.below(4);
    const std::size_t h = k + rng.below(6), w = k + rng.below(6);
    const auto layer = random_conv(out, in, k, 100 + s);
    const auto x = test::random_tensor({h, w, in}, 200 + s);
    for (const auto& p : list_profiles()) {
      EXPECT_TRUE(bit_equal(conv2d_forward(x, layer, p), test::conv2d_im2col(x, layer, p))) << p.id << " seed " << s;
    }
  }
}

TEST(Conv2d, StackedConvsSeparateSequentialFromPairwise) {
  const auto m = build_mock(MockSpec::conv2(1, 3, 0));
  const auto x = test::random_tensor({28, 28, 1}, 42, 0.0f, 1.0f);
  EXPECT_FALSE(bit_equal(forward(m, x, seq()), forward(m, x, find_profile("pairwise"))));
}

TEST(Dense, IdentityAndBias) {
  const auto x = test::random_tensor({6}, 3);
  for (const auto& p : list_profiles()) {
    EXPECT_TRUE(bit_equal(dense_forward(x, Layer::dense(identity(6), Tensor({6})), p), x)) << p.id;
    const auto b = test::random_tensor({4}, 8);
    EXPECT_TRUE(bit_equal(dense_forward(x, Layer::dense(Tensor({4, 6}), b), p), b)) << p.id;
  }
  EXPECT_THROW(dense_forward(test::random_tensor({5}, 1), Layer::dense(identity(6), Tensor({6})), seq()), ShapeError);
}

TEST(Dense, WideLayerUnderAcc64AndSeq32) {
  const auto layer = Layer::dense(test::random_tensor({10, 128}, 0), test::random_tensor({10}, 1));
  const auto x = test::random_tensor({128}, 2);
  // Recorded outcome for seed 0: the two profiles disagree.
  EXPECT_FALSE(bit_equal(dense_forward(x, layer, seq()), dense_forward(x, layer, find_profile("acc64"))));
}

TEST(Softmax, Examples) {
  for (const auto& p : list_profiles()) {
    const auto a = softmax(Tensor::vector({0.0f, 0.0f}), p);
    EXPECT_EQ(a[0], 0.5f);
    EXPECT_EQ(a[1], 0.5f);
    const auto b = softmax(Tensor::vector({1000.0f, 1000.0f}), p);
    EXPECT_EQ(b[0], 0.5f);
    EXPECT_EQ(b[1], 0.5f);
    const auto c = softmax(Tensor::vector({0.0f, std::log(3.0f)}), p);
    EXPECT_LE(std::fabs(c[0] - 0.25f), std::nextafter(0.25f, 1.0f) - 0.25f) << p.id;
    EXPECT_LE(std::fabs(c[1] - 0.75f), std::nextafter(0.75f, 1.0f) - 0.75f) << p.id;
  }
}

TEST(Softmax, SumsToOneWithinFourUlp) {
  const float ulp1 = std::nextafter(1.0f, 2.0f) - 1.0f;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto v = softmax(test::random_tensor({10}, s, -20.0f, 20.0f), seq());
    double sum = 0.0;
    for (float x : v.data()) {
      EXPECT_GT(x, 0.0f);
      EXPECT_LE(x, 1.0f);
      sum += x;
    }
    EXPECT_LE(std::fabs(sum - 1.0), 4.0 * ulp1);
  }
}

TEST(Forward, ShapeChainAndNoNaN) {
  for (const auto& spec : default_sweep_specs(3)) {
    const auto m = build_mock(spec);
    const auto x = test::random_tensor({28, 28, 1}, 5, 0.0f, 1.0f);
    const auto chain = m.shape_chain();
    const auto trace = forward_trace(m, x, seq());
    ASSERT_EQ(trace.size(), chain.size());
    for (std::size_t i = 0; i < trace.size(); ++i) EXPECT_EQ(trace[i].shape(), chain[i]);
    for (const auto& p : list_profiles()) {
      const auto y = forward(m, x, p);
      for (float v : y.data()) EXPECT_TRUE(std::isfinite(v)) << spec.name() << " " << p.id;
    }
  }
  const auto m = build_mock(MockSpec::mlp());
  EXPECT_THROW(forward(m, test::random_tensor({27, 28, 1}, 1), seq()), ShapeError);
}

TEST(Forward, DeterministicPerProfile) {
  const auto m = build_toy_cnn({12, 12, 1}, 10, 9);
  const auto x = test::random_tensor({12, 12, 1}, 10, 0.0f, 1.0f);
  for (const auto& p : list_profiles()) EXPECT_TRUE(bit_equal(forward(m, x, p), forward(m, x, p))) << p.id;
}

TEST(Forward, Conv2TwoByFourHasSeveralDigests) {
  const auto m = build_mock(MockSpec::conv2(2, 4, 0));
  const auto x = test::random_tensor({28, 28, 1}, 0, 0.0f, 1.0f);
  std::set<std::string> digests;
  for (const auto& p : list_profiles()) digests.insert(digest(forward(m, x, p)).hex());
  EXPECT_GE(digests.size(), 2u);
}

TEST(Forward, MockMlpDiffersAcrossProfiles) {
  // The simulated profiles do not reproduce the MLP invariance seen on physical
  // hardware: a 784-term inner product is order-sensitive in binary32.
  const auto m = build_mock(MockSpec::mlp(0));
  const auto x = test::random_tensor({28, 28, 1}, 0, 0.0f, 1.0f);
  std::set<std::string> digests;
  for (const auto& p : list_profiles()) digests.insert(digest(forward(m, x, p)).hex());
  EXPECT_GT(digests.size(), 1u);
}

TEST(PredictLabel, UniformConfidencesGiveZero) {
  Model m{"uniform", {4}, {Layer::dense(Tensor({3, 4}), Tensor({3})), Layer::softmax()}};
  for (const auto& p : list_profiles()) EXPECT_EQ(predict_label(m, test::random_tensor({4}, 1), p), 0u);
}

TEST(Mocks, Structure) {
  const auto m = build_mock(MockSpec::conv2(1, 2, 0));
  std::size_t convs = 0;
  for (const auto& L : m.layers) {
    EXPECT_NE(L.kind, LayerKind::relu);
    EXPECT_NE(L.kind, LayerKind::softmax);
    if (L.kind == LayerKind::conv2d) {
      ++convs;
      EXPECT_EQ(L.weights.shape()[0], 1u);
      EXPECT_EQ(L.weights.shape()[2], 2u);
      EXPECT_EQ(L.weights.shape()[3], 2u);
    }
  }
  EXPECT_EQ(convs, 2u);

  const auto c1 = build_mock(MockSpec::conv1(0));
  EXPECT_EQ(c1.layers.front().kind, LayerKind::conv2d);
  EXPECT_EQ(c1.layers.front().weights.shape(), (Shape{32, 1, 3, 3}));

  EXPECT_EQ(MockSpec::parse("conv2-2x4x4").name(), "conv2-2x4x4");
  EXPECT_EQ(MockSpec::parse("mlp").variant, MockVariant::mlp);
  EXPECT_THROW(MockSpec::parse("conv3"), LookupError);
  EXPECT_THROW(build_mock(MockSpec::conv2(3, 2, 0)), LookupError);
  EXPECT_EQ(default_sweep_specs().size(), 6u);
}

TEST(Mocks, SeededWeights) {
  const auto a = build_mock(MockSpec::conv2(2, 3, 5));
  const auto b = build_mock(MockSpec::conv2(2, 3, 5));
  const auto c = build_mock(MockSpec::conv2(2, 3, 6));
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    EXPECT_TRUE(bit_equal(a.layers[i].weights, b.layers[i].weights));
    EXPECT_TRUE(bit_equal(a.layers[i].bias, b.layers[i].bias));
  }
  EXPECT_FALSE(bit_equal(a.layers[0].weights, c.layers[0].weights));
  for (const auto& L : a.layers) {
    for (float w : L.weights.data()) {
      EXPECT_GE(w, -0.5f);
      EXPECT_LE(w, 0.5f);
    }
  }
}

TEST(Gradient, ZeroWeightsGiveZeroGradient) {
  Model m{"zero", {3, 3, 1}, {Layer::flatten(), Layer::dense(Tensor({4, 9}), test::random_tensor({4}, 1)), Layer::softmax()}};
  const auto g = input_gradient(m, test::random_tensor({3, 3, 1}, 2), 1, seq());
  EXPECT_EQ(g.shape(), (Shape{3, 3, 1}));
  for (float v : g.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Gradient, LinearIdentityModelClosedForm) {
  // softmax(I * I * x): d(-log p_t)/dx = p - onehot(t).
  Model m{"lin", {4}, {Layer::dense(identity(4), Tensor({4})), Layer::dense(identity(4), Tensor({4})), Layer::softmax()}};
  const auto x = Tensor::vector({0.1f, -0.3f, 0.7f, 0.2f});
  const auto g = input_gradient(m, x, 2, seq());
  double e[4], s = 0.0;
  for (int i = 0; i < 4; ++i) s += (e[i] = std::exp(static_cast<double>(x[i])));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(g[i], e[i] / s - (i == 2 ? 1.0 : 0.0), 1e-6);
}

TEST(Gradient, LabelOutOfRange) {
  const auto m = build_toy_mlp({4}, 3, 2, 0);
  EXPECT_THROW(input_gradient(m, test::random_tensor({4}, 0), 2, seq()), std::out_of_range);
  EXPECT_THROW(input_gradient(build_mock(MockSpec::conv1()), test::random_tensor({28, 28, 1}, 0), 0, seq()),
               std::invalid_argument);
}

TEST(Gradient, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = build_toy_cnn({10, 10, 1}, 5, seed);
    const auto x = test::random_tensor({10, 10, 1}, 77 + seed, 0.0f, 1.0f);
    const std::size_t target = seed % 5;
    const auto g = input_gradient(m, x, target, seq());
    const auto xd = test::to_double(x);
    std::size_t checked = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (std::fabs(g[i]) <= 1e-4f) continue;
      const auto fd = test::central_difference(m, xd, i, target, 1e-3);
      if (fd.crosses_kink) continue;
      EXPECT_LE(std::fabs(g[i] - fd.derivative) / std::fabs(fd.derivative), 1e-2) << "seed " << seed << " element " << i;
      ++checked;
    }
    EXPECT_GT(checked, 10u);
  }
}

TEST(Train, ZeroLearningRateKeepsWeights) {
  const auto data = io::load_idx_dataset(test::data_dir() / "mnist-test-images.idx", test::data_dir() / "mnist-test-labels.idx");
  Dataset small{{data.images.begin(), data.images.begin() + 32}, {data.labels.begin(), data.labels.begin() + 32}};
  const auto m = build_toy_cnn({28, 28, 1}, 10, 3);
  const auto t = train_small(m, small, {1, 0.0f, 5, 8});
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    EXPECT_TRUE(bit_equal(m.layers[i].weights, t.layers[i].weights));
    EXPECT_TRUE(bit_equal(m.layers[i].bias, t.layers[i].bias));
  }
  EXPECT_THROW(train_small(m, Dataset{}, {}), std::invalid_argument);
}

TEST(Train, DeterministicAndLearns) {
  const auto dir = test::data_dir();
  auto train = io::load_idx_dataset(dir / "mnist-train-images.idx", dir / "mnist-train-labels.idx");
  train.images.resize(512);
  train.labels.resize(512);
  const auto test_set = io::load_idx_dataset(dir / "mnist-test-images.idx", dir / "mnist-test-labels.idx");
  const auto init = build_toy_cnn({28, 28, 1}, 10, 1);
  const TrainOptions opts{1, 0.05f, 7, 8};
  const auto a = train_small(init, train, opts);
  const auto b = train_small(init, train, opts);
  for (std::size_t i = 0; i < a.layers.size(); ++i) EXPECT_TRUE(bit_equal(a.layers[i].weights, b.layers[i].weights));
  // Regression floor; the first trusted run measured 0.796.
  EXPECT_GT(accuracy(a, test_set, seq()), 0.60);
}
