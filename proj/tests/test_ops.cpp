#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "sfuse/ops.hpp"

using namespace sfuse;

namespace {

TensorD random_tensor(Shape s, Rng& rng) {
  TensorD t(std::move(s));
  for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

}  // namespace

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor({2, 0}), Error);
  EXPECT_THROW(Tensor({2, 2}, std::vector<float>(3)), Error);
  Tensor t({2, 3}, 1.0f);
  EXPECT_THROW(t.reshape({4}), Error);
  EXPECT_EQ(t.reshaped({3, 2}).dim(0), 3u);
  EXPECT_FLOAT_EQ(t.sum(), 6.0f);
}

TEST(Conv2d, Table1ShapeForFirstLayer) {
  const Tensor x({1, 32, 32}, 0.5f);
  const Tensor k({32, 1, 5, 5}, 0.1f);
  const Tensor b({32}, 0.0f);
  EXPECT_EQ(conv2d(x, k, b, 2).shape(), (Shape{32, 32, 32}));
}

TEST(Conv2d, ZeroInputZeroOutput) {
  const Tensor y = conv2d(Tensor({3, 8, 8}), Tensor({4, 3, 3, 3}, 1.0f), Tensor({4}), 1);
  for (float v : y.values()) EXPECT_EQ(v, 0.0f);
}

TEST(Conv2d, AllOnesWindowSums) {
  const TensorD y = conv2d(TensorD({1, 3, 3}, 1.0), TensorD({1, 1, 3, 3}, 1.0), TensorD({1}), 1);
  const auto ref = oracle::conv_same(std::vector<double>(9, 1.0), 3, 3, std::vector<double>(9, 1.0), 3);
  EXPECT_DOUBLE_EQ(y(0, 1, 1), 9.0);
  EXPECT_DOUBLE_EQ(y(0, 0, 1), 6.0);
  EXPECT_DOUBLE_EQ(y(0, 0, 0), 4.0);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_DOUBLE_EQ(y[i], ref[i]);
}

TEST(Conv2d, MatchesDirectSummationOracle) {
  Rng rng(3);
  for (std::size_t ks : {3u, 5u, 7u}) {
    const TensorD x = random_tensor({2, 11, 9}, rng);
    const TensorD k = random_tensor({3, 2, ks, ks}, rng);
    const TensorD b = random_tensor({3}, rng);
    const TensorD y = conv2d(x, k, b, ks / 2);
    for (std::size_t o = 0; o < 3; ++o) {
      std::vector<double> expect(11 * 9, b[o]);
      for (std::size_t c = 0; c < 2; ++c) {
        std::vector<double> img(x.data() + c * 99, x.data() + (c + 1) * 99);
        std::vector<double> ker(k.data() + (o * 2 + c) * ks * ks, k.data() + (o * 2 + c + 1) * ks * ks);
        const auto part = oracle::conv_same(img, 11, 9, ker, ks);
        for (std::size_t i = 0; i < part.size(); ++i) expect[i] += part[i];
      }
      for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(y[o * 99 + i], expect[i], 1e-12);
    }
  }
}

TEST(Conv2d, BatchEqualsPerSample) {
  Rng rng(5);
  const TensorD x = random_tensor({3, 2, 6, 6}, rng);
  const TensorD k = random_tensor({4, 2, 3, 3}, rng);
  const TensorD b = random_tensor({4}, rng);
  const TensorD y = conv2d(x, k, b, 1);
  for (std::size_t n = 0; n < 3; ++n) {
    const TensorD xs({2, 6, 6}, std::vector<double>(x.data() + n * 72, x.data() + (n + 1) * 72));
    const TensorD ys = conv2d(xs, k, b, 1);
    for (std::size_t i = 0; i < ys.size(); ++i) EXPECT_EQ(y[n * ys.size() + i], ys[i]);
  }
}

TEST(Conv2d, ShapeErrors) {
  EXPECT_THROW(conv2d(Tensor({2, 8, 8}), Tensor({4, 3, 3, 3}), Tensor({4}), 1), Error);
  EXPECT_THROW(conv2d(Tensor({3, 8, 8}), Tensor({4, 3, 3, 3}), Tensor({4}), 2), Error);
  EXPECT_THROW(conv2d(Tensor({3, 8, 8}), Tensor({4, 3, 4, 4}), Tensor({4}), 2), Error);
  EXPECT_THROW(conv2d(Tensor({3, 8, 8}), Tensor({4, 3, 3, 3}), Tensor({5}), 1), Error);
}

TEST(Conv2d, ChannelMismatchMessageNamesShapes) {
  try {
    conv2d(Tensor({2, 8, 8}), Tensor({4, 3, 3, 3}), Tensor({4}), 1);
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x8x8"), std::string::npos) << msg;
    EXPECT_NE(msg.find("4x3x3x3"), std::string::npos) << msg;
  }
}

TEST(MaxPool, Table1Shape) {
  EXPECT_EQ(maxpool2d(Tensor({32, 128, 128})).shape(), (Shape{32, 64, 64}));
}

TEST(MaxPool, WindowMaximum) {
  const TensorD y = maxpool2d(TensorD({1, 2, 2}, {1, 2, 3, 4}));
  EXPECT_EQ(y.size(), 1u);
  EXPECT_DOUBLE_EQ(y[0], 4.0);
}

TEST(MaxPool, ConstantInputQuarterArea) {
  const Tensor y = maxpool2d(Tensor({2, 6, 4}, 1.5f));
  EXPECT_EQ(y.shape(), (Shape{2, 3, 2}));
  for (float v : y.values()) EXPECT_EQ(v, 1.5f);
}

TEST(MaxPool, ExhaustiveOracleAndRoutes) {
  Rng rng(9);
  const TensorD x = random_tensor({2, 3, 4, 6}, rng);
  const PoolResult<double> p = maxpool2d_indexed(x);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
          const double m = std::max({x(n, c, 2 * i, 2 * j), x(n, c, 2 * i, 2 * j + 1), x(n, c, 2 * i + 1, 2 * j),
                                     x(n, c, 2 * i + 1, 2 * j + 1)});
          EXPECT_EQ(p.output(n, c, i, j), m);
        }
  const TensorD g = maxpool2d_backward(x.shape(), p.argmax, TensorD(p.output.shape(), 1.0));
  EXPECT_DOUBLE_EQ(g.sum(), static_cast<double>(p.output.size()));
  for (std::size_t k = 0; k < p.argmax.size(); ++k) EXPECT_EQ(x[p.argmax[k]], p.output[k]);
}

TEST(MaxPool, OddSizeRejected) {
  EXPECT_THROW(maxpool2d(Tensor({1, 3, 4})), Error);
}

TEST(Dense, Table1Widths) {
  const Tensor y = dense(Tensor({1024}, 1.0f), Tensor({512, 1024}, 0.0f), Tensor({512}, 0.0f));
  EXPECT_EQ(y.shape(), (Shape{512}));
}

TEST(Dense, HandMatrixVector) {
  const TensorD y = dense(TensorD({2}, {1, 1}), TensorD({2, 2}, {1, 2, 3, 4}), TensorD({2}));
  EXPECT_DOUBLE_EQ(y[0], 3.0);
  EXPECT_DOUBLE_EQ(y[1], 7.0);
}

TEST(Dense, IdentityWeights) {
  TensorD w({3, 3});
  for (std::size_t i = 0; i < 3; ++i) w(i, i) = 1.0;
  const TensorD x({3}, {0.5, -2.0, 4.0});
  EXPECT_EQ(dense(x, w, TensorD({3})), x);
}

TEST(Dense, WeightGradientOfFirstOutput) {
  TensorD up({1, 3});
  up[0] = 1.0;
  const DenseGrads<double> g = dense_backward(TensorD({1, 2}, {1, 2}), TensorD({3, 2}, 0.3), up);
  EXPECT_DOUBLE_EQ(g.weights(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(g.weights(0, 1), 2.0);
  for (std::size_t r = 1; r < 3; ++r) {
    EXPECT_EQ(g.weights(r, 0), 0.0);
    EXPECT_EQ(g.weights(r, 1), 0.0);
  }
}

TEST(Relu, ValuesAndGradient) {
  const TensorD y = relu(TensorD({3}, {-1, 0, 2}));
  EXPECT_EQ(y, TensorD({3}, {0, 0, 2}));
  const TensorD pos({4}, {0.1, 2, 3, 9});
  EXPECT_EQ(relu(pos), pos);
  const TensorD g = relu_backward(TensorD({2}, {3, -3}), TensorD({2}, 1.0));
  EXPECT_EQ(g[0], 1.0);
  EXPECT_EQ(g[1], 0.0);
}

TEST(Dropout, IdentityCases) {
  Rng rng(1);
  const Tensor x({64}, 2.0f);
  EXPECT_EQ(dropout(x, 0.0, Mode::train, rng).output, x);
  EXPECT_EQ(dropout(x, 0.5, Mode::eval, rng).output, x);
  EXPECT_TRUE(dropout(x, 0.5, Mode::eval, rng).scale.empty());
  EXPECT_THROW(dropout(x, 1.0, Mode::train, rng), Error);
  EXPECT_THROW(dropout(x, -0.1, Mode::train, rng), Error);
}

TEST(Dropout, ExpectationMatchesEval) {
  Rng rng(77);
  const TensorD x({1}, 3.0);
  const double eval = dropout(x, 0.5, Mode::eval, rng).output[0];
  double sum = 0.0;
  const int trials = 100000;
  for (int i = 0; i < trials; ++i) sum += dropout(x, 0.5, Mode::train, rng).output[0];
  EXPECT_NEAR(sum / trials, eval, 0.02 * eval);
}

TEST(Softmax, UniformLogits) {
  const TensorD z({2, 11}, 0.7);
  const std::vector<int> labels = {0, 6};
  EXPECT_NEAR(softmax_cross_entropy(z, labels).loss, std::log(11.0), 1e-12);
  EXPECT_NEAR(softmax_cross_entropy(z, labels).loss, 2.397895, 1e-6);
}

TEST(Softmax, SaturatedTrueLabel) {
  TensorD z({1, 11});
  z[4] = 1000.0;
  const std::vector<int> labels = {4};
  const SoftmaxLoss<double> s = softmax_cross_entropy(z, labels);
  EXPECT_LT(s.loss, 1e-9);
  EXPECT_TRUE(s.probabilities.all_finite());
}

TEST(Softmax, DirectFormula) {
  TensorD z({1, 11});
  z[0] = 1.0;
  const std::vector<int> labels = {0};
  const double expect = -std::log(std::exp(1.0) / (std::exp(1.0) + 10.0));
  EXPECT_NEAR(softmax_cross_entropy(z, labels).loss, expect, 1e-14);
}

TEST(Softmax, GradientRowsSumToZero) {
  Rng rng(4);
  const TensorD z = random_tensor({3, 11}, rng);
  const std::vector<int> labels = {1, 10, 3};
  const TensorD g = softmax_cross_entropy_backward(softmax_cross_entropy(z, labels).probabilities, labels);
  for (std::size_t n = 0; n < 3; ++n) {
    double s = 0.0;
    for (std::size_t c = 0; c < 11; ++c) s += g(n, c);
    EXPECT_NEAR(s, 0.0, 1e-15);
  }
}

TEST(Softmax, LabelOutOfRange) {
  const std::vector<int> labels = {11};
  EXPECT_THROW(softmax_cross_entropy(Tensor({1, 11}), labels), Error);
}
