#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "support/oracles.hpp"
#include "vdnet/tensor.hpp"

namespace vdnet {
namespace {

using testing::close;
using testing::numeric_gradient;
using testing::TestRng;

using Graph = std::function<Tensor(const std::vector<Tensor>&)>;

// Compares backward() against central differences for every input.
void expect_gradients_match(const Graph& graph, const std::vector<Tensor>& inputs,
                            double rtol = 1e-4, double atol = 1e-7) {
  std::vector<Tensor> vars;
  for (const Tensor& t : inputs) vars.push_back(t.as_variable());
  const GradientMap grads = backward(graph(vars));
  auto scalar = [&](const std::vector<Tensor>& in) { return graph(in).item(); };
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const std::vector<double> expected = numeric_gradient(scalar, inputs, i);
    const Tensor actual = grads.get_or_zeros(vars[i]);
    ASSERT_EQ(actual.shape(), inputs[i].shape());
    for (std::size_t j = 0; j < expected.size(); ++j) {
      EXPECT_TRUE(close(actual[j], expected[j], rtol, atol))
          << "input " << i << " element " << j << ": backward " << actual[j] << " vs numeric "
          << expected[j];
    }
  }
}

TEST(TensorTest, RejectsInconsistentShape) {
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor({0, 2}, {}), ShapeError);
}

TEST(AddTest, Elementwise) {
  Tensor r = add(Tensor({2}, {1, 2}), Tensor({2}, {3, 4}));
  EXPECT_EQ(r.to_vector(), (std::vector<double>{4, 6}));
}

TEST(AddTest, ZeroIsIdentity) {
  TestRng rng(1);
  Tensor x = rng.tensor({3, 4});
  EXPECT_EQ(add(x, Tensor::zeros(x.shape())).to_vector(), x.to_vector());
}

TEST(AddTest, GradientOfSumIsOnes) {
  TestRng rng(2);
  Tensor a = rng.tensor({2, 3}, -1, 1, true);
  Tensor b = rng.tensor({2, 3});
  const GradientMap g = backward(sum_all(add(a, b)));
  for (double v : g.at(a).data()) EXPECT_EQ(v, 1.0);
  expect_gradients_match([](const auto& in) { return sum_all(add(in[0], in[1])); },
                         {a.detach(), b});
}

TEST(AddTest, BroadcastTrailingDimensions) {
  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor b({2}, {10, 20});
  EXPECT_EQ(add(a, b).to_vector(), (std::vector<double>{11, 22, 13, 24}));
  EXPECT_EQ(add(b, a).to_vector(), (std::vector<double>{11, 22, 13, 24}));
  TestRng rng(3);
  expect_gradients_match([](const auto& in) { return sum_all(mul(add(in[0], in[1]), in[0])); },
                         {rng.tensor({3, 2, 2}), rng.tensor({2, 2})});
}

TEST(AddTest, MismatchNamesBothShapes) {
  try {
    add(Tensor::zeros({2, 3}), Tensor::zeros({2}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2,3]"), std::string::npos);
    EXPECT_NE(msg.find("[2]"), std::string::npos);
  }
}

TEST(MulTest, Elementwise) {
  EXPECT_EQ(mul(Tensor({2}, {2, 3}), Tensor({2}, {4, 5})).to_vector(),
            (std::vector<double>{8, 15}));
  TestRng rng(4);
  Tensor x = rng.tensor({5});
  EXPECT_EQ(mul(x, Tensor::ones({5})).to_vector(), x.to_vector());
}

TEST(MulTest, GradientMatchesFiniteDifferences) {
  TestRng rng(5);
  expect_gradients_match([](const auto& in) { return sum_all(mul(in[0], in[1])); },
                         {rng.tensor({3, 3}), rng.tensor({3, 3})});
  EXPECT_THROW(mul(Tensor::zeros({3}), Tensor::zeros({2})), ShapeError);
}

TEST(Conv2dTest, CountingCase) {
  Tensor out = conv2d(Tensor::ones({1, 3, 3}), Tensor::ones({1, 1, 2, 2}), 1, 0);
  EXPECT_EQ(out.shape(), (Shape{1, 2, 2}));
  for (double v : out.data()) EXPECT_EQ(v, 4.0);
}

TEST(Conv2dTest, IdentityKernel) {
  TestRng rng(6);
  Tensor x = rng.tensor({1, 4, 5});
  EXPECT_EQ(conv2d(x, Tensor::ones({1, 1, 1, 1})).to_vector(), x.to_vector());
}

TEST(Conv2dTest, GradientMatchesFiniteDifferences) {
  TestRng rng(7);
  expect_gradients_match([](const auto& in) { return sum_all(mul(conv2d(in[0], in[1]), conv2d(in[0], in[1]))); },
                         {rng.tensor({2, 5, 5}), rng.tensor({3, 2, 3, 3})});
  expect_gradients_match(
      [](const auto& in) {
        Tensor y = conv2d(in[0], in[1], in[2], 2, 1);
        return sum_all(mul(y, y));
      },
      {rng.tensor({2, 5, 5}), rng.tensor({3, 2, 3, 3}), rng.tensor({3})});
}

TEST(Conv2dTest, IncompatibleGeometryReportsNumbers) {
  try {
    conv2d(Tensor::zeros({1, 4, 4}), Tensor::zeros({1, 1, 3, 3}), 2, 0);
    FAIL() << "expected GeometryError";
  } catch (const GeometryError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("4x4"), std::string::npos);
    EXPECT_NE(msg.find("3x3"), std::string::npos);
    EXPECT_NE(msg.find("stride 2"), std::string::npos);
    EXPECT_NE(msg.find("padding 0"), std::string::npos);
  }
  EXPECT_THROW(conv2d(Tensor::zeros({1, 2, 2}), Tensor::zeros({1, 1, 3, 3})), GeometryError);
  EXPECT_THROW(conv2d(Tensor::zeros({2, 4, 4}), Tensor::zeros({1, 1, 3, 3})), ShapeError);
}

TEST(Conv2dTest, OutputShapeFormulaOverRandomGeometries) {
  TestRng rng(8);
  int checked = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t h = 1 + rng.index(9), w = 1 + rng.index(9);
    const std::size_t kh = 1 + rng.index(4), kw = 1 + rng.index(4);
    const std::size_t stride = 1 + rng.index(3), pad = rng.index(3);
    const std::size_t ph = h + 2 * pad, pw = w + 2 * pad;
    const bool legal = kh <= ph && kw <= pw && (ph - kh) % stride == 0 && (pw - kw) % stride == 0;
    Tensor x = Tensor::ones({2, h, w});
    Tensor k = Tensor::ones({3, 2, kh, kw});
    if (!legal) {
      EXPECT_THROW(conv2d(x, k, stride, pad), GeometryError);
      continue;
    }
    Tensor y = conv2d(x, k, stride, pad);
    EXPECT_EQ(y.shape(), (Shape{3, (ph - kh) / stride + 1, (pw - kw) / stride + 1}));
    ++checked;
  }
  EXPECT_GT(checked, 50);
}

TEST(ReluTest, Definition) {
  EXPECT_EQ(relu(Tensor({3}, {-1, 0, 2})).to_vector(), (std::vector<double>{0, 0, 2}));
}

TEST(ReluTest, SaturatedInputHasZeroGradient) {
  Tensor x({3}, {-1, -2, -0.5}, true);
  Tensor y = relu(x);
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
  for (double v : backward(sum_all(y)).at(x).to_vector()) EXPECT_EQ(v, 0.0);
}

TEST(ReluTest, GradientAwayFromKink) {
  TestRng rng(9);
  std::vector<double> values = rng.uniform_vector(12);
  for (double& v : values) {
    if (std::abs(v) < 1e-3) v = 0.5;
  }
  expect_gradients_match([](const auto& in) { return sum_all(mul(relu(in[0]), in[0])); },
                         {Tensor({12}, values)});
}

TEST(MaxPoolTest, Definition) {
  Tensor y = maxpool2d(Tensor({1, 2, 2}, {1, 2, 3, 4}), 2, 2);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1}));
  EXPECT_EQ(y.item(), 4.0);
}

TEST(MaxPoolTest, TiesRouteGradientToFirstElement) {
  Tensor x = Tensor::full({1, 4, 4}, 3.0, true);
  Tensor y = maxpool2d(x, 2, 2);
  for (double v : y.data()) EXPECT_EQ(v, 3.0);
  const Tensor g = backward(sum_all(y)).at(x);
  const std::vector<double> expected{1, 0, 1, 0, 0, 0, 0, 0, 1, 0, 1, 0, 0, 0, 0, 0};
  EXPECT_EQ(g.to_vector(), expected);
}

TEST(MaxPoolTest, GradientOnDistinctElements) {
  TestRng rng(10);
  std::vector<double> values(2 * 6 * 6);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = 0.01 * static_cast<double>((i * 37) % values.size());
  expect_gradients_match([](const auto& in) { return sum_all(mul(maxpool2d(in[0], 2, 2), in[1])); },
                         {Tensor({2, 6, 6}, values), rng.tensor({2, 3, 3})});
  expect_gradients_match([](const auto& in) { return sum_all(mul(maxpool2d(in[0], 3, 1), in[1])); },
                         {Tensor({2, 6, 6}, values), rng.tensor({2, 4, 4})});
}

TEST(MaxPoolTest, GeometryErrors) {
  EXPECT_THROW(maxpool2d(Tensor::zeros({1, 2, 2}), 3, 1), GeometryError);
  EXPECT_THROW(maxpool2d(Tensor::zeros({1, 5, 5}), 2, 2), GeometryError);
}

TEST(DenseTest, IdentityAndArithmetic) {
  Tensor x({3}, {1, -2, 5});
  Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  EXPECT_EQ(dense(x, eye, Tensor::zeros({3})).to_vector(), x.to_vector());
  EXPECT_EQ(dense(Tensor({2}, {2, 3}), Tensor({1, 2}, {1, 1}), Tensor({1}, {0})).item(), 5.0);
}

TEST(DenseTest, GradientMatchesFiniteDifferences) {
  TestRng rng(11);
  expect_gradients_match(
      [](const auto& in) {
        Tensor y = dense(in[0], in[1], in[2]);
        return sum_all(mul(y, y));
      },
      {rng.tensor({4}), rng.tensor({3, 4}), rng.tensor({3})});
  EXPECT_THROW(dense(Tensor::zeros({3}), Tensor::zeros({2, 4}), Tensor::zeros({2})), ShapeError);
}

TEST(SoftmaxCrossEntropyTest, UniformLogits) {
  EXPECT_NEAR(softmax_cross_entropy(Tensor::zeros({4}), 2).item(), std::log(4.0), 1e-15);
}

TEST(SoftmaxCrossEntropyTest, LargeLogitsAreStable) {
  const double loss = softmax_cross_entropy(Tensor({2}, {1000, 0}), 0).item();
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_NEAR(loss, 0.0, 1e-12);
  EXPECT_GE(loss, 0.0);
}

TEST(SoftmaxCrossEntropyTest, GradientIsSoftmaxMinusOneHot) {
  Tensor logits({3}, {0.2, -1.0, 0.7}, true);
  const Tensor g = backward(softmax_cross_entropy(logits, 1)).at(logits);
  const std::vector<double> p = softmax(logits.data());
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(g[i], p[i] - (i == 1 ? 1.0 : 0.0), 1e-15);
  expect_gradients_match([](const auto& in) { return softmax_cross_entropy(in[0], 1); },
                         {logits.detach()});
  EXPECT_THROW(softmax_cross_entropy(logits, 3), ValueError);
}

TEST(SumAllTest, Values) {
  EXPECT_EQ(sum_all(Tensor({3}, {1, 2, 3})).item(), 6.0);
  EXPECT_EQ(sum_all(Tensor::zeros({2, 2})).item(), 0.0);
  TestRng rng(12);
  expect_gradients_match([](const auto& in) { return sum_all(in[0]); }, {rng.tensor({2, 3, 2})});
}

TEST(MiscOpsTest, ChannelSumReshapeGatherSmoothL1) {
  TestRng rng(13);
  Tensor x = rng.tensor({3, 2, 2});
  Tensor cs = channel_sum(x);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_DOUBLE_EQ(cs[k], x[4 * k] + x[4 * k + 1] + x[4 * k + 2] + x[4 * k + 3]);
  }
  const std::vector<std::size_t> idx{5, 0, 5, 11};
  Tensor gathered = gather(x, idx, {2, 2});
  EXPECT_EQ(gathered[0], x[5]);
  EXPECT_EQ(gathered[3], x[11]);
  EXPECT_EQ(smooth_l1(Tensor({3}, {0.5, -2.0, 1.0})).to_vector(),
            (std::vector<double>{0.125, 1.5, 0.5}));
  expect_gradients_match(
      [idx](const auto& in) {
        Tensor g = gather(reshape(in[0], {12}), idx, {4});
        return add(sum_all(mul(channel_sum(in[0]), channel_sum(in[0]))),
                   sum_all(smooth_l1(scale(g, 3.0))));
      },
      {x});
}

TEST(BackwardTest, LinearAndQuadraticCases) {
  Tensor x({2, 2}, {1, -1, 2, 0}, true);
  for (double v : backward(sum_all(x)).at(x).to_vector()) EXPECT_EQ(v, 1.0);
  Tensor y({2}, {1, 2}, true);
  EXPECT_EQ(backward(sum_all(mul(y, y))).at(y).to_vector(), (std::vector<double>{2, 4}));
  // Linearity in a scalar factor.
  EXPECT_EQ(backward(sum_all(scale(x, -2.5))).at(x).to_vector(),
            (std::vector<double>(4, -2.5)));
}

TEST(BackwardTest, Errors) {
  Tensor x({2}, {1, 2}, true);
  EXPECT_THROW(backward(mul(x, x)), GraphError);
  EXPECT_THROW(backward(sum_all(Tensor({2}, {1, 2}))), GraphError);
  NoGradGuard guard;
  EXPECT_THROW(backward(sum_all(x)), GraphError);
}

TEST(BackwardTest, SharedSubexpressionAccumulatesOnce) {
  Tensor x({1}, {3.0}, true);
  Tensor y = mul(x, x);
  Tensor z = add(mul(y, x), y);  // x^3 + x^2
  EXPECT_DOUBLE_EQ(backward(sum_all(z)).at(x).item(), 27.0 + 6.0);
}

TEST(TapeTest, TopologicalAndVisitsEachNodeOnce) {
  TestRng rng(14);
  Tensor x = rng.tensor({1, 5, 5}, -1, 1, true);
  Tensor k = rng.tensor({2, 1, 3, 3}, -1, 1, true);
  Tensor h = relu(conv2d(x, k, 1, 1));
  Tensor loss = sum_all(add(h, maxpool2d(h, 1, 1)));
  const Tape tape = record_tape(loss);
  std::set<std::uint64_t> seen{x.id(), k.id()};
  std::set<std::uint64_t> outputs;
  for (const TapeEntry& node : tape.nodes) {
    for (std::uint64_t in : node.inputs) EXPECT_TRUE(seen.count(in)) << node.kind;
    EXPECT_TRUE(outputs.insert(node.output).second);
    seen.insert(node.output);
  }
  EXPECT_EQ(tape.nodes.back().output, loss.id());
  EXPECT_EQ(tape.nodes.size(), 5u);
}

TEST(DeterminismTest, IdenticalInputsGiveBitIdenticalGradients) {
  auto run = [] {
    TestRng rng(15);
    Tensor x = rng.tensor({2, 6, 6}, -1, 1, true);
    Tensor k = rng.tensor({3, 2, 3, 3}, -1, 1, true);
    Tensor y = maxpool2d(relu(conv2d(x, k, 1, 1)), 2, 2);
    GradientMap g = backward(sum_all(mul(y, y)));
    return std::make_pair(g.at(x).to_vector(), g.at(k).to_vector());
  };
  EXPECT_EQ(run(), run());
}

TEST(NoGradTest, NoGraphRecorded) {
  Tensor x({2}, {1, 2}, true);
  NoGradGuard guard;
  Tensor y = mul(x, x);
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(y.is_leaf());
}

}  // namespace
}  // namespace vdnet
