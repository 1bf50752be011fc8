#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "support/oracles.hpp"
#include "vdnet/network.hpp"

namespace vdnet {
namespace {

using testing::TestRng;

Model small_cnn(std::size_t channels = 1, std::size_t side = 8, std::size_t classes = 2) {
  Model m({channels, side, side},
          {LayerSpec::conv(channels, 4, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool(2, 2),
           LayerSpec::conv(4, 6, 3, 1, 1), LayerSpec::relu(), LayerSpec::gap(), LayerSpec::dense(6, classes)});
  m.initialize(3);
  return m;
}

// Two linearly separable classes: brightness on the left or on the right half.
std::vector<LabeledSample> separable_patches(std::size_t n, std::uint64_t seed) {
  TestRng rng(seed);
  std::vector<LabeledSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % 2;
    std::vector<double> px(64);
    for (std::size_t y = 0; y < 8; ++y) {
      for (std::size_t x = 0; x < 8; ++x) {
        const bool lit = (x < 4) == (label == 0);
        px[y * 8 + x] = (lit ? 0.8 : 0.2) + rng.uniform(-0.1, 0.1);
      }
    }
    out.push_back({Tensor({1, 8, 8}, px), label});
  }
  return out;
}

TEST(ModelTest, ShapesComposeAndGapMatchesFilters) {
  const Model m = small_cnn();
  EXPECT_EQ(m.layer_shapes()[3], (Shape{6, 4, 4}));
  EXPECT_EQ(m.layer_shapes()[5], (Shape{6}));
  EXPECT_EQ(m.output_shape(), (Shape{2}));
  EXPECT_EQ(*m.last_conv_index(), 3u);
  EXPECT_EQ(m.parameter_count(), 4u * 9 + 4 + 6 * 4 * 9 + 6 + 6 * 2 + 2);
  for (const auto& name : m.parameter_names()) EXPECT_TRUE(m.parameters().count(name));
}

TEST(ModelTest, RejectsNonComposingLayers) {
  EXPECT_THROW(Model({1, 8, 8}, {LayerSpec::conv(2, 4, 3)}), ShapeError);
  EXPECT_THROW(Model({1, 8, 8}, {LayerSpec::gap(), LayerSpec::dense(2, 2)}), ShapeError);
  EXPECT_THROW(Model({1, 5, 5}, {LayerSpec::maxpool(2, 2)}), GeometryError);
}

TEST(ModelTest, InitializationIsSeeded) {
  Model a = small_cnn();
  Model b = small_cnn();
  EXPECT_TRUE(a.same_as(b));
  b.initialize(4);
  EXPECT_FALSE(a.same_as(b));
  for (double v : a.parameter("layer0.bias").data()) EXPECT_EQ(v, 0.0);
}

TEST(ForwardTest, CaptureContract) {
  const Model m = small_cnn();
  TestRng rng(1);
  const Tensor x = rng.tensor({1, 8, 8});
  const ForwardResult plain = forward(m, x);
  EXPECT_TRUE(plain.captured.empty());
  EXPECT_EQ(plain.output.shape(), (Shape{2}));
  const ForwardResult cap = forward(m, x, {*m.last_conv_index()});
  ASSERT_EQ(cap.captured.size(), 1u);
  EXPECT_EQ(cap.captured.at(3).shape(), m.layer_shapes()[3]);
  EXPECT_EQ(cap.output.to_vector(), plain.output.to_vector());
}

TEST(ForwardTest, SingleConvCaptureEqualsDirectConvolution) {
  Model m({2, 6, 6}, {LayerSpec::conv(2, 3, 3, 1, 1)});
  m.initialize(9);
  TestRng rng(2);
  const Tensor x = rng.tensor({2, 6, 6});
  const Tensor direct = conv2d(x, m.parameter("layer0.weight"), m.parameter("layer0.bias"), 1, 1);
  EXPECT_EQ(forward(m, x, {0}).captured.at(0).to_vector(), direct.to_vector());
}

TEST(ForwardTest, ShapeMismatchNamesInput) {
  const Model m = small_cnn();
  EXPECT_THROW(forward(m, Tensor::zeros({1, 9, 9})), ShapeError);
  // The convolutional prefix accepts larger inputs with the same channels.
  EXPECT_EQ(forward_prefix(m, Tensor::zeros({1, 16, 12}), 4).shape(), (Shape{6, 8, 6}));
  try {
    forward_prefix(m, Tensor::zeros({1, 9, 9}), 2);
    FAIL();
  } catch (const GeometryError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 2 (maxpool)"), std::string::npos) << e.what();
  }
}

TEST(SgdTest, PlainStep) {
  SgdMomentumState state{0.1, 0.0, {}};
  const NamedTensors p = sgd_step(state, {{"w", Tensor::scalar(1.0)}}, {{"w", Tensor::scalar(2.0)}});
  EXPECT_DOUBLE_EQ(p.at("w").item(), 0.8);
}

TEST(SgdTest, ZeroGradientStep) {
  SgdMomentumState fresh{0.1, 0.9, {}};
  const NamedTensors p = sgd_step(fresh, {{"w", Tensor({2}, {1, -1})}}, {{"w", Tensor::zeros({2})}});
  EXPECT_EQ(p.at("w").to_vector(), (std::vector<double>{1, -1}));

  SgdMomentumState moving{0.1, 0.9, {{"w", Tensor({2}, {0.5, -2.0})}}};
  sgd_step(moving, {{"w", Tensor({2}, {1, -1})}}, {{"w", Tensor::zeros({2})}});
  EXPECT_EQ(moving.velocity.at("w").to_vector(), (std::vector<double>{0.9 * 0.5, 0.9 * -2.0}));
}

TEST(SgdTest, TwoMomentumStepsFollowRecurrence) {
  const double lr = 0.05, mu = 0.9, g = 1.5, p0 = 2.0;
  SgdMomentumState state{lr, mu, {}};
  NamedTensors p{{"w", Tensor::scalar(p0)}};
  p = sgd_step(state, p, {{"w", Tensor::scalar(g)}});
  p = sgd_step(state, p, {{"w", Tensor::scalar(g)}});
  // v1 = -lr g, p1 = p0 + v1, v2 = mu v1 - lr g, p2 = p1 + v2.
  const double v1 = -lr * g;
  const double p1 = p0 + v1;
  const double v2 = mu * v1 - lr * g;
  EXPECT_EQ(p.at("w").item(), p1 + v2);
  EXPECT_EQ(state.velocity.at("w").item(), v2);
}

TEST(SgdTest, KeyMismatch) {
  SgdMomentumState state;
  EXPECT_THROW(sgd_step(state, {{"a", Tensor::scalar(1)}}, {{"b", Tensor::scalar(1)}}), ValueError);
}

TEST(BatchTest, CeilingBatchCountAndCoverage) {
  const auto batches = make_batches(100, 32, 5);
  ASSERT_EQ(batches.size(), 4u);
  EXPECT_EQ(batches.back().size(), 4u);
  std::vector<int> seen(100, 0);
  for (const auto& b : batches) {
    for (std::size_t i : b) ++seen[i];
  }
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_EQ(make_batches(64, 32, 1).size(), 2u);
}

TEST(TrainClassifierTest, SeparablePatchesReachFullAccuracy) {
  Model m = small_cnn();
  const auto data = separable_patches(64, 10);
  Schedule schedule;
  schedule.epochs = 50;
  schedule.learning_rate = 0.05;
  const TrainingReport report = train_classifier(m, data, schedule);
  ASSERT_EQ(report.epochs.size(), 50u);
  EXPECT_LT(report.epochs.back().loss, report.epochs.front().loss);
  EXPECT_EQ(evaluate_accuracy(m, data), 1.0);
}

TEST(TrainClassifierTest, ZeroLearningRateIsANullRun) {
  Model m = small_cnn();
  const Model before = m;
  Schedule schedule;
  schedule.epochs = 3;
  schedule.learning_rate = 0.0;
  const TrainingReport report = train_classifier(m, separable_patches(40, 1), schedule);
  EXPECT_TRUE(m.same_as(before));
  EXPECT_EQ(report.epochs[0].loss, report.epochs[1].loss);
  EXPECT_EQ(report.epochs[1].loss, report.epochs[2].loss);
}

TEST(TrainClassifierTest, DeterministicUnderSeed) {
  const auto data = separable_patches(40, 2);
  Schedule schedule;
  schedule.epochs = 4;
  Model a = small_cnn(), b = small_cnn();
  const auto ra = train_classifier(a, data, schedule);
  const auto rb = train_classifier(b, data, schedule);
  EXPECT_TRUE(a.same_as(b));
  for (std::size_t e = 0; e < 4; ++e) EXPECT_EQ(ra.epochs[e].loss, rb.epochs[e].loss);
}

TEST(TrainClassifierTest, Errors) {
  Model m = small_cnn();
  EXPECT_THROW(train_classifier(m, std::vector<LabeledSample>{}, Schedule{}), ValueError);
  Schedule wild;
  wild.epochs = 20;
  wild.learning_rate = 1e150;
  EXPECT_THROW(train_classifier(m, separable_patches(8, 3), wild), DivergenceError);
}

TEST(CheckpointTest, RoundTripIsBitExact) {
  Model m = small_cnn();
  m.attributes()["role"] = "test";
  SgdMomentumState state{0.01, 0.9, {{"layer0.bias", Tensor({4}, {1e-300, -0.0, 3.5, 1.0 / 3.0})}}};
  const std::string bytes = encode_checkpoint(m, &state);
  EXPECT_EQ(bytes.substr(0, 4), "VDN1");
  const Checkpoint ckpt = decode_checkpoint(bytes);
  EXPECT_TRUE(ckpt.model.same_as(m));
  EXPECT_EQ(ckpt.model.attributes()["role"], "test");
  ASSERT_TRUE(ckpt.optimizer.has_value());
  EXPECT_EQ(encode_checkpoint(ckpt.model, &*ckpt.optimizer), bytes);
}

TEST(CheckpointTest, TruncatedAndVersionErrors) {
  const std::string bytes = encode_checkpoint(small_cnn());
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, 20)), FormatError);
  EXPECT_THROW(decode_checkpoint(bytes + "x"), FormatError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), FormatError);
  std::string versioned = bytes;
  const auto pos = versioned.find("\"version\":1");
  ASSERT_NE(pos, std::string::npos);
  versioned[pos + 10] = '7';
  EXPECT_THROW(decode_checkpoint(versioned), VersionError);
}

TEST(CheckpointTest, TrainedModelReloadsWithIdenticalAccuracy) {
  Model m = small_cnn();
  const auto train = separable_patches(40, 4);
  const auto held_out = separable_patches(20, 5);
  Schedule schedule;
  schedule.epochs = 5;
  SgdMomentumState state;
  train_classifier(m, train, schedule, &state);
  const auto path = std::filesystem::temp_directory_path() / "vdnet_network_test" / "clf.vdn";
  save_checkpoint(m, &state, path);
  const Checkpoint ckpt = load_checkpoint(path);
  EXPECT_TRUE(ckpt.model.same_as(m));
  EXPECT_EQ(evaluate_accuracy(ckpt.model, held_out), evaluate_accuracy(m, held_out));
  EXPECT_THROW(load_checkpoint(path.parent_path() / "missing.vdn"), IoError);
}

}  // namespace
}  // namespace vdnet
