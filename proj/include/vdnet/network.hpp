#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vdnet/tensor.hpp"

namespace vdnet {

enum class LayerKind { kConv, kRelu, kMaxPool, kGap, kDense, kFlatten };

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

/// One layer of a sequential model. Only the fields of its kind are used.
struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  std::size_t in_channels = 0;   // conv
  std::size_t out_channels = 0;  // conv
  std::size_t kernel = 0;        // conv
  std::size_t stride = 1;        // conv, maxpool
  std::size_t padding = 0;       // conv
  std::size_t window = 0;        // maxpool
  std::size_t in_features = 0;   // dense
  std::size_t out_features = 0;  // dense

  static LayerSpec conv(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride = 1,
                        std::size_t padding = 0);
  static LayerSpec relu();
  static LayerSpec maxpool(std::size_t window, std::size_t stride);
  /// Spatial mean per channel: [c,h,w] -> [c].
  static LayerSpec gap();
  static LayerSpec dense(std::size_t in, std::size_t out);
  static LayerSpec flatten();

  nlohmann::json to_json() const;
  static LayerSpec from_json(const nlohmann::json& j);
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

using NamedTensors = std::map<std::string, Tensor>;

/// Sequential network with named parameters. Layer shapes are checked
/// against the declared input shape at construction.
class Model {
 public:
  Model() = default;
  Model(Shape input_shape, std::vector<LayerSpec> layers, std::vector<std::string> class_names = {});

  /// He-normal weights, zero biases, from a fixed seed.
  void initialize(std::uint64_t seed);

  const Shape& input_shape() const { return input_shape_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  /// Declared output shape of every layer.
  const std::vector<Shape>& layer_shapes() const { return layer_shapes_; }
  const Shape& output_shape() const { return layer_shapes_.back(); }

  /// Parameter names in declaration order.
  const std::vector<std::string>& parameter_names() const { return parameter_order_; }
  const Tensor& parameter(const std::string& name) const;
  const NamedTensors& parameters() const { return parameters_; }
  void set_parameter(const std::string& name, const Tensor& value);
  void set_parameters(const NamedTensors& values);
  std::size_t parameter_count() const;

  /// Index of the last convolution layer, if any.
  std::optional<std::size_t> last_conv_index() const;

  /// Free-form metadata persisted with checkpoints.
  nlohmann::json& attributes() { return attributes_; }
  const nlohmann::json& attributes() const { return attributes_; }

  /// Same architecture and bit-identical parameters.
  bool same_as(const Model& other) const;

 private:
  Shape input_shape_;
  std::vector<LayerSpec> layers_;
  std::vector<std::string> class_names_;
  std::vector<Shape> layer_shapes_;
  std::vector<std::string> parameter_order_;
  NamedTensors parameters_;
  nlohmann::json attributes_ = nlohmann::json::object();
};

struct ForwardResult {
  Tensor output;
  std::map<std::size_t, Tensor> captured;  // layer index -> that layer's output
};

/// Runs the model. `input` must match the declared input shape.
ForwardResult forward(const Model& model, const Tensor& input, const std::set<std::size_t>& capture = {});

/// Runs layers [0, last_layer] on an input of any spatial extent the layers
/// accept. Used to apply a patch-trained convolutional prefix to whole scenes.
Tensor forward_prefix(const Model& model, const Tensor& input, std::size_t last_layer);

/// Classical momentum: v <- momentum * v - lr * g; p <- p + v.
struct SgdMomentumState {
  double learning_rate = 0.01;
  double momentum = 0.9;
  NamedTensors velocity;
};

/// Applies one momentum step; missing velocities start at zero.
NamedTensors sgd_step(SgdMomentumState& state, const NamedTensors& params, const NamedTensors& grads);

struct Schedule {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  /// Learning rate is multiplied by decay_factor at the start of each listed epoch.
  std::vector<std::size_t> decay_epochs;
  double decay_factor = 0.1;
  std::uint64_t seed = 1;

  double learning_rate_at(std::size_t epoch) const;
  nlohmann::json to_json() const;
};

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  double learning_rate = 0.0;
};

struct TrainingReport {
  std::vector<EpochStats> epochs;
  nlohmann::json to_json() const;
};

struct LabeledSample {
  Tensor input;
  std::size_t label = 0;
};

/// Shuffled minibatches covering [0, n): ceil(n / batch_size) groups.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed);

/// Extra per-sample loss term computed from captured activations and added
/// to the cross-entropy. Returns an undefined tensor to contribute nothing.
struct AuxiliaryLoss {
  std::set<std::size_t> capture;
  std::function<Tensor(const ForwardResult&, const LabeledSample&)> term;
};

/// Mean softmax cross-entropy minimisation with minibatch SGD + momentum.
/// Epoch loss and accuracy are measured on each sample as it is visited.
TrainingReport train_classifier(Model& model, std::span<const LabeledSample> dataset, const Schedule& schedule,
                                SgdMomentumState* final_state = nullptr, const AuxiliaryLoss* auxiliary = nullptr);

std::size_t predict_class(const Model& model, const Tensor& input);
double evaluate_accuracy(const Model& model, std::span<const LabeledSample> dataset);

/// Checkpoint layout: "VDN1", u32 little-endian header length, UTF-8 JSON
/// header, then every parameter (declaration order) and optimizer velocity
/// as little-endian IEEE-754 doubles.
std::string encode_checkpoint(const Model& model, const SgdMomentumState* state = nullptr);

struct Checkpoint {
  Model model;
  std::optional<SgdMomentumState> optimizer;
};

Checkpoint decode_checkpoint(std::string_view bytes);
void save_checkpoint(const Model& model, const SgdMomentumState* state, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vdnet
