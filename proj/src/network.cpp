#include "vdnet/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "vdnet/rng.hpp"

namespace vdnet {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kGap: return "gap";
    case LayerKind::kDense: return "dense";
    case LayerKind::kFlatten: return "flatten";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(const std::string& name) {
  for (LayerKind k : {LayerKind::kConv, LayerKind::kRelu, LayerKind::kMaxPool, LayerKind::kGap,
                      LayerKind::kDense, LayerKind::kFlatten}) {
    if (to_string(k) == name) return k;
  }
  throw FormatError("unknown layer kind '" + name + "'");
}

LayerSpec LayerSpec::conv(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                          std::size_t padding) {
  LayerSpec s;
  s.kind = LayerKind::kConv;
  s.in_channels = in;
  s.out_channels = out;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  return s;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::maxpool(std::size_t window, std::size_t stride) {
  LayerSpec s;
  s.kind = LayerKind::kMaxPool;
  s.window = window;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::gap() {
  LayerSpec s;
  s.kind = LayerKind::kGap;
  return s;
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
  LayerSpec s;
  s.kind = LayerKind::kDense;
  s.in_features = in;
  s.out_features = out;
  return s;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = LayerKind::kFlatten;
  return s;
}

nlohmann::json LayerSpec::to_json() const {
  nlohmann::json j{{"kind", vdnet::to_string(kind)}};
  switch (kind) {
    case LayerKind::kConv:
      j.update({{"in_channels", in_channels}, {"out_channels", out_channels}, {"kernel", kernel},
                {"stride", stride}, {"padding", padding}});
      break;
    case LayerKind::kMaxPool:
      j.update({{"window", window}, {"stride", stride}});
      break;
    case LayerKind::kDense:
      j.update({{"in_features", in_features}, {"out_features", out_features}});
      break;
    default:
      break;
  }
  return j;
}

LayerSpec LayerSpec::from_json(const nlohmann::json& j) {
  const LayerKind kind = layer_kind_from_string(j.at("kind"));
  switch (kind) {
    case LayerKind::kConv:
      return conv(j.at("in_channels"), j.at("out_channels"), j.at("kernel"), j.at("stride"), j.at("padding"));
    case LayerKind::kMaxPool:
      return maxpool(j.at("window"), j.at("stride"));
    case LayerKind::kDense:
      return dense(j.at("in_features"), j.at("out_features"));
    case LayerKind::kGap:
      return gap();
    case LayerKind::kFlatten:
      return flatten();
    case LayerKind::kRelu:
      return relu();
  }
  return relu();
}

namespace {

std::string layer_label(std::size_t index, const LayerSpec& spec) {
  return "layer " + std::to_string(index) + " (" + to_string(spec.kind) + ")";
}

// Output shape of one layer, or ShapeError/GeometryError naming the layer.
Shape layer_output_shape(std::size_t index, const LayerSpec& spec, const Shape& in) {
  auto fail = [&](const std::string& why) -> Shape {
    throw ShapeError(layer_label(index, spec) + ": " + why + ", input " + shape_to_string(in));
  };
  switch (spec.kind) {
    case LayerKind::kConv: {
      if (in.size() != 3 || in[0] != spec.in_channels) {
        return fail("expects [" + std::to_string(spec.in_channels) + ",h,w]");
      }
      const std::size_t ph = in[1] + 2 * spec.padding, pw = in[2] + 2 * spec.padding;
      if (spec.kernel == 0 || spec.stride == 0 || spec.kernel > ph || spec.kernel > pw ||
          (ph - spec.kernel) % spec.stride || (pw - spec.kernel) % spec.stride) {
        throw GeometryError(layer_label(index, spec) + ": kernel " + std::to_string(spec.kernel) +
                            ", stride " + std::to_string(spec.stride) + ", padding " +
                            std::to_string(spec.padding) + " do not fit input " + shape_to_string(in));
      }
      return {spec.out_channels, (ph - spec.kernel) / spec.stride + 1, (pw - spec.kernel) / spec.stride + 1};
    }
    case LayerKind::kRelu:
      return in;
    case LayerKind::kMaxPool: {
      if (in.size() != 3) return fail("expects [c,h,w]");
      if (spec.window == 0 || spec.stride == 0 || spec.window > in[1] || spec.window > in[2] ||
          (in[1] - spec.window) % spec.stride || (in[2] - spec.window) % spec.stride) {
        throw GeometryError(layer_label(index, spec) + ": window " + std::to_string(spec.window) +
                            ", stride " + std::to_string(spec.stride) + " do not tile input " +
                            shape_to_string(in));
      }
      return {in[0], (in[1] - spec.window) / spec.stride + 1, (in[2] - spec.window) / spec.stride + 1};
    }
    case LayerKind::kGap:
      if (in.size() != 3) return fail("expects [c,h,w]");
      return {in[0]};
    case LayerKind::kDense:
      if (in.size() != 1 || in[0] != spec.in_features) {
        return fail("expects [" + std::to_string(spec.in_features) + "]");
      }
      return {spec.out_features};
    case LayerKind::kFlatten:
      return {shape_numel(in)};
  }
  return in;
}

std::string weight_name(std::size_t index) { return "layer" + std::to_string(index) + ".weight"; }
std::string bias_name(std::size_t index) { return "layer" + std::to_string(index) + ".bias"; }

}  // namespace

Model::Model(Shape input_shape, std::vector<LayerSpec> layers, std::vector<std::string> class_names)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)), class_names_(std::move(class_names)) {
  if (layers_.empty()) throw ShapeError("a model needs at least one layer");
  Shape current = input_shape_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    current = layer_output_shape(i, layers_[i], current);
    layer_shapes_.push_back(current);
    const LayerSpec& s = layers_[i];
    if (s.kind == LayerKind::kConv) {
      parameter_order_.push_back(weight_name(i));
      parameters_[weight_name(i)] = Tensor::zeros({s.out_channels, s.in_channels, s.kernel, s.kernel}, true);
      parameter_order_.push_back(bias_name(i));
      parameters_[bias_name(i)] = Tensor::zeros({s.out_channels}, true);
    } else if (s.kind == LayerKind::kDense) {
      parameter_order_.push_back(weight_name(i));
      parameters_[weight_name(i)] = Tensor::zeros({s.out_features, s.in_features}, true);
      parameter_order_.push_back(bias_name(i));
      parameters_[bias_name(i)] = Tensor::zeros({s.out_features}, true);
    }
  }
}

void Model::initialize(std::uint64_t seed) {
  Rng rng(seed);
  for (const std::string& name : parameter_order_) {
    const Tensor& current = parameters_.at(name);
    std::vector<double> values(current.numel(), 0.0);
    if (name.ends_with(".weight")) {
      const Shape& s = current.shape();
      const std::size_t fan_in = current.numel() / s[0];
      const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (double& v : values) v = stddev * rng.normal();
    }
    parameters_[name] = Tensor(current.shape(), std::move(values), true);
  }
}

const Tensor& Model::parameter(const std::string& name) const {
  auto it = parameters_.find(name);
  if (it == parameters_.end()) throw ValueError("model has no parameter '" + name + "'");
  return it->second;
}

void Model::set_parameter(const std::string& name, const Tensor& value) {
  const Tensor& current = parameter(name);
  if (current.shape() != value.shape()) {
    throw ShapeError("parameter '" + name + "' has shape " + shape_to_string(current.shape()) +
                     ", got " + shape_to_string(value.shape()));
  }
  parameters_[name] = value.requires_grad() && value.is_leaf() ? value : value.as_variable();
}

void Model::set_parameters(const NamedTensors& values) {
  for (const auto& [name, value] : values) set_parameter(name, value);
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : parameters_) n += t.numel();
  return n;
}

std::optional<std::size_t> Model::last_conv_index() const {
  for (std::size_t i = layers_.size(); i-- > 0;) {
    if (layers_[i].kind == LayerKind::kConv) return i;
  }
  return std::nullopt;
}

bool Model::same_as(const Model& other) const {
  if (input_shape_ != other.input_shape_ || layers_ != other.layers_ ||
      parameter_order_ != other.parameter_order_ || class_names_ != other.class_names_) {
    return false;
  }
  for (const std::string& name : parameter_order_) {
    auto a = parameters_.at(name).data();
    auto b = other.parameters_.at(name).data();
    if (a.size() != b.size() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

namespace {

Tensor apply_layer(const Model& model, std::size_t i, const Tensor& x) {
  const LayerSpec& s = model.layers()[i];
  try {
    switch (s.kind) {
      case LayerKind::kConv:
        return conv2d(x, model.parameter(weight_name(i)), model.parameter(bias_name(i)), s.stride, s.padding);
      case LayerKind::kRelu:
        return relu(x);
      case LayerKind::kMaxPool:
        return maxpool2d(x, s.window, s.stride);
      case LayerKind::kGap: {
        if (x.rank() != 3) throw ShapeError("expects [c,h,w], got " + shape_to_string(x.shape()));
        return scale(channel_sum(x), 1.0 / static_cast<double>(x.dim(1) * x.dim(2)));
      }
      case LayerKind::kDense:
        return dense(x, model.parameter(weight_name(i)), model.parameter(bias_name(i)));
      case LayerKind::kFlatten:
        return reshape(x, {x.numel()});
    }
  } catch (const GeometryError& e) {
    throw GeometryError(layer_label(i, s) + ": " + e.what());
  } catch (const ShapeError& e) {
    throw ShapeError(layer_label(i, s) + ": " + e.what());
  }
  return x;
}

}  // namespace

ForwardResult forward(const Model& model, const Tensor& input, const std::set<std::size_t>& capture) {
  if (input.shape() != model.input_shape()) {
    throw ShapeError("model input expects " + shape_to_string(model.input_shape()) + ", got " +
                     shape_to_string(input.shape()));
  }
  ForwardResult result;
  Tensor x = input;
  for (std::size_t i = 0; i < model.layers().size(); ++i) {
    x = apply_layer(model, i, x);
    if (capture.count(i)) result.captured.emplace(i, x);
  }
  result.output = x;
  return result;
}

Tensor forward_prefix(const Model& model, const Tensor& input, std::size_t last_layer) {
  if (last_layer >= model.layers().size()) {
    throw ValueError("layer " + std::to_string(last_layer) + " does not exist");
  }
  if (input.rank() != model.input_shape().size() || input.dim(0) != model.input_shape()[0]) {
    throw ShapeError("model input expects " + std::to_string(model.input_shape()[0]) +
                     " channels, got " + shape_to_string(input.shape()));
  }
  Tensor x = input;
  for (std::size_t i = 0; i <= last_layer; ++i) x = apply_layer(model, i, x);
  return x;
}

NamedTensors sgd_step(SgdMomentumState& state, const NamedTensors& params, const NamedTensors& grads) {
  if (params.size() != grads.size() ||
      !std::equal(params.begin(), params.end(), grads.begin(),
                  [](const auto& a, const auto& b) { return a.first == b.first; })) {
    throw ValueError("sgd_step: parameter and gradient keys differ");
  }
  NamedTensors updated;
  for (const auto& [name, p] : params) {
    const Tensor& g = grads.at(name);
    if (g.shape() != p.shape()) {
      throw ShapeError("sgd_step: gradient for '" + name + "' has shape " + shape_to_string(g.shape()));
    }
    auto it = state.velocity.find(name);
    std::vector<double> v = it == state.velocity.end() ? std::vector<double>(p.numel(), 0.0) : it->second.to_vector();
    std::vector<double> next = p.to_vector();
    auto gv = g.data();
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = state.momentum * v[i] - state.learning_rate * gv[i];
      next[i] += v[i];
    }
    state.velocity[name] = Tensor(p.shape(), std::move(v));
    updated[name] = Tensor(p.shape(), std::move(next), true);
  }
  return updated;
}

double Schedule::learning_rate_at(std::size_t epoch) const {
  double lr = learning_rate;
  for (std::size_t e : decay_epochs) {
    if (epoch >= e) lr *= decay_factor;
  }
  return lr;
}

nlohmann::json Schedule::to_json() const {
  return {{"epochs", epochs},          {"batch_size", batch_size},     {"learning_rate", learning_rate},
          {"momentum", momentum},      {"decay_epochs", decay_epochs}, {"decay_factor", decay_factor},
          {"seed", seed}};
}

nlohmann::json TrainingReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const EpochStats& e : epochs) {
    rows.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"accuracy", e.accuracy}, {"learning_rate", e.learning_rate}});
  }
  return {{"epochs", rows}};
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) throw ValueError("batch size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
  }
  return batches;
}

namespace {

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

TrainingReport train_classifier(Model& model, std::span<const LabeledSample> dataset, const Schedule& schedule,
                                SgdMomentumState* final_state, const AuxiliaryLoss* auxiliary) {
  if (dataset.empty()) throw ValueError("train_classifier: empty dataset");
  const std::size_t classes = model.output_shape().at(0);
  for (const LabeledSample& s : dataset) {
    if (s.label >= classes) {
      throw ValueError("train_classifier: label " + std::to_string(s.label) + " exceeds " +
                       std::to_string(classes) + " model outputs");
    }
  }
  SgdMomentumState state{schedule.learning_rate, schedule.momentum, {}};
  TrainingReport report;
  std::vector<double> losses(dataset.size());
  std::vector<char> correct(dataset.size());
  for (std::size_t epoch = 0; epoch < schedule.epochs; ++epoch) {
    state.learning_rate = schedule.learning_rate_at(epoch);
    for (const auto& batch : make_batches(dataset.size(), schedule.batch_size, Rng::derive(schedule.seed, epoch))) {
      std::map<std::string, std::vector<double>> accum;
      const double weight = 1.0 / static_cast<double>(batch.size());
      for (std::size_t idx : batch) {
        const ForwardResult fwd = forward(model, dataset[idx].input, auxiliary ? auxiliary->capture : std::set<std::size_t>{});
        const Tensor& logits = fwd.output;
        Tensor loss = softmax_cross_entropy(logits, dataset[idx].label);
        if (auxiliary) {
          const Tensor extra = auxiliary->term(fwd, dataset[idx]);
          if (extra.defined()) loss = add(loss, extra);
        }
        losses[idx] = loss.item();
        if (!std::isfinite(losses[idx])) {
          throw DivergenceError("loss became non-finite in epoch " + std::to_string(epoch));
        }
        correct[idx] = argmax(logits.data()) == dataset[idx].label;
        const GradientMap grads = backward(scale(loss, weight));
        for (const auto& [name, p] : model.parameters()) {
          auto& acc = accum[name];
          if (acc.empty()) acc.assign(p.numel(), 0.0);
          if (!grads.contains(p)) continue;
          auto g = grads.at(p).data();
          for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
        }
      }
      NamedTensors grad_tensors;
      for (auto& [name, values] : accum) grad_tensors[name] = Tensor(model.parameter(name).shape(), std::move(values));
      model.set_parameters(sgd_step(state, model.parameters(), grad_tensors));
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.learning_rate = state.learning_rate;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      stats.loss += losses[i];
      stats.accuracy += correct[i];
    }
    stats.loss /= static_cast<double>(dataset.size());
    stats.accuracy /= static_cast<double>(dataset.size());
    report.epochs.push_back(stats);
  }
  if (final_state) *final_state = std::move(state);
  return report;
}

std::size_t predict_class(const Model& model, const Tensor& input) {
  NoGradGuard no_grad;
  return argmax(forward(model, input).output.data());
}

double evaluate_accuracy(const Model& model, std::span<const LabeledSample> dataset) {
  if (dataset.empty()) return 0.0;
  std::size_t hits = 0;
  for (const LabeledSample& s : dataset) hits += predict_class(model, s.input) == s.label;
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[4] = {'V', 'D', 'N', '1'};
constexpr int kCheckpointVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::string_view in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

double get_f64(std::string_view in, std::size_t pos) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

nlohmann::json tensor_entry(const std::string& name, const Tensor& t) {
  return {{"name", name}, {"shape", t.shape()}};
}

}  // namespace

std::string encode_checkpoint(const Model& model, const SgdMomentumState* state) {
  nlohmann::json header;
  header["format"] = "vdnet-checkpoint";
  header["version"] = kCheckpointVersion;
  header["input_shape"] = model.input_shape();
  header["class_names"] = model.class_names();
  header["attributes"] = model.attributes();
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerSpec& s : model.layers()) layers.push_back(s.to_json());
  header["layers"] = layers;
  nlohmann::json params = nlohmann::json::array();
  for (const std::string& name : model.parameter_names()) params.push_back(tensor_entry(name, model.parameter(name)));
  header["parameters"] = params;
  if (state) {
    nlohmann::json velocity = nlohmann::json::array();
    for (const auto& [name, v] : state->velocity) velocity.push_back(tensor_entry(name, v));
    header["optimizer"] = {{"learning_rate", state->learning_rate},
                           {"momentum", state->momentum},
                           {"velocity", velocity}};
  } else {
    header["optimizer"] = nullptr;
  }
  const std::string text = header.dump();
  std::string out(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (const std::string& name : model.parameter_names()) {
    for (double d : model.parameter(name).data()) put_f64(out, d);
  }
  if (state) {
    for (const auto& [name, v] : state->velocity) {
      for (double d : v.data()) put_f64(out, d);
    }
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("checkpoint: bad magic (expected VDN1)");
  }
  const std::size_t header_len = get_u32(bytes, 4);
  if (bytes.size() - 8 < header_len) throw FormatError("checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(8, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: corrupt header: ") + e.what());
  }
  if (header.value("format", "") != "vdnet-checkpoint") throw FormatError("checkpoint: unknown format tag");
  if (header.value("version", 0) != kCheckpointVersion) {
    throw VersionError("checkpoint: version " + header.value("version", nlohmann::json()).dump() +
                       " unsupported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  try {
    std::vector<LayerSpec> layers;
    for (const auto& l : header.at("layers")) layers.push_back(LayerSpec::from_json(l));
    Model model(header.at("input_shape").get<Shape>(), std::move(layers),
                header.at("class_names").get<std::vector<std::string>>());
    model.attributes() = header.at("attributes");

    std::size_t pos = 8 + header_len;
    auto read_tensor = [&](const nlohmann::json& entry) {
      const Shape shape = entry.at("shape").get<Shape>();
      const std::size_t n = shape_numel(shape);
      if ((bytes.size() - pos) / 8 < n) throw FormatError("checkpoint: truncated payload");
      std::vector<double> values(n);
      for (std::size_t i = 0; i < n; ++i, pos += 8) values[i] = get_f64(bytes, pos);
      return Tensor(shape, std::move(values), true);
    };

    const auto& entries = header.at("parameters");
    if (entries.size() != model.parameter_names().size()) {
      throw FormatError("checkpoint: parameter list does not match layers");
    }
    NamedTensors params;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const std::string name = entries[i].at("name");
      if (name != model.parameter_names()[i]) throw FormatError("checkpoint: unexpected parameter '" + name + "'");
      params[name] = read_tensor(entries[i]);
    }
    Checkpoint ckpt;
    if (!header.at("optimizer").is_null()) {
      const auto& opt = header.at("optimizer");
      SgdMomentumState state{opt.at("learning_rate"), opt.at("momentum"), {}};
      for (const auto& entry : opt.at("velocity")) state.velocity[entry.at("name")] = read_tensor(entry).detach();
      ckpt.optimizer = std::move(state);
    }
    if (pos != bytes.size()) throw FormatError("checkpoint: trailing bytes after payload");
    model.set_parameters(params);
    ckpt.model = std::move(model);
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: corrupt header: ") + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(std::string("checkpoint: inconsistent header: ") + e.what());
  }
}

void save_checkpoint(const Model& model, const SgdMomentumState* state, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(model, state);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace vdnet
