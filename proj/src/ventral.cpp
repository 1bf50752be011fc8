#include "vdnet/ventral.hpp"

#include <algorithm>
#include <cmath>

namespace vdnet {

std::string to_string(Aggregation a) { return a == Aggregation::kMean ? "mean" : "max"; }

Aggregation aggregation_from_string(const std::string& name) {
  if (name == "mean") return Aggregation::kMean;
  if (name == "max") return Aggregation::kMax;
  throw ValueError("aggregation must be 'mean' or 'max', got '" + name + "'");
}

void VentralConfig::validate() const {
  if (!(gaussian_variance > 0.0)) {
    throw ValueError("gaussian variance must be positive, got " + std::to_string(gaussian_variance));
  }
  if (reference_side < 0.0) throw ValueError("reference side must be nonnegative");
  if (kernel_radius && *kernel_radius == 0) throw ValueError("kernel radius must be >= 1");
}

double VentralConfig::effective_variance(std::size_t height, std::size_t width) const {
  validate();
  if (reference_side == 0.0) return gaussian_variance;
  return gaussian_variance * static_cast<double>(height * width) / (reference_side * reference_side);
}

std::size_t VentralConfig::effective_radius(std::size_t height, std::size_t width) const {
  if (kernel_radius) return *kernel_radius;
  const double sigma = std::sqrt(effective_variance(height, width));
  const auto r = static_cast<std::size_t>(std::ceil(3.0 * sigma));
  const std::size_t limit = std::min(height, width) - 1;
  return std::clamp<std::size_t>(r, 1, std::max<std::size_t>(limit, 1));
}

nlohmann::json VentralConfig::to_json() const {
  nlohmann::json j{{"aggregation", to_string(aggregation)},
                   {"gaussian_variance", gaussian_variance},
                   {"reference_side", reference_side},
                   {"threshold", "mean"}};
  j["kernel_radius"] = kernel_radius ? nlohmann::json(*kernel_radius) : nlohmann::json("auto");
  return j;
}

VentralConfig VentralConfig::from_json(const nlohmann::json& j) {
  VentralConfig c;
  try {
    c.aggregation = aggregation_from_string(j.value("aggregation", "mean"));
    c.gaussian_variance = j.value("gaussian_variance", c.gaussian_variance);
    c.reference_side = j.value("reference_side", c.reference_side);
    if (j.contains("kernel_radius") && j["kernel_radius"].is_number()) {
      c.kernel_radius = j["kernel_radius"].get<std::size_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed ventral config: ") + e.what());
  }
  if (j.value("threshold", "mean") != "mean") throw ConfigError("unknown threshold rule " + j["threshold"].dump());
  c.validate();
  return c;
}

double SaliencyArtifacts::coverage() const {
  double kept = 0.0;
  for (double v : mask.data()) kept += v;
  return kept / static_cast<double>(mask.numel());
}

Tensor gap_per_filter(const Tensor& features) {
  if (features.rank() != 3) {
    throw ShapeError("gap_per_filter expects [k,h,w], got " + shape_to_string(features.shape()));
  }
  return channel_sum(features);
}

Tensor gestalt_total(const Tensor& filter_totals) { return sum_all(filter_totals); }

std::size_t gestalt_layer(const Model& classifier) {
  const auto conv = classifier.last_conv_index();
  if (!conv) throw ValueError("classifier has no convolutional layer to take the Gestalt Total from");
  const auto& layers = classifier.layers();
  if (*conv + 1 < layers.size() && layers[*conv + 1].kind == LayerKind::kRelu) return *conv + 1;
  return *conv;
}

Tensor sensitivity_map(const Model& classifier, const Tensor& image) {
  const std::size_t layer = gestalt_layer(classifier);
  if (image.rank() != 3) throw ShapeError("sensitivity_map expects [c,m,n], got " + shape_to_string(image.shape()));
  const Tensor x = image.as_variable();
  const Tensor features = forward_prefix(classifier, x, layer);
  const Tensor gt = gestalt_total(gap_per_filter(features));
  if (!gt.requires_grad()) return Tensor::zeros(image.shape());
  std::vector<double> s = backward(gt).get_or_zeros(x).to_vector();
  for (double& v : s) v = std::abs(v);
  return Tensor(image.shape(), std::move(s));
}

Tensor aggregate_channels(const Tensor& sensitivity, Aggregation mode) {
  if (sensitivity.rank() != 3) {
    throw ShapeError("aggregate_channels expects [c,m,n], got " + shape_to_string(sensitivity.shape()));
  }
  const std::size_t c = sensitivity.dim(0);
  const std::size_t plane = sensitivity.dim(1) * sensitivity.dim(2);
  auto s = sensitivity.data();
  std::vector<double> out(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(plane));
  for (std::size_t k = 1; k < c; ++k) {
    for (std::size_t p = 0; p < plane; ++p) {
      const double v = s[k * plane + p];
      out[p] = mode == Aggregation::kMax ? std::max(out[p], v) : out[p] + v;
    }
  }
  if (mode == Aggregation::kMean && c > 1) {
    for (double& v : out) v /= static_cast<double>(c);
  }
  return Tensor({sensitivity.dim(1), sensitivity.dim(2)}, std::move(out));
}

Tensor gaussian_kernel(double variance, std::size_t radius) {
  if (!(variance > 0.0)) throw ValueError("gaussian_kernel: variance must be positive, got " + std::to_string(variance));
  if (radius == 0) throw ValueError("gaussian_kernel: radius must be >= 1");
  const std::size_t side = 2 * radius + 1;
  const long r = static_cast<long>(radius);
  std::vector<double> k(side * side);
  double total = 0.0;
  for (long dy = -r; dy <= r; ++dy) {
    for (long dx = -r; dx <= r; ++dx) {
      const double v = std::exp(-static_cast<double>(dx * dx + dy * dy) / (2.0 * variance));
      k[static_cast<std::size_t>((dy + r) * static_cast<long>(side) + dx + r)] = v;
      total += v;
    }
  }
  for (double& v : k) v /= total;
  return Tensor({side, side}, std::move(k));
}

namespace {

// Mirror index without repeating the edge sample: -1 -> 1, n -> n - 2.
std::size_t reflect(long i, long n) {
  if (i < 0) return static_cast<std::size_t>(-i);
  if (i >= n) return static_cast<std::size_t>(2 * (n - 1) - i);
  return static_cast<std::size_t>(i);
}

}  // namespace

Tensor smooth(const Tensor& map, const Tensor& kernel) {
  if (map.rank() != 2) throw ShapeError("smooth expects [m,n], got " + shape_to_string(map.shape()));
  if (kernel.rank() != 2 || kernel.dim(0) != kernel.dim(1) || kernel.dim(0) % 2 == 0) {
    throw ShapeError("smooth: kernel must be square with odd side, got " + shape_to_string(kernel.shape()));
  }
  const long m = static_cast<long>(map.dim(0)), n = static_cast<long>(map.dim(1));
  const long r = static_cast<long>(kernel.dim(0) / 2);
  if (r >= m || r >= n) {
    throw GeometryError("smooth: kernel radius " + std::to_string(r) + " needs a map larger than " +
                        std::to_string(m) + "x" + std::to_string(n) + " for reflect padding");
  }
  const long side = 2 * r + 1;
  auto src = map.data();
  auto k = kernel.data();
  std::vector<double> out(src.size(), 0.0);
  for (long y = 0; y < m; ++y) {
    for (long x = 0; x < n; ++x) {
      double acc = 0.0;
      for (long dy = -r; dy <= r; ++dy) {
        const std::size_t row = reflect(y + dy, m) * static_cast<std::size_t>(n);
        const double* krow = k.data() + (dy + r) * side + r;
        for (long dx = -r; dx <= r; ++dx) acc += krow[dx] * src[row + reflect(x + dx, n)];
      }
      out[static_cast<std::size_t>(y * n + x)] = acc;
    }
  }
  return Tensor(map.shape(), std::move(out));
}

Tensor binarize_mean_threshold(const Tensor& smoothed) {
  auto v = smoothed.data();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  std::vector<double> mask(v.size(), 1.0);
  if (*lo == *hi) return Tensor(smoothed.shape(), std::move(mask));
  double total = 0.0;
  for (double x : v) total += x;
  const double mean = total / static_cast<double>(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) mask[i] = v[i] >= mean ? 1.0 : 0.0;
  return Tensor(smoothed.shape(), std::move(mask));
}

Tensor apply_mask(const Tensor& image, const Tensor& mask) {
  if (image.rank() != 3 || mask.rank() != 2 || image.dim(1) != mask.dim(0) || image.dim(2) != mask.dim(1)) {
    throw ShapeError("apply_mask: mask " + shape_to_string(mask.shape()) + " does not cover image " +
                     shape_to_string(image.shape()));
  }
  for (double v : mask.data()) {
    if (v != 0.0 && v != 1.0) throw ValueError("apply_mask: mask must be binary, found " + std::to_string(v));
  }
  NoGradGuard no_grad;
  return mul(image, mask).detach();
}

SaliencyArtifacts ventral_pipeline(const Model& classifier, const Tensor& image, const VentralConfig& config) {
  config.validate();
  SaliencyArtifacts out;
  out.raw_sensitivity = sensitivity_map(classifier, image);
  out.aggregated = aggregate_channels(out.raw_sensitivity, config.aggregation);
  const std::size_t m = image.dim(1), n = image.dim(2);
  out.smoothed = smooth(out.aggregated, gaussian_kernel(config.effective_variance(m, n), config.effective_radius(m, n)));
  out.mask = binarize_mean_threshold(out.smoothed);
  out.masked_image = apply_mask(image, out.mask);
  return out;
}

Model make_patch_classifier(std::size_t channels, std::size_t patch_size, const std::vector<std::string>& class_names,
                            std::size_t width) {
  std::vector<std::string> labels{"background"};
  labels.insert(labels.end(), class_names.begin(), class_names.end());
  return Model({channels, patch_size, patch_size},
               {LayerSpec::conv(channels, width, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool(2, 2),
                LayerSpec::conv(width, 2 * width, 3, 1, 1), LayerSpec::relu(), LayerSpec::gap(),
                LayerSpec::dense(2 * width, labels.size())},
               labels);
}

TrainingReport train_patch_classifier(Model& classifier, std::span<const LabeledSample> patches,
                                      const Schedule& schedule, double background_penalty,
                                      SgdMomentumState* final_state) {
  if (!(background_penalty >= 0.0)) throw ValueError("background penalty must be nonnegative");
  const std::size_t layer = gestalt_layer(classifier);
  const AuxiliaryLoss penalty{{layer}, [&](const ForwardResult& fwd, const LabeledSample& sample) {
                                if (sample.label != 0) return Tensor();
                                const Tensor& act = fwd.captured.at(layer);
                                return scale(sum_all(act), background_penalty / static_cast<double>(act.numel()));
                              }};
  return train_classifier(classifier, patches, schedule, final_state,
                          background_penalty > 0.0 ? &penalty : nullptr);
}

double mask_box_coverage(const Tensor& mask, std::span<const Box> boxes) {
  if (mask.rank() != 2) throw ShapeError("mask_box_coverage expects [m,n]");
  const std::size_t m = mask.dim(0), n = mask.dim(1);
  auto v = mask.data();
  double kept = 0.0, total = 0.0;
  for (const Box& b : boxes) {
    const auto y0 = static_cast<std::size_t>(std::max(0.0, std::floor(b.y_min)));
    const auto y1 = std::min(m, static_cast<std::size_t>(std::max(0.0, std::ceil(b.y_max))));
    const auto x0 = static_cast<std::size_t>(std::max(0.0, std::floor(b.x_min)));
    const auto x1 = std::min(n, static_cast<std::size_t>(std::max(0.0, std::ceil(b.x_max))));
    for (std::size_t y = y0; y < y1; ++y) {
      for (std::size_t x = x0; x < x1; ++x) {
        kept += v[y * n + x];
        total += 1.0;
      }
    }
  }
  return total == 0.0 ? 1.0 : kept / total;
}

}  // namespace vdnet
