#pragma once

#include <optional>
#include <span>
#include <string>

#include "json.hpp"
#include "vdnet/box.hpp"
#include "vdnet/network.hpp"
#include "vdnet/tensor.hpp"

namespace vdnet {

enum class Aggregation { kMean, kMax };
enum class ThresholdRule { kMean };

std::string to_string(Aggregation a);
Aggregation aggregation_from_string(const std::string& name);

/// Selective-attention settings.
///
/// `gaussian_variance` is expressed at a reference resolution of
/// `reference_side` x `reference_side` pixels and scaled by image area, so the
/// same value gives comparable smoothing on smaller inputs. A reference side
/// of 0 uses the variance as given, in pixels squared.
struct VentralConfig {
  Aggregation aggregation = Aggregation::kMean;
  double gaussian_variance = 30.0;
  double reference_side = 224.0;
  /// Kernel half-width; defaults to ceil(3 sigma), clamped to fit the map.
  std::optional<std::size_t> kernel_radius;
  ThresholdRule threshold = ThresholdRule::kMean;

  void validate() const;
  double effective_variance(std::size_t height, std::size_t width) const;
  std::size_t effective_radius(std::size_t height, std::size_t width) const;
  nlohmann::json to_json() const;
  static VentralConfig from_json(const nlohmann::json& j);
};

/// Intermediate products of the attention pipeline, kept for diagnostics.
struct SaliencyArtifacts {
  Tensor raw_sensitivity;  // |dGT/dX|, [c,m,n]
  Tensor aggregated;       // [m,n]
  Tensor smoothed;         // [m,n]
  Tensor mask;             // [m,n], values in {0,1}
  Tensor masked_image;     // [c,m,n]

  /// Fraction of pixels kept by the mask.
  double coverage() const;
};

/// Per-filter spatial sums of features[k,h,w] -> [k]. Differentiable.
Tensor gap_per_filter(const Tensor& features);

/// Sum over filters of the per-filter totals -> scalar. Differentiable.
Tensor gestalt_total(const Tensor& filter_totals);

/// Layer whose activations define the Gestalt Total: the last convolution,
/// or the ReLU that directly follows it.
std::size_t gestalt_layer(const Model& classifier);

/// |dGT/dX| at X = image, from one forward and one backward pass through the
/// classifier's convolutional prefix. The image must have the classifier's
/// channel count; its spatial extent may differ from the training patches.
Tensor sensitivity_map(const Model& classifier, const Tensor& image);

/// Mean or max across channels of S[c,m,n] -> [m,n].
Tensor aggregate_channels(const Tensor& sensitivity, Aggregation mode);

/// Normalised (2r+1)x(2r+1) Gaussian samples on the integer grid.
Tensor gaussian_kernel(double variance, std::size_t radius);

/// Same-size filtering of map[m,n] with reflect padding (edge not repeated).
Tensor smooth(const Tensor& map, const Tensor& kernel);

/// 1 where the value is >= the map mean, else 0. A constant map is all ones.
Tensor binarize_mean_threshold(const Tensor& smoothed);

/// image[c,m,n] * mask[m,n] with the mask repeated over channels.
Tensor apply_mask(const Tensor& image, const Tensor& mask);

SaliencyArtifacts ventral_pipeline(const Model& classifier, const Tensor& image, const VentralConfig& config);

/// Patch classifier whose convolutional prefix also runs on whole scenes:
/// two 3x3 conv + ReLU stages with a 2x2 pool between, GAP, then a dense
/// layer over background + the object classes.
Model make_patch_classifier(std::size_t channels, std::size_t patch_size, const std::vector<std::string>& class_names,
                            std::size_t width = 16);

/// Cross-entropy training of a patch classifier, plus
/// `background_penalty` times the mean Gestalt-layer activation on patches
/// labelled 0. Without the penalty the network is free to encode the
/// background class with units that fire on background, and the Gestalt
/// Total sensitivity then highlights background instead of objects.
TrainingReport train_patch_classifier(Model& classifier, std::span<const LabeledSample> patches,
                                      const Schedule& schedule, double background_penalty,
                                      SgdMomentumState* final_state = nullptr);

/// Fraction of the pixels inside `boxes` that the mask keeps (1 when no boxes).
double mask_box_coverage(const Tensor& mask, std::span<const Box> boxes);

}  // namespace vdnet
