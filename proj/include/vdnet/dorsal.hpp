#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vdnet/box.hpp"
#include "vdnet/data.hpp"
#include "vdnet/eval.hpp"
#include "vdnet/network.hpp"
#include "vdnet/ventral.hpp"

namespace vdnet {

struct Anchor {
  double center_x = 0.0;
  double center_y = 0.0;
  double width = 0.0;
  double height = 0.0;
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t slot = 0;  // scale index * ratio count + ratio index

  Box box() const;
};

/// One anchor per grid cell, scale and aspect ratio (height / width), centred
/// on the cell centre. Anchor index is (row * cols + col) * slots + slot.
std::vector<Anchor> generate_anchors(std::size_t image_height, std::size_t image_width, std::size_t stride,
                                     std::span<const double> scales, std::span<const double> ratios);

struct BoxDelta {
  double tx = 0.0;
  double ty = 0.0;
  double tw = 0.0;
  double th = 0.0;
};

BoxDelta encode_box(const Box& truth, const Anchor& anchor);
Box decode_box(const BoxDelta& delta, const Anchor& anchor);

enum class AnchorLabel { kNegative, kPositive, kIgnore };

struct AnchorTarget {
  AnchorLabel label = AnchorLabel::kIgnore;
  BoxDelta delta;              // positives only
  std::size_t class_id = 0;    // positives only; dataset class index
  std::size_t truth_index = 0; // positives only
};

/// Positive when IoU with some truth >= iou_pos, or when the anchor is the
/// best-overlapping anchor of a truth (lowest index on ties); negative when
/// every IoU is below iou_neg; ignored otherwise. Threshold positives regress
/// to their best-IoU truth; fallback positives to the truth that chose them.
/// A truth left without a positive then claims its best non-positive anchor.
std::vector<AnchorTarget> assign_targets(std::span<const Anchor> anchors, std::span<const Annotation> truths,
                                         double iou_pos, double iou_neg);

struct DetectionLoss {
  Tensor total;
  double classification = 0.0;  // (1/n_cls) sum of cross-entropies
  double regression = 0.0;      // lambda (1/n_reg) sum of positive smooth-L1
};

/// Two-term detection loss over non-ignored anchors. cls_scores[N, C+1] uses
/// column 0 for background; box_deltas[N, 4] is (tx, ty, tw, th).
DetectionLoss detection_loss(const Tensor& cls_scores, const Tensor& box_deltas,
                             std::span<const AnchorTarget> targets, double lambda, double n_cls, double n_reg);

/// Keeps up to `sample_size` anchors with at most `positive_fraction` of
/// them positive; every other anchor becomes ignored.
std::vector<AnchorTarget> sample_targets(std::vector<AnchorTarget> targets, std::size_t sample_size,
                                         double positive_fraction, std::uint64_t seed);

struct DetectorConfig {
  std::size_t image_size = 64;
  std::size_t channels = 3;
  std::vector<std::string> class_names{"circle", "square", "triangle"};
  std::size_t width = 24;  // channels of the first backbone stage
  /// Subtracted from every pixel before the backbone.
  double input_shift = 0.5;
  std::size_t stride = 8;
  std::vector<double> scales{12.0, 18.0, 24.0};
  std::vector<double> ratios{1.0};
  double iou_pos = 0.5;
  double iou_neg = 0.3;
  double lambda = 10.0;
  std::size_t sample_size = 32;
  double positive_fraction = 0.25;
  /// Regression normaliser; 0 means the anchor count.
  double n_reg = 0.0;

  void validate() const;
  std::size_t anchors_per_cell() const { return scales.size() * ratios.size(); }
  nlohmann::json to_json() const;
  static DetectorConfig from_json(const nlohmann::json& j);
};

/// Convolutional backbone (three pooled 3x3 stages and one unpooled) with a
/// 1x1 head producing per-anchor class scores and box deltas. The config is
/// stored in the model attributes under "detector".
Model make_detector(const DetectorConfig& config);
DetectorConfig detector_config(const Model& detector);

/// Attention front-end for the detector.
struct Ventral {
  Model classifier;
  VentralConfig config;
};

struct DetectorEpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;
  double classification = 0.0;
  double regression = 0.0;
  double learning_rate = 0.0;
};

struct DetectorTrainingReport {
  std::vector<DetectorEpochStats> epochs;
  bool masked = false;
  nlohmann::json to_json() const;
};

/// Per-image anchor scores [N, C+1] and deltas [N, 4] from one forward pass.
struct HeadOutputs {
  Tensor scores;
  Tensor deltas;
};
HeadOutputs run_detector(const Model& detector, const Tensor& image);

/// Minibatch SGD with momentum on the detection loss. Images are masked by
/// the ventral pipeline first when `ventral` is given. Every scene must carry
/// at least one annotation.
DetectorTrainingReport train_detector(Model& detector, std::span<const Scene> scenes, const Ventral* ventral,
                                      const Schedule& schedule, SgdMomentumState* final_state = nullptr);

struct DetectOptions {
  double score_thresh = 0.05;
  double nms_thresh = 0.45;
};

struct DetectResult {
  std::vector<Detection> detections;  // sorted by descending score
  std::optional<std::string> warning;
};

/// Detections whose class probability is strictly above score_thresh,
/// decoded, clipped to the image, deduplicated by per-class NMS.
DetectResult detect(const Model& detector, const Tensor& image, const Ventral* ventral,
                    const DetectOptions& options = {});

}  // namespace vdnet
