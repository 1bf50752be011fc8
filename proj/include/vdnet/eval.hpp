#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vdnet/box.hpp"
#include "vdnet/data.hpp"

namespace vdnet {

struct Detection {
  Box box;
  std::size_t class_id = 0;  // index into the dataset's class names
  double score = 0.0;
};

/// Intersection over union. Throws GeometryError for a box without positive extent.
double iou(const Box& a, const Box& b);

/// Greedy non-maximum suppression: repeatedly keep the best remaining
/// detection and drop same-class boxes overlapping it by IoU > thresh.
/// Equal scores keep their input order.
std::vector<Detection> nms(std::vector<Detection> detections, double thresh);

/// A scored box of one class in image `image`.
struct ImageDetection {
  std::size_t image = 0;
  Box box;
  double score = 0.0;
};

struct ImageBox {
  std::size_t image = 0;
  Box box;
};

struct MatchRecord {
  std::size_t detection = 0;          // index into the detections passed in
  std::optional<std::size_t> truth;   // matched ground-truth index
  bool true_positive = false;
};

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

struct ApResult {
  double ap = 0.0;
  std::vector<PrPoint> curve;          // one point per ranked detection
  std::vector<MatchRecord> matches;    // in ranked order
};

/// Single-class AP. Detections are ranked by descending score (stable);
/// each becomes a true positive if some unmatched truth in its image has
/// IoU >= iou_thresh, taking the best such truth. AP is the area under the
/// monotone precision envelope over recall (all-points interpolation).
ApResult average_precision(std::span<const ImageDetection> detections, std::span<const ImageBox> truths,
                           double iou_thresh);

struct ClassAp {
  std::string name;
  std::size_t truth_count = 0;
  std::size_t detection_count = 0;
  double ap = 0.0;
  std::vector<PrPoint> curve;
};

struct EvalReport {
  double iou_threshold = 0.5;
  std::vector<ClassAp> classes;  // only classes with at least one ground-truth box
  double mean_ap = 0.0;

  nlohmann::json to_json() const;
  std::string to_table(const std::string& label) const;
};

/// mAP over a set of images; detections[i] and truths[i] refer to image i.
EvalReport evaluate(const std::vector<std::vector<Detection>>& detections,
                    const std::vector<std::vector<Annotation>>& truths, const std::vector<std::string>& class_names,
                    double iou_thresh = 0.5);

/// Detections of one pipeline arm on a named list of test images.
struct ArmResult {
  std::vector<std::string> image_ids;
  std::vector<std::vector<Detection>> detections;
};

struct ComparisonReport {
  EvalReport plain;
  EvalReport masked;
  double map_delta = 0.0;  // masked - plain
  std::vector<double> mask_coverage;       // fraction of image kept, per test image
  std::vector<double> object_coverage;     // fraction of box pixels kept, per test image
  nlohmann::json to_json() const;
  std::string to_table() const;
};

/// Paired evaluation of the unmasked and masked arms on the same test images.
/// Throws ValueError when the arms were run on different image lists.
ComparisonReport compare_masked_unmasked(const ArmResult& plain, const ArmResult& masked,
                                         const std::vector<std::vector<Annotation>>& truths,
                                         const std::vector<std::string>& class_names,
                                         std::vector<double> mask_coverage, std::vector<double> object_coverage,
                                         double iou_thresh = 0.5);

}  // namespace vdnet
