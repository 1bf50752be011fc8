#include "vdnet/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "vdnet/errors.hpp"

namespace vdnet {

double iou(const Box& a, const Box& b) {
  if (!a.valid() || !b.valid()) {
    throw GeometryError("iou: box without positive extent: " + to_string(a.valid() ? b : a));
  }
  const double inter = intersection_area(a, b);
  return inter / (a.area() + b.area() - inter);
}

namespace {

template <typename T>
std::vector<std::size_t> rank_by_score(const std::vector<T>& items) {
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return items[a].score > items[b].score; });
  return order;
}

double mean_or_zero(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::vector<Detection> nms(std::vector<Detection> detections, double thresh) {
  const std::vector<std::size_t> order = rank_by_score(detections);
  std::vector<Detection> kept;
  for (std::size_t idx : order) {
    const Detection& d = detections[idx];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return k.class_id == d.class_id && iou(k.box, d.box) > thresh;
    });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

ApResult average_precision(std::span<const ImageDetection> detections, std::span<const ImageBox> truths,
                           double iou_thresh) {
  ApResult result;
  const std::vector<ImageDetection> dets(detections.begin(), detections.end());
  std::vector<char> used(truths.size(), 0);
  std::size_t tp = 0;
  for (std::size_t rank = 0; const std::size_t idx : rank_by_score(dets)) {
    const ImageDetection& d = dets[idx];
    MatchRecord rec{idx, std::nullopt, false};
    double best = -1.0;
    for (std::size_t t = 0; t < truths.size(); ++t) {
      if (used[t] || truths[t].image != d.image) continue;
      const double overlap = iou(d.box, truths[t].box);
      if (overlap >= iou_thresh && overlap > best) {
        best = overlap;
        rec.truth = t;
      }
    }
    if (rec.truth) {
      used[*rec.truth] = 1;
      rec.true_positive = true;
      ++tp;
    }
    ++rank;
    result.matches.push_back(rec);
    const double recall = truths.empty() ? 0.0 : static_cast<double>(tp) / static_cast<double>(truths.size());
    result.curve.push_back({recall, static_cast<double>(tp) / static_cast<double>(rank)});
  }
  if (truths.empty()) return result;
  // Precision envelope, then area over the recall steps.
  std::vector<double> envelope(result.curve.size());
  double running = 0.0;
  for (std::size_t i = result.curve.size(); i-- > 0;) {
    running = std::max(running, result.curve[i].precision);
    envelope[i] = running;
  }
  double previous_recall = 0.0;
  for (std::size_t i = 0; i < result.curve.size(); ++i) {
    result.ap += (result.curve[i].recall - previous_recall) * envelope[i];
    previous_recall = result.curve[i].recall;
  }
  return result;
}

EvalReport evaluate(const std::vector<std::vector<Detection>>& detections,
                    const std::vector<std::vector<Annotation>>& truths, const std::vector<std::string>& class_names,
                    double iou_thresh) {
  if (detections.size() != truths.size()) {
    throw ValueError("evaluate: " + std::to_string(detections.size()) + " detection lists for " +
                     std::to_string(truths.size()) + " images");
  }
  EvalReport report;
  report.iou_threshold = iou_thresh;
  std::vector<double> aps;
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    std::vector<ImageDetection> dets;
    std::vector<ImageBox> gts;
    for (std::size_t i = 0; i < truths.size(); ++i) {
      for (const Detection& d : detections[i]) {
        if (d.class_id == c) dets.push_back({i, d.box, d.score});
      }
      for (const Annotation& a : truths[i]) {
        if (a.class_id == c) gts.push_back({i, a.box});
      }
    }
    if (gts.empty()) continue;
    ApResult ap = average_precision(dets, gts, iou_thresh);
    report.classes.push_back({class_names[c], gts.size(), dets.size(), ap.ap, std::move(ap.curve)});
    aps.push_back(ap.ap);
  }
  report.mean_ap = mean_or_zero(aps);
  return report;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json per_class = nlohmann::json::array();
  for (const ClassAp& c : classes) {
    nlohmann::json curve = nlohmann::json::array();
    for (const PrPoint& p : c.curve) curve.push_back({p.recall, p.precision});
    per_class.push_back({{"class", c.name},
                         {"ap", c.ap},
                         {"ground_truth", c.truth_count},
                         {"detections", c.detection_count},
                         {"pr_curve", curve}});
  }
  return {{"iou_threshold", iou_threshold}, {"mAP", mean_ap}, {"classes", per_class}};
}

std::string EvalReport::to_table(const std::string& label) const {
  std::string header = "method        ";
  std::string row(label.substr(0, 13));
  row.resize(14, ' ');
  char cell[32];
  for (const ClassAp& c : classes) {
    std::snprintf(cell, sizeof cell, "%10s", c.name.substr(0, 10).c_str());
    header += cell;
    std::snprintf(cell, sizeof cell, "%10.1f", 100.0 * c.ap);
    row += cell;
  }
  std::snprintf(cell, sizeof cell, "%8.1f", 100.0 * mean_ap);
  return header + "     mAP\n" + row + cell + "\n";
}

ComparisonReport compare_masked_unmasked(const ArmResult& plain, const ArmResult& masked,
                                         const std::vector<std::vector<Annotation>>& truths,
                                         const std::vector<std::string>& class_names,
                                         std::vector<double> mask_coverage, std::vector<double> object_coverage,
                                         double iou_thresh) {
  if (plain.image_ids != masked.image_ids) {
    throw ValueError("compare_masked_unmasked: the two arms were evaluated on different test images");
  }
  if (plain.image_ids.size() != truths.size()) {
    throw ValueError("compare_masked_unmasked: ground truth covers " + std::to_string(truths.size()) +
                     " images, arms cover " + std::to_string(plain.image_ids.size()));
  }
  ComparisonReport report;
  report.plain = evaluate(plain.detections, truths, class_names, iou_thresh);
  report.masked = evaluate(masked.detections, truths, class_names, iou_thresh);
  report.map_delta = report.masked.mean_ap - report.plain.mean_ap;
  report.mask_coverage = std::move(mask_coverage);
  report.object_coverage = std::move(object_coverage);
  return report;
}

nlohmann::json ComparisonReport::to_json() const {
  auto stats = [](const std::vector<double>& v) {
    if (v.empty()) return nlohmann::json{{"count", 0}};
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return nlohmann::json{{"count", v.size()}, {"mean", mean_or_zero(v)}, {"min", *lo}, {"max", *hi}, {"values", v}};
  };
  return {{"iou_threshold", plain.iou_threshold},
          {"mAP_plain", plain.mean_ap},
          {"mAP_masked", masked.mean_ap},
          {"mAP_delta", map_delta},
          {"plain", plain.to_json()},
          {"masked", masked.to_json()},
          {"mask_coverage", stats(mask_coverage)},
          {"object_coverage", stats(object_coverage)}};
}

std::string ComparisonReport::to_table() const {
  char line[160];
  std::string out = plain.to_table("unmasked");
  out += masked.to_table("masked").substr(out.find('\n') + 1);
  std::snprintf(line, sizeof line, "mAP delta (masked - unmasked): %+.4f at IoU %.2f\n", map_delta,
                plain.iou_threshold);
  out += line;
  std::snprintf(line, sizeof line, "mask keeps %.1f%% of each image and %.1f%% of object pixels on average\n",
                100.0 * mean_or_zero(mask_coverage), 100.0 * mean_or_zero(object_coverage));
  return out + line;
}

}  // namespace vdnet
