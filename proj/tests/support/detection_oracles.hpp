#pragma once

// Reference implementations for detection post-processing and anchor
// assignment, written as plain scans independent of the library code.

#include <optional>
#include <vector>

#include "vdnet/dorsal.hpp"
#include "vdnet/eval.hpp"

namespace vdnet::testing {

// Exhaustive greedy: scan the whole list every round for the best survivor.
inline std::vector<Detection> greedy_oracle(const std::vector<Detection>& dets, double thresh) {
  std::vector<char> alive(dets.size(), 1);
  std::vector<Detection> out;
  while (true) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (alive[i] && (!best || dets[i].score > dets[*best].score)) best = i;
    }
    if (!best) return out;
    out.push_back(dets[*best]);
    alive[*best] = 0;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (alive[i] && dets[i].class_id == dets[*best].class_id && iou(dets[i].box, dets[*best].box) > thresh) {
        alive[i] = 0;
      }
    }
  }
}

inline bool same(const std::vector<Detection>& a, const std::vector<Detection>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i].box == b[i].box) || a[i].class_id != b[i].class_id || a[i].score != b[i].score) return false;
  }
  return true;
}

// Per-anchor scan written independently of the library's matrix pass.
inline std::vector<AnchorTarget> assign_oracle(const std::vector<Anchor>& anchors, const std::vector<Annotation>& truths,
                                        double pos, double neg) {
  std::vector<AnchorTarget> out(anchors.size());
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    double best = -1.0;
    std::size_t arg = 0;
    for (std::size_t t = 0; t < truths.size(); ++t) {
      const double v = iou(anchors[a].box(), truths[t].box);
      if (v > best) {
        best = v;
        arg = t;
      }
    }
    if (best >= pos) {
      out[a] = {AnchorLabel::kPositive, encode_box(truths[arg].box, anchors[a]), truths[arg].class_id, arg};
    } else if (best < neg) {
      out[a].label = AnchorLabel::kNegative;
    }
  }
  for (std::size_t t = 0; t < truths.size(); ++t) {
    double best = -1.0;
    std::size_t arg = 0;
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      const double v = iou(anchors[a].box(), truths[t].box);
      if (v > best) {
        best = v;
        arg = a;
      }
    }
    if (out[arg].label != AnchorLabel::kPositive) {
      out[arg] = {AnchorLabel::kPositive, encode_box(truths[t].box, anchors[arg]), truths[t].class_id, t};
    }
  }
  for (std::size_t t = 0; t < truths.size(); ++t) {
    bool covered = false;
    for (const auto& x : out) covered |= x.label == AnchorLabel::kPositive && x.truth_index == t;
    if (covered) continue;
    double best = -1.0;
    std::size_t arg = 0;
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      if (out[a].label == AnchorLabel::kPositive) continue;
      const double v = iou(anchors[a].box(), truths[t].box);
      if (v > best) {
        best = v;
        arg = a;
      }
    }
    out[arg] = {AnchorLabel::kPositive, encode_box(truths[t].box, anchors[arg]), truths[t].class_id, t};
  }
  return out;
}

}  // namespace vdnet::testing
