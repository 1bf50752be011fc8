#include "vdnet/dorsal.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "vdnet/errors.hpp"
#include "vdnet/rng.hpp"

namespace vdnet {

Box Anchor::box() const {
  return {center_x - 0.5 * width, center_y - 0.5 * height, center_x + 0.5 * width, center_y + 0.5 * height};
}

std::vector<Anchor> generate_anchors(std::size_t image_height, std::size_t image_width, std::size_t stride,
                                     std::span<const double> scales, std::span<const double> ratios) {
  if (stride == 0 || image_height % stride != 0 || image_width % stride != 0) {
    throw GeometryError("anchor stride " + std::to_string(stride) + " does not divide image " +
                        std::to_string(image_height) + "x" + std::to_string(image_width));
  }
  if (scales.empty() || ratios.empty()) throw ValueError("anchors need at least one scale and one ratio");
  for (double v : scales) {
    if (!(v > 0.0)) throw ValueError("anchor scales must be positive");
  }
  for (double v : ratios) {
    if (!(v > 0.0)) throw ValueError("anchor ratios must be positive");
  }
  const std::size_t rows = image_height / stride, cols = image_width / stride;
  std::vector<Anchor> anchors;
  anchors.reserve(rows * cols * scales.size() * ratios.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      std::size_t slot = 0;
      for (double s : scales) {
        for (double ratio : ratios) {
          const double root = std::sqrt(ratio);
          anchors.push_back({(static_cast<double>(c) + 0.5) * static_cast<double>(stride),
                             (static_cast<double>(r) + 0.5) * static_cast<double>(stride), s / root, s * root, r, c,
                             slot++});
        }
      }
    }
  }
  return anchors;
}

BoxDelta encode_box(const Box& truth, const Anchor& anchor) {
  if (!truth.valid()) throw GeometryError("encode_box: ground truth without positive extent: " + to_string(truth));
  if (!(anchor.width > 0.0 && anchor.height > 0.0)) throw GeometryError("encode_box: anchor without positive extent");
  return {(truth.center_x() - anchor.center_x) / anchor.width, (truth.center_y() - anchor.center_y) / anchor.height,
          std::log(truth.width() / anchor.width), std::log(truth.height() / anchor.height)};
}

Box decode_box(const BoxDelta& d, const Anchor& anchor) {
  const double cx = anchor.center_x + d.tx * anchor.width;
  const double cy = anchor.center_y + d.ty * anchor.height;
  const double w = anchor.width * std::exp(d.tw);
  const double h = anchor.height * std::exp(d.th);
  return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

std::vector<AnchorTarget> assign_targets(std::span<const Anchor> anchors, std::span<const Annotation> truths,
                                         double iou_pos, double iou_neg) {
  if (anchors.empty()) throw ValueError("assign_targets: no anchors");
  if (!(iou_neg < iou_pos)) throw ValueError("assign_targets: iou_neg must be below iou_pos");
  std::vector<AnchorTarget> targets(anchors.size());
  if (truths.empty()) {
    for (auto& t : targets) t.label = AnchorLabel::kNegative;
    return targets;
  }
  // overlap[a * T + t]
  const std::size_t n_truth = truths.size();
  std::vector<double> overlap(anchors.size() * n_truth);
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    const Box box = anchors[a].box();
    for (std::size_t t = 0; t < n_truth; ++t) overlap[a * n_truth + t] = iou(box, truths[t].box);
  }
  auto make_positive = [&](std::size_t a, std::size_t t) {
    targets[a] = {AnchorLabel::kPositive, encode_box(truths[t].box, anchors[a]), truths[t].class_id, t};
  };
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    std::size_t best = 0;
    for (std::size_t t = 1; t < n_truth; ++t) {
      if (overlap[a * n_truth + t] > overlap[a * n_truth + best]) best = t;
    }
    const double v = overlap[a * n_truth + best];
    if (v >= iou_pos) {
      make_positive(a, best);
    } else if (v < iou_neg) {
      targets[a].label = AnchorLabel::kNegative;
    }
  }
  for (std::size_t t = 0; t < n_truth; ++t) {
    std::size_t best = 0;
    for (std::size_t a = 1; a < anchors.size(); ++a) {
      if (overlap[a * n_truth + t] > overlap[best * n_truth + t]) best = a;
    }
    if (targets[best].label != AnchorLabel::kPositive) make_positive(best, t);
  }
  // A truth whose best anchor went to another truth takes its best free anchor.
  for (std::size_t t = 0; t < n_truth; ++t) {
    const bool covered = std::any_of(targets.begin(), targets.end(), [&](const AnchorTarget& x) {
      return x.label == AnchorLabel::kPositive && x.truth_index == t;
    });
    if (covered) continue;
    std::optional<std::size_t> best;
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      if (targets[a].label == AnchorLabel::kPositive) continue;
      if (!best || overlap[a * n_truth + t] > overlap[*best * n_truth + t]) best = a;
    }
    if (best) make_positive(*best, t);
  }
  return targets;
}

DetectionLoss detection_loss(const Tensor& cls_scores, const Tensor& box_deltas,
                             std::span<const AnchorTarget> targets, double lambda, double n_cls, double n_reg) {
  if (cls_scores.rank() != 2 || box_deltas.rank() != 2 || box_deltas.dim(1) != 4 ||
      cls_scores.dim(0) != targets.size() || box_deltas.dim(0) != targets.size()) {
    throw ShapeError("detection_loss: scores " + shape_to_string(cls_scores.shape()) + " and deltas " +
                     shape_to_string(box_deltas.shape()) + " do not align with " + std::to_string(targets.size()) +
                     " anchor targets");
  }
  if (!(n_cls > 0.0) || !(n_reg > 0.0)) throw ValueError("detection_loss: normalisers must be positive");
  const std::size_t k = cls_scores.dim(1);
  std::vector<std::size_t> rows, labels, positive_cells;
  std::vector<double> regression_targets;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const AnchorTarget& t = targets[i];
    if (t.label == AnchorLabel::kIgnore) continue;
    for (std::size_t j = 0; j < k; ++j) rows.push_back(i * k + j);
    labels.push_back(t.label == AnchorLabel::kPositive ? t.class_id + 1 : 0);
    if (t.label == AnchorLabel::kPositive) {
      for (std::size_t j = 0; j < 4; ++j) positive_cells.push_back(i * 4 + j);
      regression_targets.insert(regression_targets.end(), {t.delta.tx, t.delta.ty, t.delta.tw, t.delta.th});
    }
  }
  DetectionLoss out;
  if (labels.empty()) {
    out.total = Tensor::scalar(0.0);
    return out;
  }
  const Tensor picked = gather(cls_scores, rows, {labels.size(), k});
  const Tensor cls = scale(softmax_cross_entropy_rows(picked, labels), 1.0 / n_cls);
  out.classification = cls.item();
  out.total = cls;
  if (!positive_cells.empty()) {
    const Tensor pred = gather(box_deltas, positive_cells, {positive_cells.size()});
    const Tensor diff = sub(pred, Tensor({positive_cells.size()}, std::move(regression_targets)));
    const Tensor reg = scale(sum_all(smooth_l1(diff)), lambda / n_reg);
    out.regression = reg.item();
    out.total = add(cls, reg);
  }
  return out;
}

std::vector<AnchorTarget> sample_targets(std::vector<AnchorTarget> targets, std::size_t sample_size,
                                         double positive_fraction, std::uint64_t seed) {
  std::vector<std::size_t> positives, negatives;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i].label == AnchorLabel::kPositive) positives.push_back(i);
    if (targets[i].label == AnchorLabel::kNegative) negatives.push_back(i);
  }
  Rng rng(seed);
  auto choose = [&](std::vector<std::size_t>& pool, std::size_t count) {
    count = std::min(count, pool.size());
    for (std::size_t i = 0; i < count; ++i) {
      std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
    }
    pool.resize(count);
  };
  const auto positive_budget = static_cast<std::size_t>(std::floor(static_cast<double>(sample_size) * positive_fraction));
  choose(positives, positive_budget);
  choose(negatives, sample_size - positives.size());
  std::vector<char> keep(targets.size(), 0);
  for (std::size_t i : positives) keep[i] = 1;
  for (std::size_t i : negatives) keep[i] = 1;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!keep[i]) targets[i].label = AnchorLabel::kIgnore;
  }
  return targets;
}

// ---------------------------------------------------------------------------
// Detector model

void DetectorConfig::validate() const {
  if (class_names.empty()) throw ConfigError("detector needs at least one class");
  if (stride < 2 || (stride & (stride - 1)) != 0) {
    throw ConfigError("detector stride must be a power of two >= 2, got " + std::to_string(stride));
  }
  if (image_size % stride != 0) {
    throw ConfigError("detector stride " + std::to_string(stride) + " does not divide image size " +
                      std::to_string(image_size));
  }
  if (width == 0 || channels == 0) throw ConfigError("detector width and channels must be positive");
  if (scales.empty() || ratios.empty()) throw ConfigError("detector needs anchor scales and ratios");
  if (!(iou_neg < iou_pos)) throw ConfigError("detector iou_neg must be below iou_pos");
  if (!(positive_fraction > 0.0 && positive_fraction <= 1.0)) throw ConfigError("positive fraction must be in (0, 1]");
  if (sample_size == 0) throw ConfigError("anchor sample size must be positive");
  if (lambda < 0.0 || n_reg < 0.0) throw ConfigError("lambda and n_reg must be nonnegative");
  if (!std::isfinite(input_shift)) throw ConfigError("detector input shift must be finite");
}

nlohmann::json DetectorConfig::to_json() const {
  return {{"image_size", image_size}, {"channels", channels},   {"class_names", class_names},
          {"width", width},           {"stride", stride},       {"scales", scales},
          {"ratios", ratios},         {"iou_pos", iou_pos},     {"iou_neg", iou_neg},
          {"lambda", lambda},         {"sample_size", sample_size}, {"positive_fraction", positive_fraction},
          {"n_reg", n_reg},           {"input_shift", input_shift}};
}

DetectorConfig DetectorConfig::from_json(const nlohmann::json& j) {
  DetectorConfig c;
  try {
    c.image_size = j.at("image_size");
    c.channels = j.at("channels");
    c.class_names = j.at("class_names").get<std::vector<std::string>>();
    c.width = j.at("width");
    c.stride = j.at("stride");
    c.scales = j.at("scales").get<std::vector<double>>();
    c.ratios = j.at("ratios").get<std::vector<double>>();
    c.iou_pos = j.at("iou_pos");
    c.iou_neg = j.at("iou_neg");
    c.lambda = j.at("lambda");
    c.sample_size = j.at("sample_size");
    c.positive_fraction = j.at("positive_fraction");
    c.n_reg = j.at("n_reg");
    c.input_shift = j.value("input_shift", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("detector config: ") + e.what());
  }
  c.validate();
  return c;
}

Model make_detector(const DetectorConfig& config) {
  config.validate();
  std::vector<LayerSpec> layers;
  std::size_t in = config.channels, out = config.width;
  for (std::size_t s = config.stride; s > 1; s /= 2) {
    layers.push_back(LayerSpec::conv(in, out, 3, 1, 1));
    layers.push_back(LayerSpec::relu());
    layers.push_back(LayerSpec::maxpool(2, 2));
    in = out;
    out = 2 * config.width;
  }
  layers.push_back(LayerSpec::conv(in, out, 3, 1, 1));
  layers.push_back(LayerSpec::relu());
  const std::size_t a = config.anchors_per_cell();
  layers.push_back(LayerSpec::conv(out, a * (config.class_names.size() + 1) + 4 * a, 1));
  std::vector<std::string> labels{"background"};
  labels.insert(labels.end(), config.class_names.begin(), config.class_names.end());
  Model model({config.channels, config.image_size, config.image_size}, std::move(layers), std::move(labels));
  model.attributes()["role"] = "detector";
  model.attributes()["detector"] = config.to_json();
  return model;
}

DetectorConfig detector_config(const Model& detector) {
  if (!detector.attributes().contains("detector")) throw ConfigError("model carries no detector configuration");
  return DetectorConfig::from_json(detector.attributes()["detector"]);
}

namespace {

struct HeadLayout {
  std::vector<std::size_t> score_index;  // [N * (C+1)]
  std::vector<std::size_t> delta_index;  // [N * 4]
  std::size_t anchors = 0;
  std::size_t classes = 0;  // including background
};

HeadLayout head_layout(const DetectorConfig& config) {
  const std::size_t cells = config.image_size / config.stride;
  const std::size_t plane = cells * cells;
  const std::size_t a = config.anchors_per_cell();
  HeadLayout layout;
  layout.classes = config.class_names.size() + 1;
  layout.anchors = plane * a;
  for (std::size_t cell = 0; cell < plane; ++cell) {
    for (std::size_t slot = 0; slot < a; ++slot) {
      for (std::size_t k = 0; k < layout.classes; ++k) {
        layout.score_index.push_back((slot * layout.classes + k) * plane + cell);
      }
      for (std::size_t j = 0; j < 4; ++j) {
        layout.delta_index.push_back((a * layout.classes + slot * 4 + j) * plane + cell);
      }
    }
  }
  return layout;
}

HeadOutputs split_head(const Tensor& head, const HeadLayout& layout) {
  return {gather(head, layout.score_index, {layout.anchors, layout.classes}),
          gather(head, layout.delta_index, {layout.anchors, 4})};
}

std::vector<Anchor> anchors_for(const DetectorConfig& config) {
  return generate_anchors(config.image_size, config.image_size, config.stride, config.scales, config.ratios);
}

Tensor attend(const Tensor& image, const Ventral* ventral) {
  if (!ventral) return image;
  return ventral_pipeline(ventral->classifier, image, ventral->config).masked_image;
}

Tensor shifted(const Tensor& image, const DetectorConfig& config) {
  if (config.input_shift == 0.0) return image;
  return sub(image, Tensor::full(image.shape(), config.input_shift));
}

}  // namespace

HeadOutputs run_detector(const Model& detector, const Tensor& image) {
  const DetectorConfig config = detector_config(detector);
  return split_head(forward(detector, shifted(image, config)).output, head_layout(config));
}

nlohmann::json DetectorTrainingReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : epochs) {
    rows.push_back({{"epoch", e.epoch},
                    {"loss", e.loss},
                    {"classification", e.classification},
                    {"regression", e.regression},
                    {"learning_rate", e.learning_rate}});
  }
  return {{"masked", masked}, {"epochs", rows}};
}

DetectorTrainingReport train_detector(Model& detector, std::span<const Scene> scenes, const Ventral* ventral,
                                      const Schedule& schedule, SgdMomentumState* final_state) {
  const DetectorConfig config = detector_config(detector);
  if (scenes.empty()) throw ValueError("train_detector: empty dataset");
  const std::vector<Anchor> anchors = anchors_for(config);
  const HeadLayout layout = head_layout(config);
  const double n_reg = config.n_reg > 0.0 ? config.n_reg : static_cast<double>(anchors.size());

  std::vector<Tensor> inputs;
  std::vector<std::vector<AnchorTarget>> targets;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Scene& s = scenes[i];
    if (s.annotations.empty()) {
      throw ValueError("train_detector: scene " + std::to_string(i) + " (seed " + std::to_string(s.seed) +
                       ") has no annotated objects");
    }
    for (const Annotation& a : s.annotations) {
      if (a.class_id >= config.class_names.size() || !a.box.valid()) {
        throw ValueError("train_detector: scene " + std::to_string(i) + " has an invalid annotation " +
                         to_string(a.box));
      }
    }
    inputs.push_back(shifted(attend(s.image, ventral), config));
    targets.push_back(assign_targets(anchors, s.annotations, config.iou_pos, config.iou_neg));
  }

  SgdMomentumState state{schedule.learning_rate, schedule.momentum, {}};
  DetectorTrainingReport report;
  report.masked = ventral != nullptr;
  std::vector<DetectionLoss> losses(scenes.size());
  for (std::size_t epoch = 0; epoch < schedule.epochs; ++epoch) {
    state.learning_rate = schedule.learning_rate_at(epoch);
    const std::uint64_t epoch_seed = Rng::derive(schedule.seed, epoch);
    for (const auto& batch : make_batches(scenes.size(), schedule.batch_size, epoch_seed)) {
      std::map<std::string, std::vector<double>> accum;
      const double weight = 1.0 / static_cast<double>(batch.size());
      for (std::size_t idx : batch) {
        const auto sampled = sample_targets(targets[idx], config.sample_size, config.positive_fraction,
                                            Rng::derive(epoch_seed ^ 0x5a5a5a5a5a5a5a5aULL, idx));
        std::size_t n_cls = 0;
        for (const auto& t : sampled) n_cls += t.label != AnchorLabel::kIgnore;
        const HeadOutputs head = split_head(forward(detector, inputs[idx]).output, layout);
        losses[idx] = detection_loss(head.scores, head.deltas, sampled, config.lambda,
                                     static_cast<double>(std::max<std::size_t>(n_cls, 1)), n_reg);
        if (!std::isfinite(losses[idx].total.item())) {
          throw DivergenceError("detector loss became non-finite in epoch " + std::to_string(epoch));
        }
        const GradientMap grads = backward(scale(losses[idx].total, weight));
        for (const auto& [name, p] : detector.parameters()) {
          auto& acc = accum[name];
          if (acc.empty()) acc.assign(p.numel(), 0.0);
          if (!grads.contains(p)) continue;
          auto g = grads.at(p).data();
          for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
        }
      }
      NamedTensors grad_tensors;
      for (auto& [name, values] : accum) grad_tensors[name] = Tensor(detector.parameter(name).shape(), std::move(values));
      detector.set_parameters(sgd_step(state, detector.parameters(), grad_tensors));
    }
    DetectorEpochStats stats;
    stats.epoch = epoch;
    stats.learning_rate = state.learning_rate;
    for (const DetectionLoss& l : losses) {
      stats.loss += l.total.item();
      stats.classification += l.classification;
      stats.regression += l.regression;
    }
    const double n = static_cast<double>(scenes.size());
    stats.loss /= n;
    stats.classification /= n;
    stats.regression /= n;
    report.epochs.push_back(stats);
  }
  if (final_state) *final_state = std::move(state);
  return report;
}

DetectResult detect(const Model& detector, const Tensor& image, const Ventral* ventral, const DetectOptions& options) {
  if (!(options.score_thresh >= 0.0 && options.score_thresh <= 1.0) ||
      !(options.nms_thresh >= 0.0 && options.nms_thresh <= 1.0)) {
    throw ValueError("detect: thresholds must lie in [0, 1]");
  }
  const DetectorConfig config = detector_config(detector);
  const std::vector<Anchor> anchors = anchors_for(config);
  const Tensor input = attend(image, ventral);  // needs gradients, so before the guard
  NoGradGuard no_grad;
  const HeadOutputs head = run_detector(detector, input);
  const std::size_t k = config.class_names.size() + 1;
  const double side = static_cast<double>(config.image_size);
  auto scores = head.scores.data();
  auto deltas = head.deltas.data();

  DetectResult result;
  std::vector<Detection> candidates;
  double lowest = 1.0, highest = 0.0;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const std::vector<double> p = softmax(scores.subspan(i * k, k));
    lowest = std::min(lowest, 1.0 - p[0]);
    highest = std::max(highest, 1.0 - p[0]);
    const BoxDelta d{deltas[i * 4], deltas[i * 4 + 1], deltas[i * 4 + 2], deltas[i * 4 + 3]};
    std::optional<Box> box;
    for (std::size_t c = 1; c < k; ++c) {
      if (!(p[c] > options.score_thresh)) continue;
      if (!box) box = clip_box(decode_box(d, anchors[i]), side, side);
      if (!box->valid()) break;
      candidates.push_back({*box, c - 1, p[c]});
    }
  }
  if (highest - lowest < 1e-6) {
    result.warning = "objectness scores are identical across all anchors; the detector looks untrained";
  }
  result.detections = nms(std::move(candidates), options.nms_thresh);
  return result;
}

}  // namespace vdnet
