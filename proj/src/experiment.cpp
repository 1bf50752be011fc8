#include "vdnet/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <numeric>

#include "vdnet/errors.hpp"
#include "vdnet/rng.hpp"

namespace vdnet {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

nlohmann::json patch_json(const PatchConfig& p) {
  return {{"patch_size", p.patch_size},
          {"background_per_scene", p.background_per_scene},
          {"max_background_overlap", p.max_background_overlap},
          {"min_background_side", p.min_background_side},
          {"max_background_side", p.max_background_side},
          {"seed", p.seed}};
}

}  // namespace

VentralTraining::VentralTraining() {
  patches.background_per_scene = 2;
  schedule.epochs = 60;
  schedule.batch_size = 16;
  schedule.learning_rate = 0.02;
}

void VentralTraining::reseed(std::uint64_t seed) {
  init_seed = Rng::derive(seed, 1);
  schedule.seed = Rng::derive(seed, 2);
  patches.seed = Rng::derive(seed, 3);
}

nlohmann::json VentralTraining::to_json() const {
  return {{"patches", patch_json(patches)},
          {"width", width},
          {"background_penalty", background_penalty},
          {"init_seed", init_seed},
          {"schedule", schedule.to_json()}};
}

DorsalTraining::DorsalTraining() {
  schedule.epochs = 60;
  schedule.batch_size = 8;
  schedule.learning_rate = 0.05;
  schedule.decay_epochs = {40, 50};
}

void DorsalTraining::reseed(std::uint64_t seed) {
  init_seed = Rng::derive(seed, 4);
  schedule.seed = Rng::derive(seed, 5);
}

nlohmann::json DorsalTraining::to_json() const {
  return {{"detector", detector.to_json()}, {"init_seed", init_seed}, {"schedule", schedule.to_json()}};
}

std::vector<LabeledSample> patch_samples(const std::vector<Scene>& scenes, const PatchConfig& config) {
  std::vector<LabeledSample> out;
  for (auto& p : classification_patches(scenes, config)) out.push_back({std::move(p.image), p.label});
  return out;
}

VentralRun run_ventral_training(const std::vector<Scene>& train, const std::vector<Scene>& test,
                                const std::vector<std::string>& class_names, const VentralTraining& recipe) {
  if (train.empty()) throw ValueError("run_ventral_training: empty training split");
  const auto start = std::chrono::steady_clock::now();
  const std::vector<LabeledSample> train_patches = patch_samples(train, recipe.patches);
  VentralRun run{make_patch_classifier(train[0].image.dim(0), recipe.patches.patch_size, class_names, recipe.width),
                 {}, 0.0, 0.0, 0.0};
  run.classifier.initialize(recipe.init_seed);
  run.report = train_patch_classifier(run.classifier, train_patches, recipe.schedule, recipe.background_penalty);
  run.seconds = seconds_since(start);
  run.train_accuracy = evaluate_accuracy(run.classifier, train_patches);
  if (!test.empty()) run.test_accuracy = evaluate_accuracy(run.classifier, patch_samples(test, recipe.patches));
  return run;
}

DorsalRun run_dorsal_training(const std::vector<Scene>& train, const Ventral* ventral, const DorsalTraining& recipe) {
  const auto start = std::chrono::steady_clock::now();
  DorsalRun run{make_detector(recipe.detector), {}, 0.0};
  run.detector.initialize(recipe.init_seed);
  run.report = train_detector(run.detector, train, ventral, recipe.schedule);
  run.seconds = seconds_since(start);
  return run;
}

ArmEvaluation run_arm(const Model& detector, const std::vector<Scene>& scenes, const Ventral* ventral,
                      const DetectOptions& options) {
  ArmEvaluation out;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Scene& s = scenes[i];
    out.arm.image_ids.push_back(std::to_string(i));
    if (ventral) {
      const SaliencyArtifacts a = ventral_pipeline(ventral->classifier, s.image, ventral->config);
      std::vector<Box> boxes;
      for (const auto& ann : s.annotations) boxes.push_back(ann.box);
      out.mask_coverage.push_back(a.coverage());
      out.object_coverage.push_back(mask_box_coverage(a.mask, boxes));
      out.arm.detections.push_back(detect(detector, a.masked_image, nullptr, options).detections);
    } else {
      out.arm.detections.push_back(detect(detector, s.image, nullptr, options).detections);
    }
  }
  return out;
}

std::vector<std::vector<Annotation>> truths_of(const std::vector<Scene>& scenes) {
  std::vector<std::vector<Annotation>> out;
  for (const auto& s : scenes) out.push_back(s.annotations);
  return out;
}

EndToEndConfig EndToEndConfig::seeded(std::uint64_t seed) {
  EndToEndConfig c;
  c.data.seed = seed;
  c.ventral.reseed(seed);
  c.dorsal.reseed(seed);
  return c;
}

nlohmann::json EndToEndConfig::to_json() const {
  return {{"data", data.to_json()},
          {"ventral_training", ventral.to_json()},
          {"saliency", saliency.to_json()},
          {"dorsal_training", dorsal.to_json()},
          {"detect", {{"score_thresh", detect.score_thresh}, {"nms_thresh", detect.nms_thresh}}},
          {"iou_threshold", iou_threshold}};
}

EndToEndResult run_end_to_end(const EndToEndConfig& config) {
  const DatasetManifest manifest = make_manifest(config.data);
  const std::vector<Scene> train = materialize(manifest, "train");
  const std::vector<Scene> test = materialize(manifest, "test");
  const auto& names = config.data.scene.class_names;

  EndToEndResult r;
  r.ventral = run_ventral_training(train, test, names, config.ventral);
  const Ventral ventral{r.ventral.classifier, config.saliency};
  r.plain = run_dorsal_training(train, nullptr, config.dorsal);
  r.masked = run_dorsal_training(train, &ventral, config.dorsal);

  const ArmEvaluation plain = run_arm(r.plain.detector, test, nullptr, config.detect);
  ArmEvaluation masked = run_arm(r.masked.detector, test, &ventral, config.detect);
  r.comparison = compare_masked_unmasked(plain.arm, masked.arm, truths_of(test), names,
                                         std::move(masked.mask_coverage), std::move(masked.object_coverage),
                                         config.iou_threshold);
  return r;
}

nlohmann::json EndToEndResult::to_json() const {
  return {{"ventral",
           {{"train_accuracy", ventral.train_accuracy},
            {"test_accuracy", ventral.test_accuracy},
            {"seconds", ventral.seconds},
            {"report", ventral.report.to_json()}}},
          {"dorsal_plain", {{"seconds", plain.seconds}, {"report", plain.report.to_json()}}},
          {"dorsal_masked", {{"seconds", masked.seconds}, {"report", masked.report.to_json()}}},
          {"comparison", comparison.to_json()}};
}

AblationRow ablation_row(double variance, const EvalReport& report, const ArmEvaluation& arm) {
  return {variance, report.mean_ap, mean_of(arm.mask_coverage), mean_of(arm.object_coverage),
          variance >= 25.0 && variance <= 35.0};
}

AblationReport ablate_variance(const Model& classifier, const VentralConfig& base, const std::vector<double>& variances,
                               const std::vector<Scene>& train, const std::vector<Scene>& test,
                               const DorsalTraining& recipe, const DetectOptions& options, double iou_threshold) {
  if (variances.empty()) throw ValueError("ablate_variance: no variances given");
  AblationReport report;
  const auto truths = truths_of(test);
  for (double v : variances) {
    Ventral ventral{classifier, base};
    ventral.config.gaussian_variance = v;
    ventral.config.validate();
    const DorsalRun run = run_dorsal_training(train, &ventral, recipe);
    const ArmEvaluation arm = run_arm(run.detector, test, &ventral, options);
    const EvalReport eval = evaluate(arm.arm.detections, truths, recipe.detector.class_names, iou_threshold);
    report.rows.push_back(ablation_row(v, eval, arm));
  }
  return report;
}

nlohmann::json AblationReport::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"variance", r.variance},
                   {"mAP", r.map},
                   {"mask_coverage", r.mask_coverage},
                   {"object_coverage", r.object_coverage},
                   {"in_tuned_band", r.in_tuned_band}});
  }
  return {{"rows", out}};
}

std::string AblationReport::to_table() const {
  std::string out = "variance      mAP   kept%  object%\n";
  char line[96];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%8.1f %8.3f %7.1f %8.1f%s\n", r.variance, r.map, 100.0 * r.mask_coverage,
                  100.0 * r.object_coverage, r.in_tuned_band ? "  * tuned band [25, 35]" : "");
    out += line;
  }
  return out;
}

}  // namespace vdnet
