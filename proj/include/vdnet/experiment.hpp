#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "vdnet/data.hpp"
#include "vdnet/dorsal.hpp"
#include "vdnet/eval.hpp"
#include "vdnet/network.hpp"
#include "vdnet/ventral.hpp"

namespace vdnet {

/// Ventral classifier training recipe.
struct VentralTraining {
  PatchConfig patches;
  std::size_t width = 16;
  double background_penalty = 10.0;
  std::uint64_t init_seed = 1;
  Schedule schedule;

  VentralTraining();
  /// Derives the init, shuffling and patch sampling seeds from one seed.
  void reseed(std::uint64_t seed);
  nlohmann::json to_json() const;
};

/// Detector training recipe.
struct DorsalTraining {
  DetectorConfig detector;
  std::uint64_t init_seed = 1;
  Schedule schedule;

  DorsalTraining();
  void reseed(std::uint64_t seed);
  nlohmann::json to_json() const;
};

std::vector<LabeledSample> patch_samples(const std::vector<Scene>& scenes, const PatchConfig& config);

struct VentralRun {
  Model classifier;
  TrainingReport report;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;  // patches cut from the held-out scenes
  double seconds = 0.0;
};

VentralRun run_ventral_training(const std::vector<Scene>& train, const std::vector<Scene>& test,
                                const std::vector<std::string>& class_names, const VentralTraining& recipe);

struct DorsalRun {
  Model detector;
  DetectorTrainingReport report;
  double seconds = 0.0;
};

DorsalRun run_dorsal_training(const std::vector<Scene>& train, const Ventral* ventral, const DorsalTraining& recipe);

/// Detections over a split, with per-image mask statistics when masked.
struct ArmEvaluation {
  ArmResult arm;
  std::vector<double> mask_coverage;    // fraction of pixels kept
  std::vector<double> object_coverage;  // fraction of box pixels kept
};

ArmEvaluation run_arm(const Model& detector, const std::vector<Scene>& scenes, const Ventral* ventral,
                      const DetectOptions& options = {});

std::vector<std::vector<Annotation>> truths_of(const std::vector<Scene>& scenes);

struct EndToEndConfig {
  DatasetConfig data;
  VentralTraining ventral;
  VentralConfig saliency;
  DorsalTraining dorsal;
  DetectOptions detect;
  double iou_threshold = 0.5;

  /// Defaults with the dataset and every training seed derived from `seed`.
  static EndToEndConfig seeded(std::uint64_t seed);
  nlohmann::json to_json() const;
};

struct EndToEndResult {
  VentralRun ventral;
  DorsalRun plain;
  DorsalRun masked;
  ComparisonReport comparison;
  nlohmann::json to_json() const;
};

EndToEndResult run_end_to_end(const EndToEndConfig& config);

struct AblationRow {
  double variance = 0.0;
  double map = 0.0;
  double mask_coverage = 0.0;
  double object_coverage = 0.0;
  bool in_tuned_band = false;  // 25 <= variance <= 35
};

struct AblationReport {
  std::vector<AblationRow> rows;
  nlohmann::json to_json() const;
  std::string to_table() const;
};

/// Retrains the masked detector for each variance, re-masking both splits,
/// and evaluates on the test split. The classifier is shared.
AblationReport ablate_variance(const Model& classifier, const VentralConfig& base, const std::vector<double>& variances,
                               const std::vector<Scene>& train, const std::vector<Scene>& test,
                               const DorsalTraining& recipe, const DetectOptions& options = {},
                               double iou_threshold = 0.5);

AblationRow ablation_row(double variance, const EvalReport& report, const ArmEvaluation& arm);

}  // namespace vdnet
