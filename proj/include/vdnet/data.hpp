#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "vdnet/box.hpp"
#include "vdnet/tensor.hpp"

namespace vdnet {

/// Parameters of the synthetic shapes generator. Intensities and noise are in
/// 8-bit units so rendering is pure integer arithmetic.
struct SceneConfig {
  std::size_t image_size = 64;
  std::size_t channels = 3;
  std::vector<std::string> class_names{"circle", "square", "triangle"};
  std::size_t min_objects = 1;
  std::size_t max_objects = 3;
  std::size_t min_object_size = 10;
  std::size_t max_object_size = 22;
  int background_min = 30;
  int background_max = 80;
  int object_min = 150;
  int object_max = 255;
  int noise_level = 12;
  /// Gap in pixels kept between object boxes.
  std::size_t spacing = 2;

  void validate() const;
  nlohmann::json to_json() const;
  static SceneConfig from_json(const nlohmann::json& j);
};

/// Object instance. `class_id` indexes SceneConfig::class_names; detectors
/// and classifiers reserve label 0 for background and use class_id + 1.
struct Annotation {
  std::size_t class_id = 0;
  Box box;
};

struct Scene {
  Tensor image;  // [c, m, n], values in [0, 1]
  std::vector<Annotation> annotations;
  std::uint64_t seed = 0;
};

/// Renders a scene. Deterministic in (seed, config); throws ConfigError when
/// the requested objects cannot be placed.
Scene generate_scene(std::uint64_t seed, const SceneConfig& config);

struct DatasetConfig {
  SceneConfig scene;
  std::uint64_t seed = 7;
  std::size_t train_count = 200;
  std::size_t test_count = 50;

  nlohmann::json to_json() const;
};

struct ManifestEntry {
  std::uint64_t seed = 0;
  std::string split;  // "train" or "test"
  std::string stem;
};

struct DatasetManifest {
  std::string config_hash;
  SceneConfig scene;
  std::uint64_t master_seed = 0;
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> split(const std::string& name) const;
  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j);
};

/// 64-bit FNV-1a of a string, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

DatasetManifest make_manifest(const DatasetConfig& config);
std::vector<Scene> materialize(const DatasetManifest& manifest, const std::string& split);

/// Writes manifest.json, annotations.jsonl and images/<stem>.ppm under `dir`.
void write_dataset(const std::filesystem::path& dir, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& dir);
/// Scenes of a split, read from the cached PPMs when present, otherwise regenerated.
std::vector<Scene> load_split(const std::filesystem::path& dir, const DatasetManifest& manifest,
                              const std::string& split);

nlohmann::json annotation_record(const std::string& stem, const Scene& scene,
                                 const std::vector<std::string>& class_names);

struct PatchConfig {
  std::size_t patch_size = 16;
  /// Background crops attempted per scene.
  std::size_t background_per_scene = 1;
  /// A background crop may overlap any object by at most this fraction of its area.
  double max_background_overlap = 0.1;
  /// Side range of background windows, matched to typical object sizes.
  std::size_t min_background_side = 10;
  std::size_t max_background_side = 22;
  std::uint64_t seed = 11;
};

struct LabeledPatch {
  Tensor image;       // [c, patch_size, patch_size]
  std::size_t label;  // 0 background, class_id + 1 otherwise
  Box region;         // source window in scene coordinates
  std::size_t scene_index;
};

/// Object crops (square window around each box) and background crops,
/// bilinearly resampled to patch_size.
std::vector<LabeledPatch> classification_patches(const std::vector<Scene>& scenes,
                                                 const PatchConfig& config);

/// Bilinear resample of `region` from image[c,h,w] onto a size x size grid.
Tensor crop_resize(const Tensor& image, const Box& region, std::size_t size);

}  // namespace vdnet
