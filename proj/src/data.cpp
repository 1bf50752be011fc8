#include "vdnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "vdnet/image_io.hpp"
#include "vdnet/rng.hpp"

namespace vdnet {

void SceneConfig::validate() const {
  if (image_size == 0) throw ConfigError("image_size must be positive");
  if (channels != 1 && channels != 3) throw ConfigError("channels must be 1 or 3");
  if (class_names.empty()) throw ConfigError("at least one class is required");
  if (min_objects > max_objects) throw ConfigError("min_objects exceeds max_objects");
  if (min_object_size < 2 || min_object_size > max_object_size) {
    throw ConfigError("object size range [" + std::to_string(min_object_size) + ", " +
                      std::to_string(max_object_size) + "] is invalid");
  }
  if (max_objects > 0 && max_object_size > image_size) {
    throw ConfigError("objects of size " + std::to_string(max_object_size) +
                      " cannot fit in a " + std::to_string(image_size) + " pixel image");
  }
  if (background_min < 0 || background_max > 255 || background_min > background_max ||
      object_min < 0 || object_max > 255 || object_min > object_max || noise_level < 0) {
    throw ConfigError("intensity ranges must lie in [0,255]");
  }
}

nlohmann::json SceneConfig::to_json() const {
  return {{"image_size", image_size},
          {"channels", channels},
          {"class_names", class_names},
          {"min_objects", min_objects},
          {"max_objects", max_objects},
          {"min_object_size", min_object_size},
          {"max_object_size", max_object_size},
          {"background_min", background_min},
          {"background_max", background_max},
          {"object_min", object_min},
          {"object_max", object_max},
          {"noise_level", noise_level},
          {"spacing", spacing}};
}

SceneConfig SceneConfig::from_json(const nlohmann::json& j) {
  SceneConfig c;
  c.image_size = j.at("image_size");
  c.channels = j.at("channels");
  c.class_names = j.at("class_names").get<std::vector<std::string>>();
  c.min_objects = j.at("min_objects");
  c.max_objects = j.at("max_objects");
  c.min_object_size = j.at("min_object_size");
  c.max_object_size = j.at("max_object_size");
  c.background_min = j.at("background_min");
  c.background_max = j.at("background_max");
  c.object_min = j.at("object_min");
  c.object_max = j.at("object_max");
  c.noise_level = j.at("noise_level");
  c.spacing = j.at("spacing");
  return c;
}

namespace {

// Pixel membership of a shape inside its s x s footprint, integer-only.
bool shape_covers(const std::string& kind, std::size_t s, std::size_t i, std::size_t j) {
  const long n = static_cast<long>(s);
  const long u = 2 * static_cast<long>(i) + 1 - n;
  const long v = 2 * static_cast<long>(j) + 1 - n;
  if (kind == "square") return true;
  if (kind == "circle") return u * u + v * v <= n * n;
  if (kind == "triangle") {
    // Apex at the top centre, base on the bottom row.
    return std::abs(u) <= 2 * static_cast<long>(j) + 1;
  }
  throw ConfigError("unknown shape class '" + kind + "'");
}

struct Placement {
  std::size_t x0, y0, size, class_id;
};

bool overlaps(const Placement& a, const Placement& b, std::size_t gap) {
  return a.x0 < b.x0 + b.size + gap && b.x0 < a.x0 + a.size + gap && a.y0 < b.y0 + b.size + gap &&
         b.y0 < a.y0 + a.size + gap;
}

}  // namespace

Scene generate_scene(std::uint64_t seed, const SceneConfig& config) {
  config.validate();
  const std::size_t side = config.image_size;
  const std::size_t plane = side * side;
  const std::size_t c = config.channels;
  Rng rng(seed);

  std::vector<int> pixels(c * plane);
  const int base = static_cast<int>(rng.between(config.background_min, config.background_max));
  const int texture = static_cast<int>(rng.between(0, 12));
  const std::size_t cell = static_cast<std::size_t>(rng.between(4, 12));
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const int check = ((x / cell + y / cell) % 2 == 0) ? texture : 0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const int noise = static_cast<int>(rng.between(-config.noise_level, config.noise_level));
        pixels[ch * plane + y * side + x] = base + check + noise;
      }
    }
  }

  const std::size_t count = static_cast<std::size_t>(
      rng.between(static_cast<std::int64_t>(config.min_objects), static_cast<std::int64_t>(config.max_objects)));
  std::vector<Placement> placed;
  constexpr int kAttempts = 500;
  for (std::size_t k = 0; k < count; ++k) {
    bool ok = false;
    for (int attempt = 0; attempt < kAttempts && !ok; ++attempt) {
      Placement p;
      p.size = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(config.min_object_size),
                                                    static_cast<std::int64_t>(config.max_object_size)));
      p.x0 = static_cast<std::size_t>(rng.between(0, static_cast<std::int64_t>(side - p.size)));
      p.y0 = static_cast<std::size_t>(rng.between(0, static_cast<std::int64_t>(side - p.size)));
      p.class_id = static_cast<std::size_t>(rng.below(config.class_names.size()));
      ok = std::none_of(placed.begin(), placed.end(),
                        [&](const Placement& q) { return overlaps(p, q, config.spacing); });
      if (ok) placed.push_back(p);
    }
    if (!ok) {
      throw ConfigError("could not place object " + std::to_string(k + 1) + " of " +
                        std::to_string(count) + " without overlap (seed " + std::to_string(seed) + ")");
    }
  }

  Scene scene;
  scene.seed = seed;
  for (const Placement& p : placed) {
    const std::string& kind = config.class_names[p.class_id];
    std::vector<int> colour(c);
    for (int& v : colour) v = static_cast<int>(rng.between(config.object_min, config.object_max));
    std::size_t min_x = side, min_y = side, max_x = 0, max_y = 0;
    for (std::size_t j = 0; j < p.size; ++j) {
      for (std::size_t i = 0; i < p.size; ++i) {
        if (!shape_covers(kind, p.size, i, j)) continue;
        const std::size_t x = p.x0 + i, y = p.y0 + j;
        for (std::size_t ch = 0; ch < c; ++ch) pixels[ch * plane + y * side + x] = colour[ch];
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
      }
    }
    scene.annotations.push_back(
        {p.class_id, Box{static_cast<double>(min_x), static_cast<double>(min_y),
                         static_cast<double>(max_x + 1), static_cast<double>(max_y + 1)}});
  }

  std::vector<double> data(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) data[i] = std::clamp(pixels[i], 0, 255) / 255.0;
  scene.image = Tensor({c, side, side}, std::move(data));
  return scene;
}

nlohmann::json DatasetConfig::to_json() const {
  return {{"scene", scene.to_json()},
          {"seed", seed},
          {"train_count", train_count},
          {"test_count", test_count}};
}

std::vector<ManifestEntry> DatasetManifest::split(const std::string& name) const {
  std::vector<ManifestEntry> out;
  std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
               [&](const ManifestEntry& e) { return e.split == name; });
  return out;
}

nlohmann::json DatasetManifest::to_json() const {
  nlohmann::json entries_json = nlohmann::json::array();
  for (const ManifestEntry& e : entries) {
    entries_json.push_back({{"seed", e.seed}, {"split", e.split}, {"stem", e.stem}});
  }
  return {{"config_hash", config_hash},
          {"class_names", scene.class_names},
          {"scene", scene.to_json()},
          {"master_seed", master_seed},
          {"entries", entries_json}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
  DatasetManifest m;
  m.config_hash = j.at("config_hash");
  m.scene = SceneConfig::from_json(j.at("scene"));
  m.master_seed = j.at("master_seed");
  for (const auto& e : j.at("entries")) {
    m.entries.push_back({e.at("seed").get<std::uint64_t>(), e.at("split"), e.at("stem")});
  }
  return m;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

DatasetManifest make_manifest(const DatasetConfig& config) {
  config.scene.validate();
  DatasetManifest m;
  m.scene = config.scene;
  m.master_seed = config.seed;
  m.config_hash = fnv1a_hex(config.to_json().dump());
  const std::size_t total = config.train_count + config.test_count;
  for (std::size_t i = 0; i < total; ++i) {
    const bool train = i < config.train_count;
    const std::size_t local = train ? i : i - config.train_count;
    char stem[32];
    std::snprintf(stem, sizeof stem, "%s_%04zu", train ? "train" : "test", local);
    // derive() is a bijection of the index for a fixed master seed, so
    // seeds never repeat across splits.
    m.entries.push_back({Rng::derive(config.seed, i), train ? "train" : "test", stem});
  }
  return m;
}

std::vector<Scene> materialize(const DatasetManifest& manifest, const std::string& split) {
  std::vector<Scene> scenes;
  for (const ManifestEntry& e : manifest.split(split)) scenes.push_back(generate_scene(e.seed, manifest.scene));
  return scenes;
}

nlohmann::json annotation_record(const std::string& stem, const Scene& scene,
                                 const std::vector<std::string>& class_names) {
  nlohmann::json objects = nlohmann::json::array();
  for (const Annotation& a : scene.annotations) {
    objects.push_back({{"class", class_names.at(a.class_id)},
                       {"box", {a.box.x_min, a.box.y_min, a.box.x_max, a.box.y_max}}});
  }
  return {{"image", stem}, {"objects", objects}};
}

void write_dataset(const std::filesystem::path& dir, const DatasetManifest& manifest) {
  std::filesystem::create_directories(dir / "images");
  {
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
    out << manifest.to_json().dump(2) << '\n';
  }
  std::ofstream ann(dir / "annotations.jsonl");
  if (!ann) throw IoError("cannot write " + (dir / "annotations.jsonl").string());
  for (const ManifestEntry& e : manifest.entries) {
    const Scene scene = generate_scene(e.seed, manifest.scene);
    write_ppm(dir / "images" / (e.stem + ".ppm"), scene.image);
    ann << annotation_record(e.stem, scene, manifest.scene.class_names).dump() << '\n';
  }
}

DatasetManifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("missing dataset manifest " + (dir / "manifest.json").string());
  try {
    return DatasetManifest::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed manifest: " + std::string(e.what()));
  }
}

std::vector<Scene> load_split(const std::filesystem::path& dir, const DatasetManifest& manifest,
                              const std::string& split) {
  std::vector<Scene> scenes;
  for (const ManifestEntry& e : manifest.split(split)) {
    Scene scene = generate_scene(e.seed, manifest.scene);
    const auto cached = dir / "images" / (e.stem + ".ppm");
    if (manifest.scene.channels == 3 && std::filesystem::exists(cached)) scene.image = read_ppm(cached);
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

Tensor crop_resize(const Tensor& image, const Box& region, std::size_t size) {
  if (image.rank() != 3) throw ShapeError("crop_resize expects [c,h,w]");
  if (!region.valid() || size == 0) throw ValueError("crop_resize: empty region " + to_string(region));
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  auto src = image.data();
  std::vector<double> out(c * size * size);
  const double sx = region.width() / static_cast<double>(size);
  const double sy = region.height() / static_cast<double>(size);
  for (std::size_t v = 0; v < size; ++v) {
    const double y = std::clamp(region.y_min + (static_cast<double>(v) + 0.5) * sy - 0.5, 0.0,
                                static_cast<double>(h - 1));
    const std::size_t y0 = static_cast<std::size_t>(std::floor(y));
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double fy = y - static_cast<double>(y0);
    for (std::size_t u = 0; u < size; ++u) {
      const double x = std::clamp(region.x_min + (static_cast<double>(u) + 0.5) * sx - 0.5, 0.0,
                                  static_cast<double>(w - 1));
      const std::size_t x0 = static_cast<std::size_t>(std::floor(x));
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double fx = x - static_cast<double>(x0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* p = src.data() + ch * h * w;
        const double top = p[y0 * w + x0] * (1 - fx) + p[y0 * w + x1] * fx;
        const double bottom = p[y1 * w + x0] * (1 - fx) + p[y1 * w + x1] * fx;
        out[(ch * size + v) * size + u] = top * (1 - fy) + bottom * fy;
      }
    }
  }
  return Tensor({c, size, size}, std::move(out));
}

std::vector<LabeledPatch> classification_patches(const std::vector<Scene>& scenes,
                                                 const PatchConfig& config) {
  std::vector<LabeledPatch> patches;
  Rng rng(config.seed);
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const Scene& scene = scenes[s];
    const double h = static_cast<double>(scene.image.dim(1));
    const double w = static_cast<double>(scene.image.dim(2));
    for (const Annotation& a : scene.annotations) {
      const double side = std::min(std::max(a.box.width(), a.box.height()), std::min(w, h));
      const double x0 = std::clamp(a.box.center_x() - side / 2, 0.0, w - side);
      const double y0 = std::clamp(a.box.center_y() - side / 2, 0.0, h - side);
      const Box region{x0, y0, x0 + side, y0 + side};
      patches.push_back({crop_resize(scene.image, region, config.patch_size), a.class_id + 1, region, s});
    }
    for (std::size_t b = 0; b < config.background_per_scene; ++b) {
      for (int attempt = 0; attempt < 50; ++attempt) {
        const double side = static_cast<double>(
            rng.between(static_cast<std::int64_t>(config.min_background_side),
                        static_cast<std::int64_t>(std::min({static_cast<double>(config.max_background_side), w, h}))));
        const double x0 = static_cast<double>(rng.between(0, static_cast<std::int64_t>(w - side)));
        const double y0 = static_cast<double>(rng.between(0, static_cast<std::int64_t>(h - side)));
        const Box region{x0, y0, x0 + side, y0 + side};
        const bool clear = std::all_of(scene.annotations.begin(), scene.annotations.end(), [&](const Annotation& a) {
          return intersection_area(region, a.box) <= config.max_background_overlap * region.area();
        });
        if (clear) {
          patches.push_back({crop_resize(scene.image, region, config.patch_size), 0, region, s});
          break;
        }
      }
    }
  }
  return patches;
}

}  // namespace vdnet
