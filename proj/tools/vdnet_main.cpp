#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "vdnet/errors.hpp"
#include "vdnet/experiment.hpp"
#include "vdnet/image_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vdnet;

namespace {

constexpr int kUsageError = 2;
constexpr int kRuntimeError = 1;

struct Common {
  std::uint64_t seed = 7;
  std::string out = "out";
};

struct SaliencyFlags {
  std::string aggregation = "mean";
  double variance = 30.0;
  double reference_side = 224.0;
  std::size_t radius = 0;  // 0 = auto

  VentralConfig config() const {
    VentralConfig c;
    c.aggregation = aggregation_from_string(aggregation);
    c.gaussian_variance = variance;
    c.reference_side = reference_side;
    if (radius > 0) c.kernel_radius = radius;
    c.validate();
    return c;
  }
};

struct ScheduleFlags {
  std::size_t epochs;
  std::size_t batch;
  double lr;
  double momentum = 0.9;
  std::vector<std::size_t> decay;

  void apply(Schedule& s) const {
    s.epochs = epochs;
    s.batch_size = batch;
    s.learning_rate = lr;
    s.momentum = momentum;
    s.decay_epochs = decay;
  }
};

struct DorsalFlags {
  DorsalTraining recipe;
  ScheduleFlags schedule{60, 8, 0.05, 0.9, {40, 50}};

  DorsalTraining resolved(std::uint64_t seed, const std::vector<std::string>& class_names, std::size_t image_size,
                          std::size_t channels) const {
    DorsalTraining r = recipe;
    r.reseed(seed);
    schedule.apply(r.schedule);
    r.detector.class_names = class_names;
    r.detector.image_size = image_size;
    r.detector.channels = channels;
    r.detector.validate();
    return r;
  }
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Seed for every random choice")->capture_default_str();
  app->add_option("--out", c.out, "Output directory")->capture_default_str();
}

void add_saliency(CLI::App* app, SaliencyFlags& f) {
  app->add_option("--aggregation", f.aggregation, "Channel aggregation")
      ->check(CLI::IsMember({"mean", "max"}))
      ->capture_default_str();
  app->add_option("--variance", f.variance, "Gaussian variance on the 224 px reference scale")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--reference-side", f.reference_side, "Reference side for variance rescaling (0 disables)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app->add_option("--radius", f.radius, "Gaussian kernel radius (0 = auto)")->capture_default_str();
}

void add_schedule(CLI::App* app, ScheduleFlags& f) {
  app->add_option("--epochs", f.epochs, "Training epochs")->capture_default_str();
  app->add_option("--batch", f.batch, "Minibatch size")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--lr", f.lr, "Learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--momentum", f.momentum, "SGD momentum")->check(CLI::Range(0.0, 0.999))->capture_default_str();
  app->add_option("--decay", f.decay, "Epochs at which the learning rate drops by 10x")->delimiter(',');
}

void add_dorsal(CLI::App* app, DorsalFlags& f) {
  add_schedule(app, f.schedule);
  DetectorConfig& d = f.recipe.detector;
  app->add_option("--width", d.width, "Backbone width")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--lambda", d.lambda, "Regression weight")->check(CLI::NonNegativeNumber)->capture_default_str();
  app->add_option("--sample-size", d.sample_size, "Anchors sampled per image")->capture_default_str();
  app->add_option("--n-reg", d.n_reg, "Regression normaliser (0 = anchor count)")->capture_default_str();
}

void write_json(const fs::path& path, const json& j) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

void echo_config(const Common& c, const std::string& command, json values) {
  values["subcommand"] = command;
  values["seed"] = c.seed;
  values["out"] = c.out;
  write_json(fs::path(c.out) / (command + ".config.json"), values);
}

struct Dataset {
  DatasetManifest manifest;
  std::vector<Scene> train;
  std::vector<Scene> test;
};

Dataset open_dataset(const std::string& dir, bool need_train, bool need_test) {
  Dataset d{read_manifest(dir), {}, {}};
  if (need_train) d.train = load_split(dir, d.manifest, "train");
  if (need_test) d.test = load_split(dir, d.manifest, "test");
  return d;
}

Model load_model(const std::string& path, const std::string& role) {
  Model m = load_checkpoint(path).model;
  if (m.attributes().value("role", "") != role) {
    throw ConfigError(path + " is not a " + role + " checkpoint");
  }
  return m;
}

// The attention front-end for a detector: an explicit --ventral flag wins,
// otherwise whatever the detector was trained with.
std::optional<Ventral> attention_for(const Model& detector, const std::string& ventral_path,
                                     const std::optional<VentralConfig>& saliency) {
  if (!ventral_path.empty()) {
    return Ventral{load_model(ventral_path, "ventral"), saliency.value_or(VentralConfig{})};
  }
  if (!detector.attributes().contains("attention")) return std::nullopt;
  const json& a = detector.attributes()["attention"];
  return Ventral{load_model(a.at("ventral_checkpoint").get<std::string>(), "ventral"),
                 saliency.value_or(VentralConfig::from_json(a.at("saliency")))};
}

json detections_json(const std::string& image, const std::vector<Detection>& dets,
                     const std::vector<std::string>& names) {
  json rows = json::array();
  for (const Detection& d : dets) {
    rows.push_back({{"image", image},
                    {"class", names.at(d.class_id)},
                    {"score", d.score},
                    {"box", {d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max}}});
  }
  return rows;
}

Tensor draw_boxes(const Tensor& image, const std::vector<Detection>& dets) {
  static const double palette[][3] = {{1, 0.2, 0.2}, {0.2, 1, 0.2}, {0.3, 0.5, 1}, {1, 1, 0.2}, {1, 0.3, 1}};
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  std::vector<double> px = image.to_vector();
  for (const Detection& d : dets) {
    const auto clampi = [](double v, std::size_t hi) {
      return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(hi - 1)));
    };
    const std::size_t x0 = clampi(d.box.x_min, w), x1 = clampi(d.box.x_max - 1, w);
    const std::size_t y0 = clampi(d.box.y_min, h), y1 = clampi(d.box.y_max - 1, h);
    const double* colour = palette[d.class_id % 5];
    auto paint = [&](std::size_t y, std::size_t x) {
      for (std::size_t ch = 0; ch < c; ++ch) px[(ch * h + y) * w + x] = c == 3 ? colour[ch] : 1.0;
    };
    for (std::size_t x = x0; x <= x1; ++x) paint(y0, x), paint(y1, x);
    for (std::size_t y = y0; y <= y1; ++y) paint(y, x0), paint(y, x1);
  }
  return Tensor(image.shape(), px);
}

void print(const std::string& text) { std::fputs(text.c_str(), stdout); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ventral/dorsal attention detector toolkit"};
  app.require_subcommand(1);
  std::function<void()> action;

  // gen-data
  Common gen_common;
  DatasetConfig gen;
  std::size_t gen_min = gen.scene.min_objects, gen_max = gen.scene.max_objects;
  bool gen_grey = false;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic shapes dataset");
  add_common(gen_cmd, gen_common);
  gen_cmd->add_option("--train", gen.train_count, "Training scenes")->check(CLI::PositiveNumber)->capture_default_str();
  gen_cmd->add_option("--test", gen.test_count, "Test scenes")->check(CLI::PositiveNumber)->capture_default_str();
  gen_cmd->add_option("--image-size", gen.scene.image_size, "Scene side in pixels")->capture_default_str();
  gen_cmd->add_option("--min-objects", gen_min, "Fewest objects per scene")->capture_default_str();
  gen_cmd->add_option("--max-objects", gen_max, "Most objects per scene")->capture_default_str();
  gen_cmd->add_flag("--grayscale", gen_grey, "Single-channel scenes");
  gen_cmd->callback([&] {
    action = [&] {
      gen.seed = gen_common.seed;
      gen.scene.min_objects = gen_min;
      gen.scene.max_objects = gen_max;
      if (gen_grey) gen.scene.channels = 1;
      const DatasetManifest manifest = make_manifest(gen);
      write_dataset(gen_common.out, manifest);
      echo_config(gen_common, "gen-data", {{"dataset", gen.to_json()}});
      std::printf("wrote %zu train / %zu test scenes to %s (config %s)\n", gen.train_count, gen.test_count,
                  gen_common.out.c_str(), manifest.config_hash.c_str());
    };
  });

  // train-ventral
  Common tv_common;
  std::string tv_data;
  VentralTraining tv;
  ScheduleFlags tv_schedule{tv.schedule.epochs, tv.schedule.batch_size, tv.schedule.learning_rate, 0.9, {}};
  auto* tv_cmd = app.add_subcommand("train-ventral", "Train the patch classifier behind the attention mask");
  add_common(tv_cmd, tv_common);
  tv_cmd->add_option("--data", tv_data, "Dataset directory")->required();
  add_schedule(tv_cmd, tv_schedule);
  tv_cmd->add_option("--width", tv.width, "Classifier width")->check(CLI::PositiveNumber)->capture_default_str();
  tv_cmd->add_option("--background-penalty", tv.background_penalty, "Background activation penalty")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  tv_cmd->add_option("--background-patches", tv.patches.background_per_scene, "Background crops per scene")
      ->capture_default_str();
  tv_cmd->callback([&] {
    action = [&] {
      tv.reseed(tv_common.seed);
      tv_schedule.apply(tv.schedule);
      const Dataset d = open_dataset(tv_data, true, true);
      VentralRun run = run_ventral_training(d.train, d.test, d.manifest.scene.class_names, tv);
      run.classifier.attributes()["role"] = "ventral";
      run.classifier.attributes()["training"] = tv.to_json();
      const fs::path out(tv_common.out);
      fs::create_directories(out);
      save_checkpoint(run.classifier, nullptr, out / "ventral.ckpt");
      write_json(out / "ventral_report.json", {{"train_accuracy", run.train_accuracy},
                                               {"test_accuracy", run.test_accuracy},
                                               {"seconds", run.seconds},
                                               {"report", run.report.to_json()}});
      echo_config(tv_common, "train-ventral", {{"data", tv_data}, {"training", tv.to_json()}});
      std::printf("patch accuracy: train %.4f, test %.4f (%.1f s)\n", run.train_accuracy, run.test_accuracy,
                  run.seconds);
    };
  });

  // train-dorsal
  Common td_common;
  std::string td_data, td_ventral;
  DorsalFlags td;
  SaliencyFlags td_saliency;
  auto* td_cmd = app.add_subcommand("train-dorsal", "Train the detector, optionally on ventral-masked images");
  add_common(td_cmd, td_common);
  td_cmd->add_option("--data", td_data, "Dataset directory")->required();
  td_cmd->add_option("--ventral", td_ventral, "Ventral checkpoint; enables masked training");
  add_dorsal(td_cmd, td);
  add_saliency(td_cmd, td_saliency);
  td_cmd->callback([&] {
    action = [&] {
      const Dataset d = open_dataset(td_data, true, false);
      const DorsalTraining recipe = td.resolved(td_common.seed, d.manifest.scene.class_names,
                                                d.manifest.scene.image_size, d.manifest.scene.channels);
      std::optional<Ventral> ventral;
      if (!td_ventral.empty()) ventral = Ventral{load_model(td_ventral, "ventral"), td_saliency.config()};
      DorsalRun run = run_dorsal_training(d.train, ventral ? &*ventral : nullptr, recipe);
      run.detector.attributes()["role"] = "detector";
      if (ventral) {
        run.detector.attributes()["attention"] = {{"ventral_checkpoint", fs::absolute(td_ventral).string()},
                                                  {"saliency", ventral->config.to_json()}};
      }
      const fs::path out(td_common.out);
      fs::create_directories(out);
      save_checkpoint(run.detector, nullptr, out / "detector.ckpt");
      write_json(out / "dorsal_report.json", {{"seconds", run.seconds}, {"report", run.report.to_json()}});
      json echo{{"data", td_data}, {"training", recipe.to_json()}};
      if (ventral) echo["ventral"] = {{"checkpoint", td_ventral}, {"saliency", ventral->config.to_json()}};
      echo_config(td_common, "train-dorsal", echo);
      const auto& last = run.report.epochs;
      std::printf("%s detector trained: final loss %.4f (%.1f s), lambda %g\n", ventral ? "masked" : "unmasked",
                  last.empty() ? 0.0 : last.back().loss, run.seconds, recipe.detector.lambda);
    };
  });

  // saliency
  Common sal_common;
  std::string sal_image, sal_ventral;
  SaliencyFlags sal;
  auto* sal_cmd = app.add_subcommand("saliency", "Write the attention artifacts for one image");
  add_common(sal_cmd, sal_common);
  sal_cmd->add_option("--image", sal_image, "Input PPM/PGM image")->required();
  sal_cmd->add_option("--ventral", sal_ventral, "Ventral checkpoint")->required();
  add_saliency(sal_cmd, sal);
  sal_cmd->callback([&] {
    action = [&] {
      const Model clf = load_model(sal_ventral, "ventral");
      const VentralConfig cfg = sal.config();
      const Tensor image = image_to_tensor(read_pnm_file(sal_image));
      const SaliencyArtifacts a = ventral_pipeline(clf, image, cfg);
      const fs::path out(sal_common.out);
      fs::create_directories(out);
      const std::string stem = fs::path(sal_image).stem().string() + "." + sal.aggregation;
      write_pnm_file(out / (stem + ".agg.pgm"), normalized_grey(a.aggregated));
      write_pnm_file(out / (stem + ".smooth.pgm"), normalized_grey(a.smoothed));
      write_pgm(out / (stem + ".mask.pgm"), a.mask);
      write_pnm_file(out / (stem + ".masked" + (image.dim(0) == 1 ? ".pgm" : ".ppm")), tensor_to_image(a.masked_image));
      echo_config(sal_common, "saliency", {{"image", sal_image}, {"ventral", sal_ventral}, {"saliency", cfg.to_json()}});
      std::printf("mask coverage %.4f\n", a.coverage());
    };
  });

  // detect
  Common det_common;
  std::string det_image, det_model, det_ventral;
  DetectOptions det_opts;
  bool det_plain = false;
  auto* det_cmd = app.add_subcommand("detect", "Run the detector on one image");
  add_common(det_cmd, det_common);
  det_cmd->add_option("--image", det_image, "Input PPM/PGM image")->required();
  det_cmd->add_option("--detector", det_model, "Detector checkpoint")->required();
  det_cmd->add_option("--ventral", det_ventral, "Ventral checkpoint (default: the one used in training)");
  det_cmd->add_flag("--no-attention", det_plain, "Ignore any attention front-end");
  det_cmd->add_option("--score-thresh", det_opts.score_thresh, "Minimum class probability")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  det_cmd->add_option("--nms-thresh", det_opts.nms_thresh, "NMS IoU threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  det_cmd->callback([&] {
    action = [&] {
      const Model det = load_model(det_model, "detector");
      const auto ventral = det_plain ? std::nullopt : attention_for(det, det_ventral, std::nullopt);
      const Tensor image = image_to_tensor(read_pnm_file(det_image));
      const DetectResult r = detect(det, image, ventral ? &*ventral : nullptr, det_opts);
      if (r.warning) std::fprintf(stderr, "warning: %s\n", r.warning->c_str());
      const fs::path out(det_common.out);
      fs::create_directories(out);
      const std::string stem = fs::path(det_image).stem().string();
      std::ofstream jsonl(out / (stem + ".det.jsonl"));
      if (!jsonl) throw IoError("cannot write detections under " + out.string());
      for (const json& row : detections_json(stem, r.detections, detector_config(det).class_names)) {
        jsonl << row.dump() << "\n";
      }
      write_pnm_file(out / (stem + ".det" + (image.dim(0) == 1 ? ".pgm" : ".ppm")),
                     tensor_to_image(draw_boxes(image, r.detections)));
      echo_config(det_common, "detect", {{"image", det_image},
                                         {"detector", det_model},
                                         {"attention", ventral.has_value()},
                                         {"score_thresh", det_opts.score_thresh},
                                         {"nms_thresh", det_opts.nms_thresh}});
      std::printf("%zu detections\n", r.detections.size());
    };
  });

  // eval
  Common ev_common;
  std::string ev_data, ev_model, ev_ventral, ev_split = "test";
  double ev_iou = 0.5;
  bool ev_plain = false;
  auto* ev_cmd = app.add_subcommand("eval", "Evaluate a detector on a dataset split");
  add_common(ev_cmd, ev_common);
  ev_cmd->add_option("--data", ev_data, "Dataset directory")->required();
  ev_cmd->add_option("--detector", ev_model, "Detector checkpoint")->required();
  ev_cmd->add_option("--ventral", ev_ventral, "Ventral checkpoint (default: the one used in training)");
  ev_cmd->add_flag("--no-attention", ev_plain, "Ignore any attention front-end");
  ev_cmd->add_option("--split", ev_split, "Split to evaluate")->check(CLI::IsMember({"train", "test"}));
  ev_cmd->add_option("--iou", ev_iou, "IoU match threshold")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  ev_cmd->callback([&] {
    action = [&] {
      const Model det = load_model(ev_model, "detector");
      const auto ventral = ev_plain ? std::nullopt : attention_for(det, ev_ventral, std::nullopt);
      const DatasetManifest manifest = read_manifest(ev_data);
      const std::vector<Scene> scenes = load_split(ev_data, manifest, ev_split);
      const ArmEvaluation arm = run_arm(det, scenes, ventral ? &*ventral : nullptr);
      const EvalReport report = evaluate(arm.arm.detections, truths_of(scenes), manifest.scene.class_names, ev_iou);
      write_json(fs::path(ev_common.out) / "eval.json", report.to_json());
      echo_config(ev_common, "eval", {{"data", ev_data},
                                      {"detector", ev_model},
                                      {"split", ev_split},
                                      {"attention", ventral.has_value()},
                                      {"iou_threshold", ev_iou}});
      print(report.to_table(ventral ? "masked" : "unmasked"));
    };
  });

  // compare
  Common cmp_common;
  std::string cmp_data, cmp_plain, cmp_masked, cmp_ventral;
  double cmp_iou = 0.5;
  auto* cmp_cmd = app.add_subcommand("compare", "Compare unmasked and masked detectors on the test split");
  add_common(cmp_cmd, cmp_common);
  cmp_cmd->add_option("--data", cmp_data, "Dataset directory")->required();
  cmp_cmd->add_option("--plain", cmp_plain, "Unmasked detector checkpoint")->required();
  cmp_cmd->add_option("--masked", cmp_masked, "Masked detector checkpoint")->required();
  cmp_cmd->add_option("--ventral", cmp_ventral, "Ventral checkpoint (default: the one used in training)");
  cmp_cmd->add_option("--iou", cmp_iou, "IoU match threshold")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  cmp_cmd->callback([&] {
    action = [&] {
      const Model plain = load_model(cmp_plain, "detector");
      const Model masked = load_model(cmp_masked, "detector");
      const auto ventral = attention_for(masked, cmp_ventral, std::nullopt);
      if (!ventral) throw ConfigError(cmp_masked + " was not trained with attention; pass --ventral");
      const DatasetManifest manifest = read_manifest(cmp_data);
      const std::vector<Scene> test = load_split(cmp_data, manifest, "test");
      const ArmEvaluation p = run_arm(plain, test, nullptr);
      ArmEvaluation m = run_arm(masked, test, &*ventral);
      const ComparisonReport report =
          compare_masked_unmasked(p.arm, m.arm, truths_of(test), manifest.scene.class_names,
                                  std::move(m.mask_coverage), std::move(m.object_coverage), cmp_iou);
      write_json(fs::path(cmp_common.out) / "comparison.json", report.to_json());
      echo_config(cmp_common, "compare", {{"data", cmp_data},
                                          {"plain", cmp_plain},
                                          {"masked", cmp_masked},
                                          {"saliency", ventral->config.to_json()},
                                          {"iou_threshold", cmp_iou}});
      print(report.to_table());
    };
  });

  // ablate-sigma
  Common ab_common;
  std::string ab_data, ab_ventral;
  std::vector<double> ab_variances{5.0, 30.0, 120.0};
  DorsalFlags ab;
  SaliencyFlags ab_saliency;
  auto* ab_cmd = app.add_subcommand("ablate-sigma", "Retrain and evaluate masked detectors across Gaussian variances");
  add_common(ab_cmd, ab_common);
  ab_cmd->add_option("--data", ab_data, "Dataset directory")->required();
  ab_cmd->add_option("--ventral", ab_ventral, "Ventral checkpoint")->required();
  ab_cmd->add_option("--variances", ab_variances, "Variances to sweep")
      ->delimiter(',')
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_dorsal(ab_cmd, ab);
  add_saliency(ab_cmd, ab_saliency);
  ab_cmd->callback([&] {
    action = [&] {
      const Dataset d = open_dataset(ab_data, true, true);
      const DorsalTraining recipe = ab.resolved(ab_common.seed, d.manifest.scene.class_names,
                                                d.manifest.scene.image_size, d.manifest.scene.channels);
      const Model clf = load_model(ab_ventral, "ventral");
      const AblationReport report =
          ablate_variance(clf, ab_saliency.config(), ab_variances, d.train, d.test, recipe);
      write_json(fs::path(ab_common.out) / "ablation.json", report.to_json());
      echo_config(ab_common, "ablate-sigma", {{"data", ab_data},
                                              {"ventral", ab_ventral},
                                              {"variances", ab_variances},
                                              {"saliency", ab_saliency.config().to_json()},
                                              {"training", recipe.to_json()}});
      print(report.to_table());
    };
  });

  // run-all
  Common all_common;
  auto* all_cmd = app.add_subcommand("run-all", "Generate data, train both streams and both detectors, compare");
  add_common(all_cmd, all_common);
  all_cmd->callback([&] {
    action = [&] {
      const EndToEndConfig cfg = EndToEndConfig::seeded(all_common.seed);
      EndToEndResult r = run_end_to_end(cfg);
      const fs::path out(all_common.out);
      fs::create_directories(out);
      r.ventral.classifier.attributes()["role"] = "ventral";
      r.plain.detector.attributes()["role"] = "detector";
      r.masked.detector.attributes()["role"] = "detector";
      save_checkpoint(r.ventral.classifier, nullptr, out / "ventral.ckpt");
      r.masked.detector.attributes()["attention"] = {
          {"ventral_checkpoint", fs::absolute(out / "ventral.ckpt").string()}, {"saliency", cfg.saliency.to_json()}};
      save_checkpoint(r.plain.detector, nullptr, out / "detector_plain.ckpt");
      save_checkpoint(r.masked.detector, nullptr, out / "detector_masked.ckpt");
      write_json(out / "run_all.json", r.to_json());
      echo_config(all_common, "run-all", cfg.to_json());
      std::printf("ventral patch accuracy: train %.4f, test %.4f\n", r.ventral.train_accuracy,
                  r.ventral.test_accuracy);
      print(r.comparison.to_table());
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }
  try {
    action();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsageError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeError;
  }
  return 0;
}
