#include "zonescan/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "zonescan/config.hpp"
#include "zonescan/dataset.hpp"
#include "zonescan/error.hpp"
#include "zonescan/imgproc.hpp"
#include "zonescan/metrics.hpp"
#include "zonescan/phantom.hpp"
#include "zonescan/png_io.hpp"
#include "zonescan/report.hpp"
#include "zonescan/threat_table.hpp"
#include "zonescan/trainer.hpp"
#include "zonescan/util.hpp"
#include "zonescan/volume.hpp"
#include "zonescan/zone_table.hpp"
#include "zonescan/zoner.hpp"

namespace zonescan {

namespace {

namespace fs = std::filesystem;

std::vector<std::string> list_volumes(const std::string& dir) {
  std::vector<std::string> paths;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".svol")
      paths.push_back(e.path().string());
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw IoError("no .svol volumes found in " + dir);
  return paths;
}

ZoneBandTable table_for(const PipelineConfig& cfg) {
  return cfg.zone_table.empty() ? ZoneBandTable::defaults()
                                : read_zone_table(cfg.zone_table);
}

CleanupParams cleanup_for(const PipelineConfig& cfg) {
  CleanupParams p;
  p.sigma = cfg.sigma;
  p.window = cfg.sauvola_window;
  p.k = cfg.sauvola_k;
  p.R = cfg.sauvola_r;
  p.dilation_radius = cfg.dilation_radius;
  p.min_area = cfg.min_area;
  return p;
}

// bodies with odd index carry threats, cycling 1..max
int threats_for_body(int index, int max_threats) {
  if (max_threats <= 0 || index % 2 == 0) return 0;
  return 1 + (index / 2) % max_threats;
}

int cmd_synth(const PipelineConfig& cfg) {
  ensure_dir(cfg.volumes_dir);
  const ZoneBandTable table = table_for(cfg);

  std::vector<ThreatAnnotation> all_threats;
  for (int i = 0; i < cfg.bodies; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "b%04d", i);
    PhantomSpec spec;
    spec.body_id = id;
    spec.nx = cfg.nx;
    spec.ny = cfg.ny;
    spec.nz = cfg.nz;
    spec.height_voxels = cfg.height_voxels;
    spec.z_offset = (cfg.nz - cfg.height_voxels) / 2;
    spec.torso_radius = cfg.torso_radius;
    spec.limb_radius = cfg.limb_radius;
    spec.noise_sigma = cfg.noise_sigma;
    spec.threat_intensity_boost = cfg.threat_boost;
    spec.threat_count = threats_for_body(i, cfg.threats);
    spec.seed = cfg.synth_seed ^ (std::uint64_t(i) * 0x9e3779b97f4a7c15ull);
    spec.table = table;

    const PhantomResult result = generate_phantom(spec);
    write_volume(result.volume,
                 path_join(cfg.volumes_dir, spec.body_id + ".svol"));
    all_threats.insert(all_threats.end(), result.threats.begin(),
                       result.threats.end());
  }
  write_threat_table(all_threats, cfg.threat_table);
  std::printf("synth: wrote %d volumes to %s and %zu threat annotations to %s\n",
              cfg.bodies, cfg.volumes_dir.c_str(), all_threats.size(),
              cfg.threat_table.c_str());
  return 0;
}

int cmd_preprocess(const PipelineConfig& cfg) {
  ensure_dir(cfg.masks_dir);
  const CleanupParams params = cleanup_for(cfg);
  int bodies = 0;
  for (const auto& path : list_volumes(cfg.volumes_dir)) {
    const ScanVolume vol = read_volume(path);
    CleanupParams p = params;
    if (p.R <= 0.0)
      p.R = std::max(1e-6, (double(vol.intensity_max) - vol.intensity_min) / 2.0);

    ScanVolume masks(vol.body_id, vol.nx, vol.ny, vol.nz);
    parallel_for(0, vol.nz, cfg.threads, [&](int z0, int z1) {
      for (int z = z0; z < z1; ++z) {
        const BinaryMask m = clean_slice_mask(slice_xy(vol, z), p);
        float* out = masks.voxels.data() + std::size_t(z) * vol.nx * vol.ny;
        for (std::size_t i = 0; i < m.bits.size(); ++i)
          out[i] = float(m.bits[i]);
      }
    });
    masks.recompute_range();
    write_volume(masks, path_join(cfg.masks_dir, vol.body_id + ".svol"));
    ++bodies;
  }
  std::printf("preprocess: wrote %d mask volumes to %s\n", bodies,
              cfg.masks_dir.c_str());
  return 0;
}

MaskStack stack_from_mask_volume(const ScanVolume& mv) {
  MaskStack masks(std::size_t(mv.nz));
  for (int z = 0; z < mv.nz; ++z) {
    BinaryMask m(mv.nx, mv.ny);
    const float* src = mv.voxels.data() + std::size_t(z) * mv.nx * mv.ny;
    for (std::size_t i = 0; i < m.bits.size(); ++i)
      m.bits[i] = src[i] > 0.5f ? 1 : 0;
    masks[std::size_t(z)] = std::move(m);
  }
  return masks;
}

int cmd_segment(const PipelineConfig& cfg, bool point_clouds) {
  ensure_dir(cfg.zones_dir);
  const ZoneBandTable table = table_for(cfg);
  int bodies = 0;
  for (const auto& path : list_volumes(cfg.masks_dir)) {
    const ScanVolume mv = read_volume(path);
    const ZoneLabelVolume zl = assign_zones(stack_from_mask_volume(mv), table);
    write_zone_volume(zl, path_join(cfg.zones_dir, mv.body_id + ".svol"));
    if (point_clouds)
      write_zone_point_clouds(zl,
                              path_join(cfg.zones_dir, mv.body_id + "_points"));
    ++bodies;
  }
  std::printf("segment: wrote %d zone label volumes to %s\n", bodies,
              cfg.zones_dir.c_str());
  return 0;
}

int cmd_build_dataset(const PipelineConfig& cfg) {
  ensure_dir(cfg.dataset_dir);
  const std::vector<ThreatAnnotation> threats =
      file_exists(cfg.threat_table) ? read_threat_table(cfg.threat_table)
                                    : std::vector<ThreatAnnotation>{};

  DatasetManifest manifest;
  std::size_t warnings = 0;
  BuildParams params;
  params.min_area = cfg.min_area;
  for (const auto& path : list_volumes(cfg.volumes_dir)) {
    const ScanVolume vol = read_volume(path);
    const ZoneLabelVolume zl =
        read_zone_volume(path_join(cfg.zones_dir, vol.body_id + ".svol"));
    BuildResult r = build_samples(vol, zl, threats, cfg.dataset_dir, params);
    for (const auto& w : r.warnings) {
      std::fprintf(stderr, "warning: %s\n", w.c_str());
      ++warnings;
    }
    manifest.rows.insert(manifest.rows.end(), r.samples.begin(),
                         r.samples.end());
  }

  const auto split_warnings = split_dataset(
      manifest, {cfg.ratio_train, cfg.ratio_val, cfg.ratio_test},
      cfg.split_seed);
  for (const auto& w : split_warnings) {
    std::fprintf(stderr, "warning: %s\n", w.c_str());
    ++warnings;
  }
  write_manifest(manifest, path_join(cfg.dataset_dir, "manifest.csv"));

  const SliceImage mean = compute_mean_image(manifest, cfg.dataset_dir);
  ScanVolume mean_vol("mean_image", mean.width, mean.height, 1);
  std::copy(mean.pixels.begin(), mean.pixels.end(), mean_vol.voxels.begin());
  mean_vol.recompute_range();
  write_volume(mean_vol, path_join(cfg.dataset_dir, "mean_image.svol"));

  const auto counts = manifest.split_class_counts();
  auto sum = [](const std::vector<int>& v) {
    int s = 0;
    for (int x : v) s += x;
    return s;
  };
  std::printf(
      "build-dataset: %zu samples (%d train / %d val / %d test) in %s, "
      "%zu warnings\n",
      manifest.rows.size(), sum(counts[0]), sum(counts[1]), sum(counts[2]),
      cfg.dataset_dir.c_str(), warnings);
  return 0;
}

int cmd_train(const PipelineConfig& cfg) {
  ensure_dir(cfg.model_dir);
  TrainConfig tc;
  tc.dataset_dir = cfg.dataset_dir;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.lr = cfg.lr;
  tc.momentum = cfg.momentum;
  tc.seed = cfg.train_seed;
  tc.augment_flip = cfg.augment_flip;
  tc.augment_contrast = cfg.augment_contrast;
  tc.contrast_factor = cfg.contrast_factor;
  tc.dropout = cfg.dropout;
  tc.dropout_rate = cfg.dropout_rate;
  tc.threads = cfg.threads;

  const TrainOutcome<float> out = train<float>(tc);
  save_checkpoint(out.model, path_join(cfg.model_dir, "model.ckpt"));
  write_training_log(out.log, path_join(cfg.model_dir, "training_log.csv"));
  std::printf(
      "train: %d epochs, best val accuracy %.4f at epoch %d; checkpoint in %s\n",
      cfg.epochs, out.best_val_accuracy, out.best_epoch, cfg.model_dir.c_str());
  return 0;
}

int cmd_evaluate(const PipelineConfig& cfg, const std::string& split) {
  const DatasetManifest manifest =
      read_manifest(path_join(cfg.dataset_dir, "manifest.csv"));
  const ScanVolume mean_vol =
      read_volume(path_join(cfg.dataset_dir, "mean_image.svol"));
  const CnnModel<float> model =
      load_checkpoint<float>(path_join(cfg.model_dir, "model.ckpt"));

  const LoadedSet<float> set =
      load_split<float>(manifest, cfg.dataset_dir, split, slice_xy(mean_vol, 0),
                        model.arch.in_h);
  if (set.inputs.empty())
    throw ConfigError("split '" + split + "' is empty in " + cfg.dataset_dir);

  const auto probs = predict_probs(model, set, cfg.batch_size, cfg.threads);
  std::vector<int> preds(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i)
    preds[i] = int(std::max_element(probs[i].begin(), probs[i].end()) -
                   probs[i].begin());

  EvalArtifacts art;
  art.cm = confusion(preds, set.labels, kNumClasses);
  art.metrics = precision_recall(art.cm);
  art.top1 = topk_accuracy(probs, set.labels, 1);
  art.top5 = topk_accuracy(probs, set.labels, 5);
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<double> scores(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i)
      scores[i] = probs[i][std::size_t(c)];
    try {
      art.rocs.push_back(roc_points(scores, set.labels, c));
      art.roc_classes.push_back(c);
    } catch (const ValidationError&) {
      // class absent from this split (or covering all of it): no ROC
    }
  }

  TrainingLog log;
  const std::string log_path = path_join(cfg.model_dir, "training_log.csv");
  if (file_exists(log_path)) log = read_training_log(log_path);

  render_reports(log, art, cfg.reports_dir);
  std::printf(
      "evaluate: split %s, %zu samples, accuracy %.4f, top-1 %.4f, top-5 %.4f, "
      "macro precision %.4f, macro recall %.4f; reports in %s\n",
      split.c_str(), set.inputs.size(), art.metrics.accuracy, art.top1,
      art.top5, art.metrics.macro_precision, art.metrics.macro_recall,
      cfg.reports_dir.c_str());
  return 0;
}

int cmd_classify_one(const PipelineConfig& cfg, const std::string& image_path,
                     bool stats) {
  const CnnModel<float> model =
      load_checkpoint<float>(path_join(cfg.model_dir, "model.ckpt"));
  const ScanVolume mean_vol =
      read_volume(path_join(cfg.dataset_dir, "mean_image.svol"));
  const SliceImage mean256 = slice_xy(mean_vol, 0);

  SliceImage img = to_slice_image(read_gray_png(image_path));
  if (img.width != mean256.width || img.height != mean256.height)
    img = resize_to_256(img);

  const int hw = model.arch.in_h;
  const SliceImage small = resize_bilinear(img, hw, hw);
  const SliceImage mean_small = resize_bilinear(mean256, hw, hw);
  Tensor<float> batch({1, 1, hw, hw});
  for (std::size_t i = 0; i < batch.data.size(); ++i)
    batch.data[i] =
        float((double(small.pixels[i]) - double(mean_small.pixels[i])) / 255.0);

  const Tensor<float> probs = forward(model, batch);
  std::vector<int> idx(kNumClasses, 0);
  for (int c = 0; c < kNumClasses; ++c) idx[std::size_t(c)] = c;
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (probs.data[std::size_t(a)] != probs.data[std::size_t(b)])
      return probs.data[std::size_t(a)] > probs.data[std::size_t(b)];
    return a < b;
  });

  std::printf("classify-one: %s\n", image_path.c_str());
  for (int r = 0; r < 5; ++r)
    std::printf("  %d. %-14s p=%.6f\n", r + 1,
                class_name(idx[std::size_t(r)]).c_str(),
                double(probs.data[std::size_t(idx[std::size_t(r)])]));

  if (stats) {
    ensure_dir(cfg.reports_dir);
    const auto rows = layer_stats(model, batch);
    const std::string out = path_join(cfg.reports_dir, "layer_stats.csv");
    write_layer_stats_csv(rows, out);
    std::printf("  layer statistics written to %s\n", out.c_str());
  }
  return 0;
}

int cmd_report(const PipelineConfig& cfg) {
  const ConfusionMatrix cm =
      read_confusion_csv(path_join(cfg.reports_dir, "confusion_matrix.csv"));
  const ClassMetrics metrics =
      read_metrics_csv(path_join(cfg.reports_dir, "metrics.csv"));

  TrainingLog log;
  const std::string log_path = path_join(cfg.model_dir, "training_log.csv");
  if (file_exists(log_path)) log = read_training_log(log_path);

  if (!log.rows.empty())
    atomic_write_file(path_join(cfg.reports_dir, "curves.svg"),
                      render_curves_svg(log));
  atomic_write_file(path_join(cfg.reports_dir, "pr_bars.svg"),
                    render_pr_bars_svg(metrics));
  std::printf("report: refreshed SVG charts in %s\n", cfg.reports_dir.c_str());
  return 0;
}

int default_threads() {
  if (const char* env = std::getenv("ZONESCAN_THREADS")) {
    try {
      return std::max(1, std::stoi(env));
    } catch (const std::exception&) {
      return 1;
    }
  }
  return 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  // --config is applied before flag binding so explicit flags win
  PipelineConfig cfg;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") {
      try {
        cfg = load_config(argv[i + 1]);
      } catch (const Error& e) {
        std::fprintf(stderr, "zonescan: %s\n", e.what());
        return 1;
      }
    }
  cfg.threads = default_threads();

  CLI::App app{"volumetric body-scan zoning and threat classification pipeline"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "flat key=value config file");
  app.add_option("--threads", cfg.threads,
                 "worker threads (1 = deterministic reference path)");
  app.add_option("--work", cfg.work_dir, "working directory for defaults");

  auto* synth = app.add_subcommand("synth", "generate phantom bodies");
  synth->add_option("--out", cfg.volumes_dir, "output volume directory");
  synth->add_option("--threat-table", cfg.threat_table, "threat CSV path");
  synth->add_option("--bodies", cfg.bodies, "number of bodies");
  synth->add_option("--threats", cfg.threats, "max threats per body");
  synth->add_option("--seed", cfg.synth_seed, "generator seed");
  synth->add_option("--nx", cfg.nx, "grid x size");
  synth->add_option("--ny", cfg.ny, "grid y size");
  synth->add_option("--nz", cfg.nz, "grid z size");
  synth->add_option("--height", cfg.height_voxels, "body height in voxels");
  synth->add_option("--torso-radius", cfg.torso_radius, "torso semi-axis");
  synth->add_option("--limb-radius", cfg.limb_radius, "leg radius");
  synth->add_option("--noise", cfg.noise_sigma, "noise sigma");
  synth->add_option("--boost", cfg.threat_boost, "threat intensity boost");
  synth->add_option("--zone-table", cfg.zone_table, "zone band table CSV");

  auto* preprocess =
      app.add_subcommand("preprocess", "binarize volumes into slice masks");
  preprocess->add_option("--volumes", cfg.volumes_dir, "input volume directory");
  preprocess->add_option("--out", cfg.masks_dir, "output mask directory");
  preprocess->add_option("--sigma", cfg.sigma, "Gaussian smoothing sigma");
  preprocess->add_option("--window", cfg.sauvola_window, "local threshold window");
  preprocess->add_option("--k", cfg.sauvola_k, "local threshold k");
  preprocess->add_option("--r", cfg.sauvola_r,
                         "local threshold R (0 = half intensity range)");
  preprocess->add_option("--dilation", cfg.dilation_radius, "dilation radius");
  preprocess->add_option("--min-area", cfg.min_area, "minimum component area");

  auto* segment =
      app.add_subcommand("segment", "label masks with the 17 body zones");
  bool point_clouds = false;
  segment->add_option("--masks", cfg.masks_dir, "input mask directory");
  segment->add_option("--out", cfg.zones_dir, "output zone volume directory");
  segment->add_option("--zone-table", cfg.zone_table, "zone band table CSV");
  segment->add_flag("--point-clouds", point_clouds,
                    "also export per-zone point CSVs");

  auto* build =
      app.add_subcommand("build-dataset", "emit labeled 256x256 slice images");
  build->add_option("--volumes", cfg.volumes_dir, "input volume directory");
  build->add_option("--zones", cfg.zones_dir, "zone volume directory");
  build->add_option("--threat-table", cfg.threat_table, "threat CSV path");
  build->add_option("--out", cfg.dataset_dir, "dataset output directory");
  build->add_option("--min-area", cfg.min_area, "minimum zone pixels per sample");
  build->add_option("--ratio-train", cfg.ratio_train, "train split ratio");
  build->add_option("--ratio-val", cfg.ratio_val, "val split ratio");
  build->add_option("--ratio-test", cfg.ratio_test, "test split ratio");
  build->add_option("--seed", cfg.split_seed, "split shuffle seed");

  auto* train_cmd = app.add_subcommand("train", "train the classifier");
  train_cmd->add_option("--dataset", cfg.dataset_dir, "dataset directory");
  train_cmd->add_option("--out", cfg.model_dir, "model output directory");
  train_cmd->add_option("--epochs", cfg.epochs, "training epochs");
  train_cmd->add_option("--batch", cfg.batch_size, "minibatch size");
  train_cmd->add_option("--lr", cfg.lr, "learning rate");
  train_cmd->add_option("--momentum", cfg.momentum, "SGD momentum");
  train_cmd->add_option("--seed", cfg.train_seed, "training seed");
  train_cmd->add_flag("--flip,!--no-flip", cfg.augment_flip,
                      "mirror-augment threat samples");
  train_cmd->add_flag("--contrast,!--no-contrast", cfg.augment_contrast,
                      "contrast-augment threat samples");
  train_cmd->add_option("--contrast-factor", cfg.contrast_factor,
                        "contrast augmentation factor");
  train_cmd->add_flag("--dropout", cfg.dropout, "enable dropout");
  train_cmd->add_option("--dropout-rate", cfg.dropout_rate, "dropout rate");

  auto* evaluate = app.add_subcommand("evaluate", "score a split and write reports");
  std::string split = "test";
  evaluate->add_option("--dataset", cfg.dataset_dir, "dataset directory");
  evaluate->add_option("--model", cfg.model_dir, "model directory");
  evaluate->add_option("--out", cfg.reports_dir, "reports directory");
  evaluate->add_option("--split", split, "split to score (train/val/test)");
  evaluate->add_option("--batch", cfg.batch_size, "forward batch size");

  auto* classify =
      app.add_subcommand("classify-one", "classify a single PNG image");
  std::string image_path;
  bool stats = false;
  classify->add_option("image", image_path, "input PNG")->required();
  classify->add_option("--model", cfg.model_dir, "model directory");
  classify->add_option("--dataset", cfg.dataset_dir,
                       "dataset directory (for the mean image)");
  classify->add_option("--out", cfg.reports_dir, "directory for layer_stats.csv");
  classify->add_flag("--stats", stats, "also dump per-layer statistics");

  auto* report = app.add_subcommand("report", "re-render charts from saved CSVs");
  report->add_option("--reports", cfg.reports_dir, "reports directory");
  report->add_option("--model", cfg.model_dir, "model directory (training log)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "zonescan: " << e.what() << "\n";
    return 2;
  }

  cfg.fill_path_defaults();
  cfg.threads = std::max(1, cfg.threads);

  const char* stage = "";
  try {
    if (synth->parsed()) return (stage = "synth", cmd_synth(cfg));
    if (preprocess->parsed()) return (stage = "preprocess", cmd_preprocess(cfg));
    if (segment->parsed())
      return (stage = "segment", cmd_segment(cfg, point_clouds));
    if (build->parsed()) return (stage = "build-dataset", cmd_build_dataset(cfg));
    if (train_cmd->parsed()) return (stage = "train", cmd_train(cfg));
    if (evaluate->parsed()) return (stage = "evaluate", cmd_evaluate(cfg, split));
    if (classify->parsed())
      return (stage = "classify-one", cmd_classify_one(cfg, image_path, stats));
    if (report->parsed()) return (stage = "report", cmd_report(cfg));
  } catch (const Error& e) {
    std::fprintf(stderr, "zonescan %s: error: %s\n", stage, e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "zonescan %s: unexpected error: %s\n", stage, e.what());
    return 1;
  }
  return 2;
}

}  // namespace zonescan
