#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace zonescan {

// Flat key=value config file; '#' starts a comment. Unknown keys are
// rejected so typos fail loudly.
struct PipelineConfig {
  // paths
  std::string work_dir = "zonescan_work";
  std::string volumes_dir;   // default <work>/volumes
  std::string threat_table;  // default <work>/threats.csv
  std::string masks_dir;     // default <work>/masks
  std::string zones_dir;     // default <work>/zones
  std::string dataset_dir;   // default <work>/dataset
  std::string model_dir;     // default <work>/model
  std::string reports_dir;   // default <work>/reports
  std::string zone_table;    // empty = built-in default table

  // synth
  int bodies = 20;
  int threats = 2;  // max threats per body; each body draws 0..threats
  std::uint64_t synth_seed = 7;
  int nx = 56, ny = 56, nz = 48;
  int height_voxels = 40;
  int torso_radius = 11;
  int limb_radius = 4;
  double noise_sigma = 2.0;
  double threat_boost = 30.0;

  // imgproc
  double sigma = 1.2;
  int sauvola_window = 15;
  double sauvola_k = 0.2;
  double sauvola_r = 0.0;  // <= 0: half the volume intensity range
  int dilation_radius = 1;
  int min_area = 20;

  // dataset
  double ratio_train = 0.6, ratio_val = 0.2, ratio_test = 0.2;
  std::uint64_t split_seed = 11;

  // training
  int epochs = 30;
  int batch_size = 32;
  double lr = 0.01;
  double momentum = 0.9;
  std::uint64_t train_seed = 3;
  bool augment_flip = true;
  bool augment_contrast = false;
  double contrast_factor = 0.8;
  bool dropout = false;
  double dropout_rate = 0.5;

  int threads = 1;

  void fill_path_defaults();
};

PipelineConfig load_config(const std::string& path);

}  // namespace zonescan
