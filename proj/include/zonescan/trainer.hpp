#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zonescan/cnn.hpp"
#include "zonescan/dataset.hpp"
#include "zonescan/training_log.hpp"

namespace zonescan {

struct TrainConfig {
  std::string dataset_dir;        // root containing the images
  std::string manifest_path;      // default: <dataset_dir>/manifest.csv
  std::string mean_image_path;    // default: <dataset_dir>/mean_image.svol
  int epochs = 30;
  int batch_size = 32;
  double lr = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  bool augment_flip = true;       // add mirrored copies of threat-class samples
  bool augment_contrast = false;  // add contrast-reduced copies of the same
  double contrast_factor = 0.8;
  bool dropout = false;
  double dropout_rate = 0.5;
  int input_size = 64;            // dataset images are downsampled to this
  int threads = 1;                // 1 = deterministic reference path
};

// Images of one split, preprocessed to network inputs ((png - mean)/255,
// downsampled) and kept in memory.
template <typename T>
struct LoadedSet {
  int c = 1, h = 0, w = 0;
  std::vector<std::vector<T>> inputs;
  std::vector<int> labels;
};

template <typename T>
LoadedSet<T> load_split(const DatasetManifest& manifest,
                        const std::string& root_dir, const std::string& split,
                        const SliceImage& mean256, int input_size,
                        bool augment_flip = false, bool augment_contrast = false,
                        double contrast_factor = 0.8);

template <typename T>
struct TrainOutcome {
  CnnModel<T> model;  // best-validation-accuracy checkpoint
  TrainingLog log;
  double best_val_accuracy = 0;
  int best_epoch = 0;
};

// Minibatch SGD with momentum, seeded shuffle per epoch, validation after
// every epoch. Deterministic for a fixed seed when threads == 1; any thread
// count reduces gradients in fixed chunk order, so a given (seed, threads)
// pair is reproducible.
template <typename T>
TrainOutcome<T> train(const TrainConfig& config);

template <typename T>
std::vector<std::vector<double>> predict_probs(const CnnModel<T>& model,
                                               const LoadedSet<T>& set,
                                               int batch_size, int threads = 1);

template <typename T>
double accuracy_of(const CnnModel<T>& model, const LoadedSet<T>& set,
                   int batch_size, double* mean_loss = nullptr,
                   int threads = 1);

}  // namespace zonescan
