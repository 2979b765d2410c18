#include "zonescan/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "zonescan/error.hpp"
#include "zonescan/png_io.hpp"
#include "zonescan/util.hpp"
#include "zonescan/volume.hpp"

namespace zonescan {

namespace {

template <typename T>
std::vector<T> preprocess(const SliceImage& img256, const SliceImage& mean_small,
                          int input_size) {
  const SliceImage small = resize_bilinear(img256, input_size, input_size);
  std::vector<T> out(small.pixels.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = T((double(small.pixels[i]) - double(mean_small.pixels[i])) / 255.0);
  return out;
}

template <typename T>
Tensor<T> gather_batch(const LoadedSet<T>& set, const std::vector<std::size_t>& order,
                       std::size_t begin, std::size_t end) {
  const int n = int(end - begin);
  Tensor<T> batch({n, set.c, set.h, set.w});
  const std::size_t stride = std::size_t(set.c) * set.h * set.w;
  for (int i = 0; i < n; ++i)
    std::copy(set.inputs[order[begin + std::size_t(i)]].begin(),
              set.inputs[order[begin + std::size_t(i)]].end(),
              batch.ptr() + std::size_t(i) * stride);
  return batch;
}

}  // namespace

template <typename T>
LoadedSet<T> load_split(const DatasetManifest& manifest,
                        const std::string& root_dir, const std::string& split,
                        const SliceImage& mean256, int input_size,
                        bool augment_flip, bool augment_contrast,
                        double contrast_factor) {
  const SliceImage mean_small = resize_bilinear(mean256, input_size, input_size);

  LoadedSet<T> set;
  set.c = 1;
  set.h = input_size;
  set.w = input_size;
  for (const auto& row : manifest.rows) {
    if (row.split != split) continue;
    const SliceImage img =
        to_slice_image(read_gray_png(path_join(root_dir, row.image_path)));
    set.inputs.push_back(preprocess<T>(img, mean_small, input_size));
    set.labels.push_back(row.class_id);

    if (class_is_threat(row.class_id)) {
      if (augment_flip) {
        const auto flipped = augment(img, row.class_id, AugmentKind::Flip);
        set.inputs.push_back(preprocess<T>(flipped.image, mean_small, input_size));
        set.labels.push_back(flipped.class_id);
      }
      if (augment_contrast) {
        const auto dimmed =
            augment(img, row.class_id, AugmentKind::Contrast, contrast_factor);
        set.inputs.push_back(preprocess<T>(dimmed.image, mean_small, input_size));
        set.labels.push_back(dimmed.class_id);
      }
    }
  }
  return set;
}

template <typename T>
std::vector<std::vector<double>> predict_probs(const CnnModel<T>& model,
                                               const LoadedSet<T>& set,
                                               int batch_size, int threads) {
  const std::size_t n = set.inputs.size();
  std::vector<std::vector<double>> probs(n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const int C = model.arch.num_classes();

  const int n_batches = int((n + std::size_t(batch_size) - 1) / std::size_t(batch_size));
  parallel_for(0, n_batches, threads, [&](int b0, int b1) {
    for (int b = b0; b < b1; ++b) {
      const std::size_t lo = std::size_t(b) * std::size_t(batch_size);
      const std::size_t hi = std::min(n, lo + std::size_t(batch_size));
      const Tensor<T> batch = gather_batch(set, order, lo, hi);
      const Tensor<T> out = forward(model, batch);
      for (std::size_t i = lo; i < hi; ++i) {
        probs[i].resize(std::size_t(C));
        const T* row = out.ptr() + (i - lo) * std::size_t(C);
        for (int c = 0; c < C; ++c) probs[i][std::size_t(c)] = double(row[c]);
      }
    }
  });
  return probs;
}

template <typename T>
double accuracy_of(const CnnModel<T>& model, const LoadedSet<T>& set,
                   int batch_size, double* mean_loss, int threads) {
  const auto probs = predict_probs(model, set, batch_size, threads);
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    int best = 0;
    for (int c = 1; c < int(probs[i].size()); ++c)
      if (probs[i][std::size_t(c)] > probs[i][std::size_t(best)]) best = c;
    if (best == set.labels[i]) ++correct;
    loss -= std::log(std::max(probs[i][std::size_t(set.labels[i])], 1e-300));
  }
  if (mean_loss) *mean_loss = probs.empty() ? 0.0 : loss / double(probs.size());
  return probs.empty() ? 0.0 : double(correct) / double(probs.size());
}

template <typename T>
TrainOutcome<T> train(const TrainConfig& config) {
  const std::string manifest_path =
      config.manifest_path.empty() ? path_join(config.dataset_dir, "manifest.csv")
                                   : config.manifest_path;
  const std::string mean_path =
      config.mean_image_path.empty()
          ? path_join(config.dataset_dir, "mean_image.svol")
          : config.mean_image_path;

  if (config.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (config.batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(config.lr > 0.0)) throw ConfigError("learning rate must be > 0");
  if (config.momentum < 0.0 || config.momentum >= 1.0)
    throw ConfigError("momentum must be in [0, 1)");

  const DatasetManifest manifest = read_manifest(manifest_path);
  const ScanVolume mean_vol = read_volume(mean_path);
  if (mean_vol.nz != 1)
    throw FormatError("mean image must have nz == 1: " + mean_path);
  SliceImage mean256 = slice_xy(mean_vol, 0);

  const LoadedSet<T> train_set = load_split<T>(
      manifest, config.dataset_dir, "train", mean256, config.input_size,
      config.augment_flip, config.augment_contrast, config.contrast_factor);
  const LoadedSet<T> val_set = load_split<T>(
      manifest, config.dataset_dir, "val", mean256, config.input_size);
  if (train_set.inputs.empty()) throw ConfigError("train split is empty");
  if (val_set.inputs.empty()) throw ConfigError("val split is empty");

  CnnModel<T> model =
      init_model<T>(Architecture::toy(config.input_size, kNumClasses),
                    config.seed);
  SgdState<T> state = make_sgd_state(model);
  Gradients<T> grads = make_gradients(model);

  Rng shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  Rng dropout_rng(config.seed ^ 0x6a09e667f3bcc909ull);
  DropoutPlan dropout{&dropout_rng, config.dropout_rate};

  TrainOutcome<T> out;
  out.best_val_accuracy = -1.0;

  std::vector<std::size_t> order(train_set.inputs.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto tic = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += std::size_t(config.batch_size)) {
      const std::size_t hi =
          std::min(order.size(), lo + std::size_t(config.batch_size));
      const Tensor<T> batch = gather_batch(train_set, order, lo, hi);
      std::vector<int> labels(hi - lo);
      for (std::size_t i = lo; i < hi; ++i)
        labels[i - lo] = train_set.labels[order[i]];

      const double loss = loss_and_grads(
          model, batch, labels, grads, config.dropout ? &dropout : nullptr);
      if (!std::isfinite(loss))
        throw Error("training diverged: non-finite loss at epoch " +
                    std::to_string(epoch) + ", batch " +
                    std::to_string(lo / std::size_t(config.batch_size)));
      sgd_step(model, grads, T(config.lr), T(config.momentum), state);

      epoch_loss += loss * double(hi - lo);
      seen += hi - lo;
    }

    double val_loss = 0.0;
    const double val_acc =
        accuracy_of(model, val_set, config.batch_size, &val_loss, config.threads);
    const auto toc = std::chrono::steady_clock::now();

    TrainEpochRow row;
    row.epoch = epoch;
    row.train_loss = epoch_loss / double(seen);
    row.val_loss = val_loss;
    row.val_accuracy = val_acc;
    row.seconds = std::chrono::duration<double>(toc - tic).count();
    out.log.rows.push_back(row);

    if (val_acc > out.best_val_accuracy) {
      out.best_val_accuracy = val_acc;
      out.best_epoch = epoch;
      out.model = model;
    }
  }
  return out;
}

template LoadedSet<float> load_split<float>(const DatasetManifest&,
                                            const std::string&, const std::string&,
                                            const SliceImage&, int, bool, bool,
                                            double);
template LoadedSet<double> load_split<double>(const DatasetManifest&,
                                              const std::string&, const std::string&,
                                              const SliceImage&, int, bool, bool,
                                              double);
template std::vector<std::vector<double>> predict_probs<float>(
    const CnnModel<float>&, const LoadedSet<float>&, int, int);
template std::vector<std::vector<double>> predict_probs<double>(
    const CnnModel<double>&, const LoadedSet<double>&, int, int);
template double accuracy_of<float>(const CnnModel<float>&, const LoadedSet<float>&,
                                   int, double*, int);
template double accuracy_of<double>(const CnnModel<double>&,
                                    const LoadedSet<double>&, int, double*, int);
template TrainOutcome<float> train<float>(const TrainConfig&);
template TrainOutcome<double> train<double>(const TrainConfig&);

}  // namespace zonescan
