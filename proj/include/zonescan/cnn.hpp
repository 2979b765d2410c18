#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "zonescan/tensor.hpp"
#include "zonescan/util.hpp"

namespace zonescan {

enum class LayerKind : std::uint8_t {
  Conv = 0,
  Relu = 1,
  MaxPool = 2,
  Dense = 3,
  Softmax = 4,
};

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  int channels = 0;  // conv out channels / dense units
  int kernel = 0;    // conv / pool kernel
  int stride = 1;
};

struct TensorDims {
  int c = 0, h = 0, w = 0;
  int numel() const { return c * h * w; }
};

// Ordered layer list plus the input spec. Convs are zero-padded "same"
// (pad = kernel/2); pools are unpadded.
struct Architecture {
  int in_c = 1, in_h = 64, in_w = 64;
  std::vector<LayerSpec> layers;

  // conv(8,5)+relu+pool(2,2), conv(16,5)+relu+pool(2,2), dense(128)+relu,
  // dense(num_classes)+softmax.
  static Architecture toy(int input_hw = 64, int num_classes = 34);

  void validate() const;
  std::vector<TensorDims> layer_dims() const;  // [0] = input, [i+1] = layer i out
  int num_classes() const;
  std::vector<std::string> layer_names() const;  // conv1, relu1, pool1, ...
};

template <typename T>
struct CnnModel {
  Architecture arch;
  // Indexed by parametric layer order (convs and denses, in layer order).
  std::vector<Tensor<T>> weights;
  std::vector<Tensor<T>> biases;
};

template <typename T>
struct ForwardTrace {
  std::vector<Tensor<T>> acts;                         // acts[0] = input batch
  std::vector<std::vector<std::int32_t>> pool_argmax;  // per layer, maxpool only
};

template <typename T>
struct Gradients {
  std::vector<Tensor<T>> d_weights;
  std::vector<Tensor<T>> d_biases;
};

template <typename T>
struct SgdState {
  std::vector<Tensor<T>> vel_w;
  std::vector<Tensor<T>> vel_b;
};

// Train-time dropout on activations of ReLUs that directly follow a dense
// layer (inverted scaling, so inference needs no correction).
struct DropoutPlan {
  Rng* rng = nullptr;
  double rate = 0.5;
};

template <typename T>
CnnModel<T> init_model(const Architecture& arch, std::uint64_t seed);

// Probabilities, one softmax row per batch element. `trace`, when given,
// records every intermediate activation for backprop and inspection.
template <typename T>
Tensor<T> forward(const CnnModel<T>& model, const Tensor<T>& batch,
                  ForwardTrace<T>* trace = nullptr,
                  const DropoutPlan* dropout = nullptr);

// Mean cross-entropy over the batch plus parameter gradients.
template <typename T>
double loss_and_grads(const CnnModel<T>& model, const Tensor<T>& batch,
                      const std::vector<int>& labels, Gradients<T>& grads,
                      const DropoutPlan* dropout = nullptr);

template <typename T>
Gradients<T> make_gradients(const CnnModel<T>& model);

template <typename T>
SgdState<T> make_sgd_state(const CnnModel<T>& model);

// v <- momentum*v - lr*g; w <- w + v.
template <typename T>
void sgd_step(CnnModel<T>& model, const Gradients<T>& grads, T lr, T momentum,
              SgdState<T>& state);

// Checkpoint container: magic "CNNCKPT1", version, architecture descriptor,
// then per-layer shapes and float32 LE weights.
template <typename T>
void save_checkpoint(const CnnModel<T>& model, const std::string& path);
template <typename T>
CnnModel<T> load_checkpoint(const std::string& path);

struct LayerStatRow {
  std::string layer;
  std::string tensor;  // "activations" or "weights"
  double mean = 0, stddev = 0, min = 0, max = 0;
  std::array<std::int64_t, 20> hist{};
};

// Activation statistics per layer for a single image (plus weight statistics
// for parametric layers). Histograms use 20 uniform bins over [min, max].
template <typename T>
std::vector<LayerStatRow> layer_stats(const CnnModel<T>& model,
                                      const Tensor<T>& image);

void write_layer_stats_csv(const std::vector<LayerStatRow>& rows,
                           const std::string& path);

}  // namespace zonescan
