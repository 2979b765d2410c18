#include "zonescan/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "zonescan/error.hpp"
#include "zonescan/util.hpp"

namespace zonescan {

namespace {

inline int conv_pad(int kernel) { return kernel / 2; }

// Eight independent accumulator lanes so the reduction vectorizes without
// relaxed floating-point flags. Any fixed lane layout is fine; this one is
// deterministic for a given n.
template <typename T>
T dot_product(const T* __restrict a, const T* __restrict b, std::size_t n) {
  T acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (int j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  T tail = T(0);
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
         ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

template <typename T>
T sum_lanes(const T* __restrict a, std::size_t n) {
  T acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (int j = 0; j < 8; ++j) acc[j] += a[i + j];
  T tail = T(0);
  for (; i < n; ++i) tail += a[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
         ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

// c[m][k] += dot(a_m, b_k) over row length N, 2x4 register tiling so each
// stream is read far fewer times than the naive per-dot loop would.
template <typename T>
void gemm_abt_acc(const T* __restrict a, const T* __restrict b,
                  T* __restrict c, int M, int K, std::size_t N) {
  int m = 0;
  for (; m + 2 <= M; m += 2) {
    const T* a0 = a + std::size_t(m) * N;
    const T* a1 = a0 + N;
    int k = 0;
    for (; k + 4 <= K; k += 4) {
      const T* b0 = b + std::size_t(k) * N;
      const T* b1 = b0 + N;
      const T* b2 = b1 + N;
      const T* b3 = b2 + N;
      T s[8][8] = {};
      std::size_t n = 0;
      for (; n + 8 <= N; n += 8)
        for (int j = 0; j < 8; ++j) {
          const T x0 = a0[n + j], x1 = a1[n + j];
          s[0][j] += x0 * b0[n + j];
          s[1][j] += x0 * b1[n + j];
          s[2][j] += x0 * b2[n + j];
          s[3][j] += x0 * b3[n + j];
          s[4][j] += x1 * b0[n + j];
          s[5][j] += x1 * b1[n + j];
          s[6][j] += x1 * b2[n + j];
          s[7][j] += x1 * b3[n + j];
        }
      T t[8] = {};
      for (; n < N; ++n) {
        const T x0 = a0[n], x1 = a1[n];
        t[0] += x0 * b0[n];
        t[1] += x0 * b1[n];
        t[2] += x0 * b2[n];
        t[3] += x0 * b3[n];
        t[4] += x1 * b0[n];
        t[5] += x1 * b1[n];
        t[6] += x1 * b2[n];
        t[7] += x1 * b3[n];
      }
      for (int v = 0; v < 8; ++v) {
        T r = t[v];
        for (int j = 0; j < 8; ++j) r += s[v][j];
        c[std::size_t(m + v / 4) * K + k + v % 4] += r;
      }
    }
    for (; k < K; ++k) {
      c[std::size_t(m) * K + k] += dot_product(a0, b + std::size_t(k) * N, N);
      c[std::size_t(m + 1) * K + k] += dot_product(a1, b + std::size_t(k) * N, N);
    }
  }
  for (; m < M; ++m)
    for (int k = 0; k < K; ++k)
      c[std::size_t(m) * K + k] +=
          dot_product(a + std::size_t(m) * N, b + std::size_t(k) * N, N);
}

// c[k][n] += sum_m w[m][k] * a[m][n], 4x2 tiling over (m, k).
template <typename T>
void gemm_wta_acc(const T* __restrict w, const T* __restrict a,
                  T* __restrict c, int M, int K, std::size_t N) {
  int k = 0;
  for (; k + 2 <= K; k += 2) {
    T* c0 = c + std::size_t(k) * N;
    T* c1 = c0 + N;
    int m = 0;
    for (; m + 4 <= M; m += 4) {
      const T* a0 = a + std::size_t(m) * N;
      const T* a1 = a0 + N;
      const T* a2 = a1 + N;
      const T* a3 = a2 + N;
      const T w00 = w[std::size_t(m) * K + k], w01 = w[std::size_t(m) * K + k + 1];
      const T w10 = w[std::size_t(m + 1) * K + k], w11 = w[std::size_t(m + 1) * K + k + 1];
      const T w20 = w[std::size_t(m + 2) * K + k], w21 = w[std::size_t(m + 2) * K + k + 1];
      const T w30 = w[std::size_t(m + 3) * K + k], w31 = w[std::size_t(m + 3) * K + k + 1];
      for (std::size_t n = 0; n < N; ++n) {
        const T x0 = a0[n], x1 = a1[n], x2 = a2[n], x3 = a3[n];
        c0[n] += w00 * x0 + w10 * x1 + w20 * x2 + w30 * x3;
        c1[n] += w01 * x0 + w11 * x1 + w21 * x2 + w31 * x3;
      }
    }
    for (; m < M; ++m) {
      const T* am = a + std::size_t(m) * N;
      const T wm0 = w[std::size_t(m) * K + k], wm1 = w[std::size_t(m) * K + k + 1];
      for (std::size_t n = 0; n < N; ++n) {
        c0[n] += wm0 * am[n];
        c1[n] += wm1 * am[n];
      }
    }
  }
  for (; k < K; ++k) {
    T* ck = c + std::size_t(k) * N;
    for (int m = 0; m < M; ++m) {
      const T* am = a + std::size_t(m) * N;
      const T wm = w[std::size_t(m) * K + k];
      for (std::size_t n = 0; n < N; ++n) ck[n] += wm * am[n];
    }
  }
}

inline int conv_out_dim(int in, int kernel, int stride) {
  return (in + 2 * conv_pad(kernel) - kernel) / stride + 1;
}

inline int pool_out_dim(int in, int kernel, int stride) {
  return (in - kernel) / stride + 1;
}

// Convolutions run as im2col + a tiny row-major GEMM; the inner loops then
// stream over oh*ow contiguous elements, which is what makes the single-core
// training budget workable.

// col[(i*k+ky)*k+kx][oy*ow+ox] = in[i][oy*s+ky-pad][ox*s+kx-pad], 0 outside.
template <typename T>
void im2col(const T* in, int ic, int ih, int iw, int k, int s, int pad, int oh,
            int ow, T* col) {
  const std::size_t N = std::size_t(oh) * ow;
  std::fill(col, col + std::size_t(ic) * k * k * N, T(0));
  for (int i = 0; i < ic; ++i) {
    const T* inp = in + std::size_t(i) * ih * iw;
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        T* dst = col + (std::size_t((i * k + ky) * k) + kx) * N;
        if (s == 1) {
          const int xlo = std::max(0, pad - kx);
          const int xhi = std::min(ow, iw + pad - kx);
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy + ky - pad;
            if (iy < 0 || iy >= ih) continue;
            const T* __restrict src = inp + std::size_t(iy) * iw + (kx - pad);
            T* __restrict d = dst + std::size_t(oy) * ow;
            for (int ox = xlo; ox < xhi; ++ox) d[ox] = src[ox];
          }
        } else {
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * s + ky - pad;
            if (iy < 0 || iy >= ih) continue;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * s + kx - pad;
              if (ix >= 0 && ix < iw)
                dst[std::size_t(oy) * ow + ox] = inp[std::size_t(iy) * iw + ix];
            }
          }
        }
      }
  }
}

// scatter-add transpose of im2col
template <typename T>
void col2im_add(const T* col, int ic, int ih, int iw, int k, int s, int pad,
                int oh, int ow, T* din) {
  const std::size_t N = std::size_t(oh) * ow;
  for (int i = 0; i < ic; ++i) {
    T* dinp = din + std::size_t(i) * ih * iw;
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const T* src = col + (std::size_t((i * k + ky) * k) + kx) * N;
        if (s == 1) {
          const int xlo = std::max(0, pad - kx);
          const int xhi = std::min(ow, iw + pad - kx);
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy + ky - pad;
            if (iy < 0 || iy >= ih) continue;
            T* __restrict d = dinp + std::size_t(iy) * iw + (kx - pad);
            const T* __restrict srow = src + std::size_t(oy) * ow;
            for (int ox = xlo; ox < xhi; ++ox) d[ox] += srow[ox];
          }
        } else {
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * s + ky - pad;
            if (iy < 0 || iy >= ih) continue;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * s + kx - pad;
              if (ix >= 0 && ix < iw)
                dinp[std::size_t(iy) * iw + ix] += src[std::size_t(oy) * ow + ox];
            }
          }
        }
      }
  }
}

// wt is the kernel transposed to [ic*k*k][oc], shared across the batch.
template <typename T>
void conv_forward(const T* in, int ic, int ih, int iw, const T* wt, const T* b,
                  int oc, int k, int s, T* out, int oh, int ow, T* col) {
  const int pad = conv_pad(k);
  const int K = ic * k * k;
  const std::size_t N = std::size_t(oh) * ow;
  im2col(in, ic, ih, iw, k, s, pad, oh, ow, col);
  for (int o = 0; o < oc; ++o)
    std::fill(out + std::size_t(o) * N, out + std::size_t(o + 1) * N, b[o]);
  gemm_wta_acc(wt, col, out, K, oc, N);
}

template <typename T>
void conv_backward(const T* in, int ic, int ih, int iw, const T* w, int oc,
                   int k, int s, const T* dout, int oh, int ow, T* din, T* dw,
                   T* db, T* col, T* dcol) {
  const int pad = conv_pad(k);
  const int K = ic * k * k;
  const std::size_t N = std::size_t(oh) * ow;
  im2col(in, ic, ih, iw, k, s, pad, oh, ow, col);

  for (int o = 0; o < oc; ++o) db[o] += sum_lanes(dout + std::size_t(o) * N, N);
  gemm_abt_acc(dout, col, dw, oc, K, N);

  if (!din) return;
  std::fill(dcol, dcol + std::size_t(K) * N, T(0));
  gemm_wta_acc(w, dout, dcol, oc, K, N);
  col2im_add(dcol, ic, ih, iw, k, s, pad, oh, ow, din);
}

void put_i32(std::string& out, std::int32_t v) {
  const auto u = std::uint32_t(v);
  out.push_back(char(u & 0xff));
  out.push_back(char((u >> 8) & 0xff));
  out.push_back(char((u >> 16) & 0xff));
  out.push_back(char((u >> 24) & 0xff));
}

struct ByteReader {
  const unsigned char* p;
  std::size_t left;
  std::string path;

  void need(std::size_t n) const {
    if (left < n) throw CorruptionError("truncated checkpoint " + path);
  }
  std::int32_t i32() {
    need(4);
    const std::uint32_t u = std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
                            std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
    p += 4;
    left -= 4;
    return std::int32_t(u);
  }
  std::uint8_t u8() {
    need(1);
    const std::uint8_t v = *p;
    ++p;
    --left;
    return v;
  }
  float f32() {
    const std::int32_t v = i32();
    float f;
    std::memcpy(&f, &v, 4);
    return f;
  }
};

}  // namespace

Architecture Architecture::toy(int input_hw, int num_classes) {
  Architecture a;
  a.in_c = 1;
  a.in_h = input_hw;
  a.in_w = input_hw;
  a.layers = {
      {LayerKind::Conv, 8, 5, 1},    {LayerKind::Relu, 0, 0, 1},
      {LayerKind::MaxPool, 0, 2, 2}, {LayerKind::Conv, 16, 5, 1},
      {LayerKind::Relu, 0, 0, 1},    {LayerKind::MaxPool, 0, 2, 2},
      {LayerKind::Dense, 128, 0, 1}, {LayerKind::Relu, 0, 0, 1},
      {LayerKind::Dense, num_classes, 0, 1},
      {LayerKind::Softmax, 0, 0, 1},
  };
  return a;
}

std::vector<TensorDims> Architecture::layer_dims() const {
  std::vector<TensorDims> dims;
  dims.push_back({in_c, in_h, in_w});
  TensorDims cur = dims.back();
  for (const auto& l : layers) {
    switch (l.kind) {
      case LayerKind::Conv:
        if (l.channels < 1 || l.kernel < 1 || l.stride < 1)
          throw ValidationError("conv layer parameters must be positive");
        cur = {l.channels, conv_out_dim(cur.h, l.kernel, l.stride),
               conv_out_dim(cur.w, l.kernel, l.stride)};
        break;
      case LayerKind::Relu:
        break;
      case LayerKind::MaxPool:
        if (l.kernel < 1 || l.stride < 1)
          throw ValidationError("pool layer parameters must be positive");
        if (l.kernel > cur.h || l.kernel > cur.w)
          throw ValidationError("pool kernel larger than its input");
        cur = {cur.c, pool_out_dim(cur.h, l.kernel, l.stride),
               pool_out_dim(cur.w, l.kernel, l.stride)};
        break;
      case LayerKind::Dense:
        if (l.channels < 1)
          throw ValidationError("dense layer needs a unit count");
        cur = {l.channels, 1, 1};
        break;
      case LayerKind::Softmax:
        break;
    }
    if (cur.c < 1 || cur.h < 1 || cur.w < 1)
      throw ValidationError("layer output collapsed to an empty tensor");
    dims.push_back(cur);
  }
  return dims;
}

void Architecture::validate() const {
  if (layers.empty()) throw ValidationError("architecture has no layers");
  if (layers.back().kind != LayerKind::Softmax)
    throw ValidationError("softmax must be the final layer");
  for (std::size_t i = 0; i + 1 < layers.size(); ++i)
    if (layers[i].kind == LayerKind::Softmax)
      throw ValidationError("softmax may only appear as the final layer");
  if (in_c < 1 || in_h < 1 || in_w < 1)
    throw ValidationError("input dimensions must be positive");
  layer_dims();  // throws on any incompatible pair
}

int Architecture::num_classes() const {
  const auto dims = layer_dims();
  return dims.back().numel();
}

std::vector<std::string> Architecture::layer_names() const {
  std::vector<std::string> names;
  int conv = 0, relu = 0, pool = 0, dense = 0;
  for (const auto& l : layers) {
    switch (l.kind) {
      case LayerKind::Conv: names.push_back("conv" + std::to_string(++conv)); break;
      case LayerKind::Relu: names.push_back("relu" + std::to_string(++relu)); break;
      case LayerKind::MaxPool: names.push_back("pool" + std::to_string(++pool)); break;
      case LayerKind::Dense: names.push_back("dense" + std::to_string(++dense)); break;
      case LayerKind::Softmax: names.push_back("softmax"); break;
    }
  }
  return names;
}

template <typename T>
CnnModel<T> init_model(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  CnnModel<T> model;
  model.arch = arch;
  Rng rng(seed);
  const auto dims = arch.layer_dims();
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& l = arch.layers[i];
    if (l.kind == LayerKind::Conv) {
      const int ic = dims[i].c;
      Tensor<T> w({l.channels, ic, l.kernel, l.kernel});
      const double fan_in = double(ic) * l.kernel * l.kernel;
      const double fan_out = double(l.channels) * l.kernel * l.kernel;
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      for (auto& x : w.data) x = T(float(rng.uniform(-limit, limit)));
      model.weights.push_back(std::move(w));
      model.biases.push_back(Tensor<T>({l.channels}));
    } else if (l.kind == LayerKind::Dense) {
      const int in = dims[i].numel();
      Tensor<T> w({l.channels, in});
      const double limit = std::sqrt(6.0 / (double(in) + double(l.channels)));
      for (auto& x : w.data) x = T(float(rng.uniform(-limit, limit)));
      model.weights.push_back(std::move(w));
      model.biases.push_back(Tensor<T>({l.channels}));
    }
  }
  return model;
}

template <typename T>
Tensor<T> forward(const CnnModel<T>& model, const Tensor<T>& batch,
                  ForwardTrace<T>* trace, const DropoutPlan* dropout) {
  const Architecture& arch = model.arch;
  const auto dims = arch.layer_dims();
  if (batch.shape.size() != 4 || batch.shape[1] != arch.in_c ||
      batch.shape[2] != arch.in_h || batch.shape[3] != arch.in_w)
    throw ShapeError("forward: batch shape does not match the input spec");
  const int N = batch.shape[0];

  Tensor<T> own;
  const Tensor<T>* cur = &batch;
  if (trace) {
    trace->acts.clear();
    trace->acts.reserve(arch.layers.size() + 1);
    trace->pool_argmax.assign(arch.layers.size(), {});
    trace->acts.push_back(batch);
    cur = &trace->acts.back();
  }

  std::vector<T> col;
  int param = 0;
  for (std::size_t li = 0; li < arch.layers.size(); ++li) {
    const auto& l = arch.layers[li];
    const TensorDims in_d = dims[li], out_d = dims[li + 1];
    Tensor<T> next;
    switch (l.kind) {
      case LayerKind::Conv: {
        next = Tensor<T>({N, out_d.c, out_d.h, out_d.w});
        const auto& w = model.weights[std::size_t(param)];
        const auto& b = model.biases[std::size_t(param)];
        ++param;
        const int K = in_d.c * l.kernel * l.kernel;
        col.resize(std::size_t(K) * out_d.h * out_d.w);
        std::vector<T> wt(std::size_t(K) * out_d.c);
        for (int o = 0; o < out_d.c; ++o)
          for (int kk = 0; kk < K; ++kk)
            wt[std::size_t(kk) * out_d.c + o] = w.data[std::size_t(o) * K + kk];
        for (int n = 0; n < N; ++n)
          conv_forward(cur->ptr() + std::size_t(n) * in_d.numel(), in_d.c,
                       in_d.h, in_d.w, wt.data(), b.ptr(), out_d.c, l.kernel,
                       l.stride, next.ptr() + std::size_t(n) * out_d.numel(),
                       out_d.h, out_d.w, col.data());
        break;
      }
      case LayerKind::Relu: {
        next = *cur;
        for (auto& x : next.data) x = std::max(T(0), x);
        // Inverted dropout on dense-fed ReLUs only, training path only.
        if (dropout && dropout->rng && li > 0 &&
            arch.layers[li - 1].kind == LayerKind::Dense) {
          const T keep = T(1.0 - dropout->rate);
          for (auto& x : next.data)
            x = dropout->rng->uniform() < dropout->rate ? T(0) : x / keep;
        }
        break;
      }
      case LayerKind::MaxPool: {
        next = Tensor<T>({N, out_d.c, out_d.h, out_d.w});
        std::vector<std::int32_t>* argmax = nullptr;
        if (trace) {
          trace->pool_argmax[li].assign(next.numel(), 0);
          argmax = &trace->pool_argmax[li];
        }
        const int k = l.kernel, s = l.stride;
        for (int n = 0; n < N; ++n)
          for (int c = 0; c < out_d.c; ++c) {
            const T* inp = cur->ptr() +
                           (std::size_t(n) * in_d.c + c) * in_d.h * in_d.w;
            T* outp = next.ptr() +
                      (std::size_t(n) * out_d.c + c) * out_d.h * out_d.w;
            for (int oy = 0; oy < out_d.h; ++oy)
              for (int ox = 0; ox < out_d.w; ++ox) {
                T best = inp[std::size_t(oy * s) * in_d.w + ox * s];
                int best_idx = oy * s * in_d.w + ox * s;
                for (int ky = 0; ky < k; ++ky)
                  for (int kx = 0; kx < k; ++kx) {
                    const int idx = (oy * s + ky) * in_d.w + (ox * s + kx);
                    if (inp[idx] > best) {  // first max wins ties
                      best = inp[idx];
                      best_idx = idx;
                    }
                  }
                outp[std::size_t(oy) * out_d.w + ox] = best;
                if (argmax)
                  (*argmax)[((std::size_t(n) * out_d.c + c) * out_d.h + oy) *
                                out_d.w + ox] =
                      std::int32_t((std::size_t(n) * in_d.c + c) * in_d.h *
                                   in_d.w) + best_idx;
              }
          }
        break;
      }
      case LayerKind::Dense: {
        next = Tensor<T>({N, out_d.c});
        const auto& w = model.weights[std::size_t(param)];
        const auto& b = model.biases[std::size_t(param)];
        ++param;
        const int in_n = in_d.numel();
        for (int n = 0; n < N; ++n) {
          const T* x = cur->ptr() + std::size_t(n) * in_n;
          T* y = next.ptr() + std::size_t(n) * out_d.c;
          for (int u = 0; u < out_d.c; ++u)
            y[u] = b.data[std::size_t(u)] +
                   dot_product(w.ptr() + std::size_t(u) * in_n, x,
                               std::size_t(in_n));
        }
        break;
      }
      case LayerKind::Softmax: {
        next = *cur;
        const int C = out_d.numel();
        for (int n = 0; n < N; ++n) {
          T* row = next.ptr() + std::size_t(n) * C;
          T m = row[0];
          for (int c = 1; c < C; ++c) m = std::max(m, row[c]);
          T sum = T(0);
          for (int c = 0; c < C; ++c) {
            row[c] = std::exp(row[c] - m);
            sum += row[c];
          }
          for (int c = 0; c < C; ++c) row[c] /= sum;
        }
        break;
      }
    }
    if (trace) {
      trace->acts.push_back(std::move(next));
      cur = &trace->acts.back();
    } else {
      own = std::move(next);
      cur = &own;
    }
  }
  return *cur;
}

template <typename T>
Gradients<T> make_gradients(const CnnModel<T>& model) {
  Gradients<T> g;
  for (const auto& w : model.weights) g.d_weights.push_back(Tensor<T>(w.shape));
  for (const auto& b : model.biases) g.d_biases.push_back(Tensor<T>(b.shape));
  return g;
}

template <typename T>
SgdState<T> make_sgd_state(const CnnModel<T>& model) {
  SgdState<T> s;
  for (const auto& w : model.weights) s.vel_w.push_back(Tensor<T>(w.shape));
  for (const auto& b : model.biases) s.vel_b.push_back(Tensor<T>(b.shape));
  return s;
}

template <typename T>
double loss_and_grads(const CnnModel<T>& model, const Tensor<T>& batch,
                      const std::vector<int>& labels, Gradients<T>& grads,
                      const DropoutPlan* dropout) {
  const Architecture& arch = model.arch;
  const auto dims = arch.layer_dims();
  const int N = batch.shape.empty() ? 0 : batch.shape[0];
  const int C = arch.num_classes();
  if (int(labels.size()) != N)
    throw ValidationError("loss_and_grads: one label per batch element required");
  for (int y : labels)
    if (y < 0 || y >= C)
      throw ValidationError("label " + std::to_string(y) + " outside 0.." +
                            std::to_string(C - 1));

  ForwardTrace<T> trace;
  const Tensor<T> probs = forward(model, batch, &trace, dropout);

  // Loss from the logits via log-sum-exp; the softmax layer is the last one,
  // so its input acts[L-1] holds the logits.
  const Tensor<T>& logits = trace.acts[arch.layers.size() - 1];
  double loss = 0.0;
  for (int n = 0; n < N; ++n) {
    const T* row = logits.ptr() + std::size_t(n) * C;
    double m = double(row[0]);
    for (int c = 1; c < C; ++c) m = std::max(m, double(row[c]));
    double sum = 0.0;
    for (int c = 0; c < C; ++c) sum += std::exp(double(row[c]) - m);
    loss += m + std::log(sum) - double(row[std::size_t(labels[std::size_t(n)])]);
  }
  loss /= std::max(1, N);

  if (grads.d_weights.size() != model.weights.size())
    grads = make_gradients(model);
  for (auto& t : grads.d_weights) t.fill(T(0));
  for (auto& t : grads.d_biases) t.fill(T(0));

  // softmax + cross-entropy: d logits = (p - onehot)/N
  Tensor<T> d_out = probs;
  for (int n = 0; n < N; ++n)
    d_out.data[std::size_t(n) * C + std::size_t(labels[std::size_t(n)])] -= T(1);
  const T invN = T(1) / T(std::max(1, N));
  for (auto& x : d_out.data) x *= invN;

  // parametric layer index just before the softmax
  int param = int(model.weights.size());

  for (int li = int(arch.layers.size()) - 2; li >= 0; --li) {
    const auto& l = arch.layers[std::size_t(li)];
    const TensorDims in_d = dims[std::size_t(li)], out_d = dims[std::size_t(li) + 1];
    const Tensor<T>& in_act = trace.acts[std::size_t(li)];
    Tensor<T> d_in;
    const bool need_d_in = li > 0;

    switch (l.kind) {
      case LayerKind::Conv: {
        --param;
        if (need_d_in) d_in = Tensor<T>(in_act.shape);
        const std::size_t col_n =
            std::size_t(in_d.c) * l.kernel * l.kernel * out_d.h * out_d.w;
        std::vector<T> col(col_n), dcol(need_d_in ? col_n : 0);
        for (int n = 0; n < N; ++n)
          conv_backward(in_act.ptr() + std::size_t(n) * in_d.numel(), in_d.c,
                        in_d.h, in_d.w, model.weights[std::size_t(param)].ptr(),
                        out_d.c, l.kernel, l.stride,
                        d_out.ptr() + std::size_t(n) * out_d.numel(), out_d.h,
                        out_d.w,
                        need_d_in ? d_in.ptr() + std::size_t(n) * in_d.numel()
                                  : nullptr,
                        grads.d_weights[std::size_t(param)].ptr(),
                        grads.d_biases[std::size_t(param)].ptr(), col.data(),
                        dcol.data());
        break;
      }
      case LayerKind::Relu: {
        if (!need_d_in) break;
        d_in = Tensor<T>(in_act.shape);
        const Tensor<T>& out_act = trace.acts[std::size_t(li) + 1];
        // out > 0 exactly on kept, positive inputs; dropped units carry the
        // inverted-dropout 1/keep factor through the chain rule
        T scale = T(1);
        if (dropout && dropout->rng && li > 0 &&
            arch.layers[std::size_t(li) - 1].kind == LayerKind::Dense)
          scale = T(1) / T(1.0 - dropout->rate);
        for (std::size_t i = 0; i < d_in.data.size(); ++i)
          d_in.data[i] = out_act.data[i] > T(0) ? d_out.data[i] * scale : T(0);
        break;
      }
      case LayerKind::MaxPool: {
        if (!need_d_in) break;
        d_in = Tensor<T>(in_act.shape);
        const auto& argmax = trace.pool_argmax[std::size_t(li)];
        for (std::size_t i = 0; i < d_out.data.size(); ++i)
          d_in.data[std::size_t(argmax[i])] += d_out.data[i];
        break;
      }
      case LayerKind::Dense: {
        --param;
        const auto& w = model.weights[std::size_t(param)];
        auto& dw = grads.d_weights[std::size_t(param)];
        auto& db = grads.d_biases[std::size_t(param)];
        const int in_n = in_d.numel();
        if (need_d_in) d_in = Tensor<T>(in_act.shape);
        for (int n = 0; n < N; ++n) {
          const T* __restrict x = in_act.ptr() + std::size_t(n) * in_n;
          const T* dy = d_out.ptr() + std::size_t(n) * out_d.c;
          for (int u = 0; u < out_d.c; ++u) {
            const T g = dy[u];
            db.data[std::size_t(u)] += g;
            T* __restrict dwr = dw.ptr() + std::size_t(u) * in_n;
            for (int i = 0; i < in_n; ++i) dwr[i] += g * x[i];
          }
          if (need_d_in) {
            T* __restrict dx = d_in.ptr() + std::size_t(n) * in_n;
            for (int u = 0; u < out_d.c; ++u) {
              const T g = dy[u];
              const T* __restrict wr = w.ptr() + std::size_t(u) * in_n;
              for (int i = 0; i < in_n; ++i) dx[i] += g * wr[i];
            }
          }
        }
        break;
      }
      case LayerKind::Softmax:
        break;  // folded into the loss gradient
    }
    if (!need_d_in) break;
    d_out = std::move(d_in);
  }
  return loss;
}

template <typename T>
void sgd_step(CnnModel<T>& model, const Gradients<T>& grads, T lr, T momentum,
              SgdState<T>& state) {
  if (state.vel_w.size() != model.weights.size())
    throw ShapeError("sgd_step: velocity state does not match the model");
  for (std::size_t p = 0; p < model.weights.size(); ++p) {
    if (!state.vel_w[p].same_shape(model.weights[p]) ||
        !grads.d_weights[p].same_shape(model.weights[p]))
      throw ShapeError("sgd_step: tensor shapes disagree");
    auto& w = model.weights[p].data;
    auto& v = state.vel_w[p].data;
    const auto& g = grads.d_weights[p].data;
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = momentum * v[i] - lr * g[i];
      w[i] += v[i];
    }
    auto& b = model.biases[p].data;
    auto& vb = state.vel_b[p].data;
    const auto& gb = grads.d_biases[p].data;
    for (std::size_t i = 0; i < b.size(); ++i) {
      vb[i] = momentum * vb[i] - lr * gb[i];
      b[i] += vb[i];
    }
  }
}

namespace {
constexpr char kCkptMagic[8] = {'C', 'N', 'N', 'C', 'K', 'P', 'T', '1'};
}

template <typename T>
void save_checkpoint(const CnnModel<T>& model, const std::string& path) {
  std::string out;
  out.append(kCkptMagic, 8);
  put_i32(out, 1);  // version
  put_i32(out, model.arch.in_c);
  put_i32(out, model.arch.in_h);
  put_i32(out, model.arch.in_w);
  put_i32(out, std::int32_t(model.arch.layers.size()));
  for (const auto& l : model.arch.layers) {
    out.push_back(char(l.kind));
    put_i32(out, l.channels);
    put_i32(out, l.kernel);
    put_i32(out, l.stride);
  }
  put_i32(out, std::int32_t(model.weights.size()));
  auto put_tensor = [&out](const Tensor<T>& t) {
    out.push_back(char(t.shape.size()));
    for (int d : t.shape) put_i32(out, d);
    for (const T& x : t.data) {
      const float f = float(x);
      std::int32_t v;
      std::memcpy(&v, &f, 4);
      put_i32(out, v);
    }
  };
  for (std::size_t p = 0; p < model.weights.size(); ++p) {
    put_tensor(model.weights[p]);
    put_tensor(model.biases[p]);
  }
  atomic_write_file(path, out);
}

template <typename T>
CnnModel<T> load_checkpoint(const std::string& path) {
  const std::string buf = read_text_file(path);
  if (buf.size() < 8 || std::memcmp(buf.data(), kCkptMagic, 8) != 0)
    throw FormatError("bad magic in checkpoint " + path);
  ByteReader r{reinterpret_cast<const unsigned char*>(buf.data()) + 8,
               buf.size() - 8, path};

  const std::int32_t version = r.i32();
  if (version != 1)
    throw FormatError("unsupported checkpoint version " +
                      std::to_string(version));

  CnnModel<T> model;
  model.arch.in_c = r.i32();
  model.arch.in_h = r.i32();
  model.arch.in_w = r.i32();
  const std::int32_t n_layers = r.i32();
  if (n_layers < 1 || n_layers > 1024)
    throw FormatError("implausible layer count in " + path);
  for (std::int32_t i = 0; i < n_layers; ++i) {
    LayerSpec l;
    const std::uint8_t kind = r.u8();
    if (kind > std::uint8_t(LayerKind::Softmax))
      throw FormatError("unknown layer kind in " + path);
    l.kind = LayerKind(kind);
    l.channels = r.i32();
    l.kernel = r.i32();
    l.stride = r.i32();
    model.arch.layers.push_back(l);
  }
  model.arch.validate();

  const std::int32_t n_param = r.i32();
  auto get_tensor = [&r, &path]() {
    const std::uint8_t nd = r.u8();
    if (nd < 1 || nd > 8) throw FormatError("implausible tensor rank in " + path);
    std::vector<int> shape;
    std::size_t numel = 1;
    for (std::uint8_t d = 0; d < nd; ++d) {
      const std::int32_t s = r.i32();
      if (s < 1 || numel * std::size_t(s) > (std::size_t(1) << 30))
        throw FormatError("implausible tensor shape in " + path);
      shape.push_back(s);
      numel *= std::size_t(s);
    }
    Tensor<T> t(shape);
    for (auto& x : t.data) x = T(r.f32());
    return t;
  };
  for (std::int32_t p = 0; p < n_param; ++p) {
    model.weights.push_back(get_tensor());
    model.biases.push_back(get_tensor());
  }

  // shapes must agree with what the descriptor implies
  const CnnModel<T> ref = init_model<T>(model.arch, 0);
  if (ref.weights.size() != model.weights.size())
    throw FormatError("parametric layer count mismatch in " + path);
  for (std::size_t p = 0; p < ref.weights.size(); ++p)
    if (!ref.weights[p].same_shape(model.weights[p]) ||
        !ref.biases[p].same_shape(model.biases[p]))
      throw FormatError("weight tensor shape mismatch in " + path);
  return model;
}

namespace {

LayerStatRow stats_of(const std::string& layer, const std::string& tensor,
                      const double* data, std::size_t n) {
  LayerStatRow row;
  row.layer = layer;
  row.tensor = tensor;
  if (n == 0) return row;
  double mn = data[0], mx = data[0], sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mn = std::min(mn, data[i]);
    mx = std::max(mx, data[i]);
    sum += data[i];
  }
  row.min = mn;
  row.max = mx;
  row.mean = sum / double(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = data[i] - row.mean;
    var += d * d;
  }
  row.stddev = std::sqrt(var / double(n));
  if (mx > mn) {
    const double scale = 20.0 / (mx - mn);
    for (std::size_t i = 0; i < n; ++i) {
      int bin = int((data[i] - mn) * scale);
      bin = std::min(19, std::max(0, bin));
      ++row.hist[std::size_t(bin)];
    }
  } else {
    row.hist[0] = std::int64_t(n);
  }
  return row;
}

}  // namespace

template <typename T>
std::vector<LayerStatRow> layer_stats(const CnnModel<T>& model,
                                      const Tensor<T>& image) {
  ForwardTrace<T> trace;
  forward(model, image, &trace);
  const auto names = model.arch.layer_names();

  std::vector<LayerStatRow> rows;
  std::vector<double> buf;
  int param = 0;
  for (std::size_t li = 0; li < model.arch.layers.size(); ++li) {
    const auto& act = trace.acts[li + 1];
    buf.assign(act.data.begin(), act.data.end());
    rows.push_back(stats_of(names[li], "activations", buf.data(), buf.size()));
    const LayerKind kind = model.arch.layers[li].kind;
    if (kind == LayerKind::Conv || kind == LayerKind::Dense) {
      const auto& w = model.weights[std::size_t(param)];
      buf.assign(w.data.begin(), w.data.end());
      rows.push_back(stats_of(names[li], "weights", buf.data(), buf.size()));
      ++param;
    }
  }
  return rows;
}

void write_layer_stats_csv(const std::vector<LayerStatRow>& rows,
                           const std::string& path) {
  std::ostringstream out;
  out << "layer,tensor,mean,stddev,min,max";
  for (int i = 0; i < 20; ++i) out << ",bin" << i;
  out << "\n";
  for (const auto& r : rows) {
    out << r.layer << ',' << r.tensor << ',' << fmt_g(r.mean) << ','
        << fmt_g(r.stddev) << ',' << fmt_g(r.min) << ',' << fmt_g(r.max);
    for (const auto& h : r.hist) out << ',' << h;
    out << "\n";
  }
  atomic_write_file(path, out.str());
}

// explicit instantiations: float is the production path, double backs the
// numeric oracles
template CnnModel<float> init_model<float>(const Architecture&, std::uint64_t);
template CnnModel<double> init_model<double>(const Architecture&, std::uint64_t);
template Tensor<float> forward<float>(const CnnModel<float>&, const Tensor<float>&,
                                      ForwardTrace<float>*, const DropoutPlan*);
template Tensor<double> forward<double>(const CnnModel<double>&, const Tensor<double>&,
                                        ForwardTrace<double>*, const DropoutPlan*);
template Gradients<float> make_gradients<float>(const CnnModel<float>&);
template Gradients<double> make_gradients<double>(const CnnModel<double>&);
template SgdState<float> make_sgd_state<float>(const CnnModel<float>&);
template SgdState<double> make_sgd_state<double>(const CnnModel<double>&);
template double loss_and_grads<float>(const CnnModel<float>&, const Tensor<float>&,
                                      const std::vector<int>&, Gradients<float>&,
                                      const DropoutPlan*);
template double loss_and_grads<double>(const CnnModel<double>&, const Tensor<double>&,
                                       const std::vector<int>&, Gradients<double>&,
                                       const DropoutPlan*);
template void sgd_step<float>(CnnModel<float>&, const Gradients<float>&, float,
                              float, SgdState<float>&);
template void sgd_step<double>(CnnModel<double>&, const Gradients<double>&, double,
                               double, SgdState<double>&);
template void save_checkpoint<float>(const CnnModel<float>&, const std::string&);
template void save_checkpoint<double>(const CnnModel<double>&, const std::string&);
template CnnModel<float> load_checkpoint<float>(const std::string&);
template CnnModel<double> load_checkpoint<double>(const std::string&);
template std::vector<LayerStatRow> layer_stats<float>(const CnnModel<float>&,
                                                      const Tensor<float>&);
template std::vector<LayerStatRow> layer_stats<double>(const CnnModel<double>&,
                                                       const Tensor<double>&);

}  // namespace zonescan
