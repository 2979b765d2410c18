#pragma once

#include <cstddef>
#include <numeric>
#include <vector>

namespace zonescan {

// Dense row-major tensor. No view machinery; layers index into data() with
// explicit strides.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), T(0));
  }

  static std::size_t numel_of(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) n *= std::size_t(d);
    return n;
  }

  std::size_t numel() const { return data.size(); }
  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

}  // namespace zonescan
