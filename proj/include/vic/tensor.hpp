#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "vic/common.hpp"
#include "vic/rng.hpp"

namespace vic {

// Dense row-major N-d array. Activations use NCHW order. The scalar type is
// a template parameter: float in production, double where tests compare
// against finite differences.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    data_.assign(size_t(numel_of(shape_)), T(0));
  }

  Tensor(std::vector<int64_t> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (int64_t(data_.size()) != numel_of(shape_))
      throw ConfigError("tensor data length does not match shape");
  }

  static int64_t numel_of(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t e : shape) {
      if (e < 0) throw ConfigError("negative tensor extent");
      n *= e;
    }
    return n;
  }

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t dim(size_t i) const { return shape_.at(i); }
  size_t rank() const { return shape_.size(); }
  int64_t numel() const { return int64_t(data_.size()); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T& operator[](int64_t i) { return data_[size_t(i)]; }
  const T& operator[](int64_t i) const { return data_[size_t(i)]; }

  // NCHW accessors.
  T& at(int64_t n, int64_t c, int64_t y, int64_t x) {
    return data_[size_t(((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x)];
  }
  const T& at(int64_t n, int64_t c, int64_t y, int64_t x) const {
    return data_[size_t(((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x)];
  }
  T& at(int64_t a, int64_t b, int64_t c) {
    return data_[size_t((a * shape_[1] + b) * shape_[2] + c)];
  }
  const T& at(int64_t a, int64_t b, int64_t c) const {
    return data_[size_t((a * shape_[1] + b) * shape_[2] + c)];
  }
  T& at(int64_t a, int64_t b) { return data_[size_t(a * shape_[1] + b)]; }
  const T& at(int64_t a, int64_t b) const { return data_[size_t(a * shape_[1] + b)]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(double(v))) return false;
    return true;
  }

  Tensor reshaped(std::vector<int64_t> shape) const {
    if (numel_of(shape) != numel()) throw ConfigError("reshape changes element count");
    Tensor out;
    out.shape_ = std::move(shape);
    out.data_ = data_;
    return out;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (int64_t i = 0; i < numel(); ++i) out[i] = U(data_[size_t(i)]);
    return out;
  }

  static Tensor full(std::vector<int64_t> shape, T v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
  }

  static Tensor random_normal(std::vector<int64_t> shape, Rng& rng, T stddev = T(1)) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = T(rng.normal()) * stddev;
    return t;
  }

  static Tensor random_uniform(std::vector<int64_t> shape, Rng& rng, T lo, T hi) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = T(rng.uniform(double(lo), double(hi)));
    return t;
  }

 private:
  std::vector<int64_t> shape_;
  std::vector<T> data_;
};

// Mirror-fold an index into [0, n). Repeats the reflection for targets much
// larger than the source, so any padded size is reachable.
inline int64_t reflect_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  const int64_t period = 2 * (n - 1);
  i = ((i % period) + period) % period;
  return i < n ? i : period - i;
}

// Reflection-pad an NCHW tensor on the bottom/right to the given extents.
template <typename T>
Tensor<T> pad_reflect(const Tensor<T>& x, int64_t out_h, int64_t out_w) {
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (out_h < h || out_w < w) throw ConfigError("padding target smaller than input");
  Tensor<T> out({n, c, out_h, out_w});
  for (int64_t in = 0; in < n; ++in)
    for (int64_t ic = 0; ic < c; ++ic)
      for (int64_t y = 0; y < out_h; ++y) {
        const int64_t sy = reflect_index(y, h);
        for (int64_t xx = 0; xx < out_w; ++xx)
          out.at(in, ic, y, xx) = x.at(in, ic, sy, reflect_index(xx, w));
      }
  return out;
}

template <typename T>
Tensor<T> crop(const Tensor<T>& x, int64_t out_h, int64_t out_w) {
  const int64_t n = x.dim(0), c = x.dim(1);
  if (out_h > x.dim(2) || out_w > x.dim(3)) throw ConfigError("crop larger than input");
  Tensor<T> out({n, c, out_h, out_w});
  for (int64_t in = 0; in < n; ++in)
    for (int64_t ic = 0; ic < c; ++ic)
      for (int64_t y = 0; y < out_h; ++y)
        for (int64_t xx = 0; xx < out_w; ++xx)
          out.at(in, ic, y, xx) = x.at(in, ic, y, xx);
  return out;
}

// Cyclic spatial shift (used by the rate-equivariance tests).
template <typename T>
Tensor<T> roll2d(const Tensor<T>& x, int64_t dy, int64_t dx) {
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<T> out(x.shape());
  for (int64_t in = 0; in < n; ++in)
    for (int64_t ic = 0; ic < c; ++ic)
      for (int64_t y = 0; y < h; ++y)
        for (int64_t xx = 0; xx < w; ++xx)
          out.at(in, ic, (y + dy % h + h) % h, (xx + dx % w + w) % w) = x.at(in, ic, y, xx);
  return out;
}

}  // namespace vic
