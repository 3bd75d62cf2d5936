#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "vic/conv.hpp"
#include "vic/graph.hpp"

namespace vic {

// Trainable tensor with an optional reparameterization. The stored value is
// always the unconstrained pre-image; effective() builds the constrained
// value as part of the graph so gradients reach the pre-image.
//
// lower_bounded stores sqrt(v + pedestal) and relies on the optimizer
// projecting the pre-image back above its floor after each step; the small
// pedestal keeps the gradient nonzero when the effective value sits at 0.
enum class Reparam { identity, softplus, tanh_bounded, lower_bounded };

template <typename T>
constexpr T reparam_pedestal() {
  return T(0x1.0p-36);
}

template <typename T>
struct Parameter {
  std::string name;
  Var<T> raw;
  Reparam tag = Reparam::identity;
  T bound = T(0);

  Parameter() = default;
  Parameter(std::string n, Tensor<T> pre_image, Reparam t = Reparam::identity, T b = T(0))
      : name(std::move(n)), raw(make_leaf(std::move(pre_image), true)), tag(t), bound(b) {}

  static Parameter plain(std::string n, Tensor<T> value) {
    return Parameter(std::move(n), std::move(value), Reparam::identity);
  }
  // Build from the desired effective value.
  static Parameter softplus(std::string n, Tensor<T> value) {
    for (int64_t i = 0; i < value.numel(); ++i)
      value[i] = T(std::log(std::expm1(double(value[i]))));
    return Parameter(std::move(n), std::move(value), Reparam::softplus);
  }
  static Parameter tanh_bounded(std::string n, Tensor<T> value) {
    for (int64_t i = 0; i < value.numel(); ++i) value[i] = std::atanh(value[i]);
    return Parameter(std::move(n), std::move(value), Reparam::tanh_bounded);
  }
  static Parameter lower_bounded(std::string n, Tensor<T> value, T bound) {
    for (int64_t i = 0; i < value.numel(); ++i)
      value[i] = std::sqrt(std::max(value[i], bound) + reparam_pedestal<T>());
    return Parameter(std::move(n), std::move(value), Reparam::lower_bounded, bound);
  }

  Var<T> effective() const {
    switch (tag) {
      case Reparam::identity: return raw;
      case Reparam::softplus: return softplus_op(raw);
      case Reparam::tanh_bounded: return tanh_op(raw);
      case Reparam::lower_bounded:
        return add_const(square(raw), -reparam_pedestal<T>());
    }
    throw UsageError("unknown reparameterization");
  }

  Tensor<T> effective_value() const { return effective()->value; }

  // Projection floor on the pre-image (lower_bounded only).
  T raw_floor() const { return std::sqrt(bound + reparam_pedestal<T>()); }

  void zero_grad() {
    raw->ensure_grad();
    raw->grad.fill(T(0));
  }
  const Tensor<T>& grad() const { return raw->grad; }
  Tensor<T>& value() { return raw->value; }
  const Tensor<T>& value() const { return raw->value; }
};

// Variance-scaling kernel initialization (fan-in for down, fan-in per
// output site for up).
template <typename T>
Tensor<T> init_conv_kernel(int64_t cout, int64_t cin, int64_t ksize, int64_t stride,
                           ConvDir dir, Rng& rng) {
  if (dir == ConvDir::down) {
    const T stddev = T(std::sqrt(1.0 / double(cin * ksize * ksize)));
    return Tensor<T>::random_normal({cout, cin, ksize, ksize}, rng, stddev);
  }
  const T stddev = T(std::sqrt(double(stride * stride) / double(cin * ksize * ksize)));
  return Tensor<T>::random_normal({cin, cout, ksize, ksize}, rng, stddev);
}

template <typename T>
struct ConvLayer {
  std::string name;
  ConvDir dir = ConvDir::down;
  int64_t stride = 1;
  Parameter<T> kernel;
  Parameter<T> bias;

  ConvLayer() = default;
  ConvLayer(std::string n, int64_t cin, int64_t cout, int64_t ksize, int64_t s, ConvDir d,
            Rng& rng, T bias_init = T(0))
      : name(std::move(n)), dir(d), stride(s) {
    kernel = Parameter<T>::plain(name + ".kernel", init_conv_kernel<T>(cout, cin, ksize, s, d, rng));
    bias = Parameter<T>::plain(name + ".bias", Tensor<T>::full({cout}, bias_init));
  }

  Var<T> forward(const Var<T>& x) const {
    return conv2d(x, kernel.raw, bias.raw, stride, dir, name);
  }

  void collect(std::vector<Parameter<T>*>& out) {
    out.push_back(&kernel);
    out.push_back(&bias);
  }
};

// Generalized divisive normalization:
//   forward  out_i = in_i / sqrt(beta_i + sum_j gamma_ij in_j^2)
//   inverse  out_i = in_i * sqrt(beta_i + sum_j gamma_ij in_j^2)
// beta is lower-bounded at 1e-6, gamma at 0. The normalizer is a 1x1
// convolution over squared channels with beta as its bias.
template <typename T>
struct GdnLayer {
  std::string name;
  bool inverse = false;
  int64_t channels = 0;
  Parameter<T> beta;
  Parameter<T> gamma;

  static constexpr T beta_min = T(1e-6);

  GdnLayer() = default;
  GdnLayer(std::string n, int64_t c, bool inv) : name(std::move(n)), inverse(inv), channels(c) {
    beta = Parameter<T>::lower_bounded(name + ".beta", Tensor<T>::full({c}, T(1)), beta_min);
    Tensor<T> g({c, c});
    for (int64_t i = 0; i < c; ++i) g.at(i, i) = T(0.1);
    gamma = Parameter<T>::lower_bounded(name + ".gamma", std::move(g), T(0));
  }

  Var<T> forward(const Var<T>& x) const {
    if (x->value.dim(1) != channels)
      throw ConfigError(strfmt("%s: expected %lld channels, got %lld", name.c_str(),
                               (long long)channels, (long long)x->value.dim(1)));
    auto gamma_kernel = reshape(gamma.effective(), {channels, channels, 1, 1});
    auto norm_sq = conv2d(square(x), gamma_kernel, beta.effective(), 1, ConvDir::down, name);
    auto norm = sqrt_op(norm_sq);
    if (!norm->value.all_finite())
      throw NumericalError(name + ": non-finite normalizer");
    return inverse ? mul(x, norm) : div(x, norm);
  }

  void collect(std::vector<Parameter<T>*>& out) {
    out.push_back(&beta);
    out.push_back(&gamma);
  }
};

}  // namespace vic
