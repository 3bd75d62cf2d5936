#pragma once

#include <string>

#include "vic/graph.hpp"

namespace vic {

// Strided 2-d convolutions with zero same-padding, NCHW layout.
//
// Down-direction: out extents = in extents / stride (extents must divide).
// Up-direction is defined as the exact adjoint of the down-direction with
// the same kernel, which makes <conv_down(x), y> == <x, conv_up(y)> hold by
// construction and gives transposed-convolution upsampling.
//
// Kernel layout: [P, Q, kh, kw]. Down maps Q channels -> P channels;
// up maps P channels -> Q channels.

namespace detail {

template <typename T>
Tensor<T> conv_down_fwd(const Tensor<T>& x, const Tensor<T>& k, const Tensor<T>* bias,
                        int64_t s) {
  const int64_t n = x.dim(0), q = x.dim(1), hs = x.dim(2), ws = x.dim(3);
  const int64_t p = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const int64_t h = hs / s, w = ws / s;
  const int64_t pt = (kh - 1) / 2, pl = (kw - 1) / 2;
  Tensor<T> out({n, p, h, w});
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t in = 0; in < n; ++in)
    for (int64_t op = 0; op < p; ++op) {
      const T b = bias ? (*bias)[op] : T(0);
      for (int64_t oy = 0; oy < h; ++oy)
        for (int64_t ox = 0; ox < w; ++ox) {
          T acc = b;
          for (int64_t iq = 0; iq < q; ++iq)
            for (int64_t dy = 0; dy < kh; ++dy) {
              const int64_t iy = oy * s + dy - pt;
              if (iy < 0 || iy >= hs) continue;
              const T* xrow = &x.at(in, iq, iy, 0);
              const T* krow = &k.at(op, iq, dy, 0);
              for (int64_t dx = 0; dx < kw; ++dx) {
                const int64_t ix = ox * s + dx - pl;
                if (ix < 0 || ix >= ws) continue;
                acc += xrow[ix] * krow[dx];
              }
            }
          out.at(in, op, oy, ox) = acc;
        }
    }
  return out;
}

template <typename T>
Tensor<T> conv_up_fwd(const Tensor<T>& y, const Tensor<T>& k, const Tensor<T>* bias,
                      int64_t s) {
  const int64_t n = y.dim(0), p = y.dim(1), h = y.dim(2), w = y.dim(3);
  const int64_t q = k.dim(1), kh = k.dim(2), kw = k.dim(3);
  const int64_t hs = h * s, ws = w * s;
  const int64_t pt = (kh - 1) / 2, pl = (kw - 1) / 2;
  Tensor<T> out({n, q, hs, ws});
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t in = 0; in < n; ++in)
    for (int64_t iq = 0; iq < q; ++iq) {
      const T b = bias ? (*bias)[iq] : T(0);
      for (int64_t iy = 0; iy < hs; ++iy)
        for (int64_t ix = 0; ix < ws; ++ix) {
          T acc = b;
          for (int64_t dy = 0; dy < kh; ++dy) {
            const int64_t ty = iy + pt - dy;
            if (ty < 0 || ty % s != 0) continue;
            const int64_t oy = ty / s;
            if (oy >= h) continue;
            for (int64_t dx = 0; dx < kw; ++dx) {
              const int64_t tx = ix + pl - dx;
              if (tx < 0 || tx % s != 0) continue;
              const int64_t ox = tx / s;
              if (ox >= w) continue;
              for (int64_t ip = 0; ip < p; ++ip)
                acc += y.at(in, ip, oy, ox) * k.at(ip, iq, dy, dx);
            }
          }
          out.at(in, iq, iy, ix) = acc;
        }
    }
  return out;
}

// d(conv_down)/d(kernel): correlate the strided input against the output
// gradient. Also serves as the kernel gradient of conv_up with the roles of
// the two activations swapped.
template <typename T>
Tensor<T> corr_kernel(const Tensor<T>& out_side, const Tensor<T>& in_side, int64_t s,
                      int64_t kh, int64_t kw) {
  const int64_t n = out_side.dim(0), p = out_side.dim(1);
  const int64_t h = out_side.dim(2), w = out_side.dim(3);
  const int64_t q = in_side.dim(1), hs = in_side.dim(2), ws = in_side.dim(3);
  const int64_t pt = (kh - 1) / 2, pl = (kw - 1) / 2;
  Tensor<T> dk({p, q, kh, kw});
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t op = 0; op < p; ++op)
    for (int64_t iq = 0; iq < q; ++iq)
      for (int64_t dy = 0; dy < kh; ++dy)
        for (int64_t dx = 0; dx < kw; ++dx) {
          T acc = 0;
          for (int64_t in = 0; in < n; ++in)
            for (int64_t oy = 0; oy < h; ++oy) {
              const int64_t iy = oy * s + dy - pt;
              if (iy < 0 || iy >= hs) continue;
              for (int64_t ox = 0; ox < w; ++ox) {
                const int64_t ix = ox * s + dx - pl;
                if (ix < 0 || ix >= ws) continue;
                acc += out_side.at(in, op, oy, ox) * in_side.at(in, iq, iy, ix);
              }
            }
          dk.at(op, iq, dy, dx) = acc;
        }
  return dk;
}

template <typename T>
Tensor<T> sum_nhw(const Tensor<T>& g) {
  const int64_t n = g.dim(0), c = g.dim(1), h = g.dim(2), w = g.dim(3);
  Tensor<T> out({c});
  for (int64_t in = 0; in < n; ++in)
    for (int64_t ic = 0; ic < c; ++ic) {
      T acc = 0;
      for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) acc += g.at(in, ic, y, x);
      out[ic] += acc;
    }
  return out;
}

}  // namespace detail

enum class ConvDir { down, up };

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& kernel, const Var<T>& bias, int64_t stride,
              ConvDir dir, const std::string& layer_name = "conv") {
  if (x->value.rank() != 4 || kernel->value.rank() != 4)
    throw ConfigError(layer_name + ": conv2d expects 4-d input and kernel");
  const auto& k = kernel->value;
  const int64_t cin_expected = dir == ConvDir::down ? k.dim(1) : k.dim(0);
  const int64_t cout = dir == ConvDir::down ? k.dim(0) : k.dim(1);
  if (x->value.dim(1) != cin_expected)
    throw ConfigError(strfmt("%s: input has %lld channels, kernel expects %lld",
                             layer_name.c_str(), (long long)x->value.dim(1),
                             (long long)cin_expected));
  if (bias && bias->value.numel() != cout)
    throw ConfigError(layer_name + ": bias length does not match output channels");
  if (dir == ConvDir::down &&
      (x->value.dim(2) % stride != 0 || x->value.dim(3) % stride != 0))
    throw ConfigError(layer_name + ": spatial extents not divisible by stride");

  Tensor<T> out = dir == ConvDir::down
                      ? detail::conv_down_fwd(x->value, k, bias ? &bias->value : nullptr, stride)
                      : detail::conv_up_fwd(x->value, k, bias ? &bias->value : nullptr, stride);

  std::vector<Var<T>> parents{x, kernel};
  if (bias) parents.push_back(bias);
  auto node = detail::new_node<T>(std::move(out), std::move(parents));
  if (node->requires_grad) {
    node->backprop = [x, kernel, bias, stride, dir](Node<T>& self) {
      const Tensor<T>& g = self.grad;
      if (x->requires_grad) {
        Tensor<T> dx = dir == ConvDir::down
                           ? detail::conv_up_fwd(g, kernel->value, (const Tensor<T>*)nullptr, stride)
                           : detail::conv_down_fwd(g, kernel->value, (const Tensor<T>*)nullptr, stride);
        x->add_grad(dx);
      }
      if (kernel->requires_grad) {
        Tensor<T> dk = dir == ConvDir::down
                           ? detail::corr_kernel(g, x->value, stride, kernel->value.dim(2),
                                                 kernel->value.dim(3))
                           : detail::corr_kernel(x->value, g, stride, kernel->value.dim(2),
                                                 kernel->value.dim(3));
        kernel->add_grad(dk);
      }
      if (bias && bias->requires_grad) bias->add_grad(detail::sum_nhw(g));
    };
  }
  return node;
}

// Per-channel convolution with a fixed (non-trainable) kernel, valid
// padding. Used by the MS-SSIM window and the 2x2 average pool.
template <typename T>
Var<T> depthwise_valid(const Var<T>& x, Tensor<T> kern2d, int64_t stride) {
  const int64_t n = x->value.dim(0), c = x->value.dim(1);
  const int64_t h = x->value.dim(2), w = x->value.dim(3);
  const int64_t kh = kern2d.dim(0), kw = kern2d.dim(1);
  if (h < kh || w < kw) throw ConfigError("depthwise_valid: window larger than input");
  const int64_t oh = (h - kh) / stride + 1, ow = (w - kw) / stride + 1;
  auto kp = std::make_shared<Tensor<T>>(std::move(kern2d));
  Tensor<T> out({n, c, oh, ow});
  for (int64_t in = 0; in < n; ++in)
    for (int64_t ic = 0; ic < c; ++ic)
      for (int64_t oy = 0; oy < oh; ++oy)
        for (int64_t ox = 0; ox < ow; ++ox) {
          T acc = 0;
          for (int64_t dy = 0; dy < kh; ++dy) {
            const T* xrow = &x->value.at(in, ic, oy * stride + dy, 0);
            const T* krow = &kp->at(dy, 0);
            for (int64_t dx = 0; dx < kw; ++dx) acc += xrow[ox * stride + dx] * krow[dx];
          }
          out.at(in, ic, oy, ox) = acc;
        }
  auto node = detail::new_node<T>(std::move(out), {x});
  if (node->requires_grad) {
    node->backprop = [x, kp, stride](Node<T>& self) {
      x->ensure_grad();
      const Tensor<T>& g = self.grad;
      const int64_t n = g.dim(0), c = g.dim(1), oh = g.dim(2), ow = g.dim(3);
      const int64_t kh = kp->dim(0), kw = kp->dim(1);
      for (int64_t in = 0; in < n; ++in)
        for (int64_t ic = 0; ic < c; ++ic)
          for (int64_t oy = 0; oy < oh; ++oy)
            for (int64_t ox = 0; ox < ow; ++ox) {
              const T gv = g.at(in, ic, oy, ox);
              for (int64_t dy = 0; dy < kh; ++dy)
                for (int64_t dx = 0; dx < kw; ++dx)
                  x->grad.at(in, ic, oy * stride + dy, ox * stride + dx) +=
                      gv * kp->at(dy, dx);
            }
    };
  }
  return node;
}

template <typename T>
Var<T> avg_pool2(const Var<T>& x) {
  Tensor<T> box({2, 2});
  box.fill(T(0.25));
  return depthwise_valid(x, std::move(box), 2);
}

}  // namespace vic
