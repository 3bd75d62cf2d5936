#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "vic/tensor.hpp"

namespace vic {

// Reverse-mode autodiff over a dynamically built DAG. Every forward op
// returns a Var; backward() walks the graph once in reverse topological
// order and accumulates gradients into the leaves.

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // allocated on first use
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(Node<T>&)> backprop;

  void ensure_grad() {
    if (grad.numel() != value.numel()) {
      grad = Tensor<T>(value.shape());
    }
  }
  void add_grad(const Tensor<T>& g) {
    ensure_grad();
    const T* src = g.data();
    T* dst = grad.data();
    for (int64_t i = 0, n = grad.numel(); i < n; ++i) dst[i] += src[i];
  }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
Var<T> make_leaf(Tensor<T> value, bool requires_grad = true) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

template <typename T>
Var<T> make_const(Tensor<T> value) {
  return make_leaf(std::move(value), false);
}

template <typename T>
Var<T> scalar_const(T v) {
  return make_const(Tensor<T>({1}, {v}));
}

namespace detail {

template <typename T>
Var<T> new_node(Tensor<T> value, std::vector<Var<T>> parents) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (auto& p : n->parents) n->requires_grad |= p->requires_grad;
  return n;
}

// Elementwise op with local derivative computed from the input value.
template <typename T, class Fwd, class Dfdx>
Var<T> unary_elementwise(const Var<T>& a, Fwd fwd, Dfdx dfdx) {
  Tensor<T> out(a->value.shape());
  const T* x = a->value.data();
  T* o = out.data();
  for (int64_t i = 0, n = out.numel(); i < n; ++i) o[i] = fwd(x[i]);
  auto node = new_node<T>(std::move(out), {a});
  if (node->requires_grad) {
    node->backprop = [a, dfdx](Node<T>& self) {
      if (!a->requires_grad) return;
      a->ensure_grad();
      const T* x = a->value.data();
      const T* y = self.value.data();
      const T* g = self.grad.data();
      T* ga = a->grad.data();
      for (int64_t i = 0, n = self.value.numel(); i < n; ++i)
        ga[i] += g[i] * dfdx(x[i], y[i]);
    };
  }
  return node;
}

template <typename T>
void check_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (!a->value.same_shape(b->value))
    throw ConfigError(std::string(op) + ": operand shapes differ");
}

}  // namespace detail

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::check_same_shape(a, b, "add");
  Tensor<T> out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + b->value[i];
  auto node = detail::new_node<T>(std::move(out), {a, b});
  if (node->requires_grad)
    node->backprop = [a, b](Node<T>& self) {
      if (a->requires_grad) a->add_grad(self.grad);
      if (b->requires_grad) b->add_grad(self.grad);
    };
  return node;
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::check_same_shape(a, b, "sub");
  Tensor<T> out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] - b->value[i];
  auto node = detail::new_node<T>(std::move(out), {a, b});
  if (node->requires_grad)
    node->backprop = [a, b](Node<T>& self) {
      if (a->requires_grad) a->add_grad(self.grad);
      if (b->requires_grad) {
        b->ensure_grad();
        for (int64_t i = 0; i < self.grad.numel(); ++i) b->grad[i] -= self.grad[i];
      }
    };
  return node;
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::check_same_shape(a, b, "mul");
  Tensor<T> out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * b->value[i];
  auto node = detail::new_node<T>(std::move(out), {a, b});
  if (node->requires_grad)
    node->backprop = [a, b](Node<T>& self) {
      if (a->requires_grad) {
        a->ensure_grad();
        for (int64_t i = 0; i < self.grad.numel(); ++i)
          a->grad[i] += self.grad[i] * b->value[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (int64_t i = 0; i < self.grad.numel(); ++i)
          b->grad[i] += self.grad[i] * a->value[i];
      }
    };
  return node;
}

template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b) {
  detail::check_same_shape(a, b, "div");
  Tensor<T> out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] / b->value[i];
  auto node = detail::new_node<T>(std::move(out), {a, b});
  if (node->requires_grad)
    node->backprop = [a, b](Node<T>& self) {
      if (a->requires_grad) {
        a->ensure_grad();
        for (int64_t i = 0; i < self.grad.numel(); ++i)
          a->grad[i] += self.grad[i] / b->value[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (int64_t i = 0; i < self.grad.numel(); ++i)
          b->grad[i] -= self.grad[i] * self.value[i] / b->value[i];
      }
    };
  return node;
}

template <typename T>
Var<T> add_const(const Var<T>& a, T c) {
  return detail::unary_elementwise(
      a, [c](T x) { return x + c; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> mul_const(const Var<T>& a, T c) {
  return detail::unary_elementwise(
      a, [c](T x) { return x * c; }, [c](T, T) { return c; });
}

// Elementwise multiply by a fixed tensor (no gradient into the tensor).
template <typename T>
Var<T> mul_tensor(const Var<T>& a, Tensor<T> m) {
  if (!a->value.same_shape(m)) throw ConfigError("mul_tensor: shape mismatch");
  auto mm = std::make_shared<Tensor<T>>(std::move(m));
  Tensor<T> out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * (*mm)[i];
  auto node = detail::new_node<T>(std::move(out), {a});
  if (node->requires_grad)
    node->backprop = [a, mm](Node<T>& self) {
      a->ensure_grad();
      for (int64_t i = 0; i < self.grad.numel(); ++i)
        a->grad[i] += self.grad[i] * (*mm)[i];
    };
  return node;
}

// Elementwise add of a fixed tensor (noise injection).
template <typename T>
Var<T> add_tensor(const Var<T>& a, Tensor<T> m) {
  if (!a->value.same_shape(m)) throw ConfigError("add_tensor: shape mismatch");
  Tensor<T> out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + m[i];
  auto node = detail::new_node<T>(std::move(out), {a});
  if (node->requires_grad)
    node->backprop = [a](Node<T>& self) { a->add_grad(self.grad); };
  return node;
}

template <typename T>
Var<T> neg(const Var<T>& a) {
  return mul_const(a, T(-1));
}

template <typename T>
Var<T> square(const Var<T>& a) {
  return detail::unary_elementwise(
      a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <typename T>
Var<T> sqrt_op(const Var<T>& a) {
  return detail::unary_elementwise(
      a, [](T x) { return std::sqrt(x); },
      [](T, T y) { return T(0.5) / y; });
}

template <typename T>
Var<T> exp_op(const Var<T>& a) {
  return detail::unary_elementwise(
      a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Var<T> log_op(const Var<T>& a) {
  return detail::unary_elementwise(
      a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <typename T>
Var<T> tanh_op(const Var<T>& a) {
  return detail::unary_elementwise(
      a, [](T x) { return std::tanh(x); },
      [](T, T y) { return T(1) - y * y; });
}

template <typename T>
T sigmoid_scalar(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
Var<T> sigmoid_op(const Var<T>& a) {
  return detail::unary_elementwise(
      a, [](T x) { return sigmoid_scalar(x); },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
T softplus_scalar(T x) {
  return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename T>
Var<T> softplus_op(const Var<T>& a) {
  return detail::unary_elementwise(
      a, [](T x) { return softplus_scalar(x); },
      [](T x, T) { return sigmoid_scalar(x); });
}

template <typename T>
Var<T> abs_op(const Var<T>& a) {
  return detail::unary_elementwise(
      a, [](T x) { return std::abs(x); },
      [](T x, T) { return x >= T(0) ? T(1) : T(-1); });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  return detail::unary_elementwise(
      a, [](T x) { return x > T(0) ? x : T(0); },
      [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

// max(x, c); gradient passes where x >= c.
template <typename T>
Var<T> clamp_min(const Var<T>& a, T c) {
  return detail::unary_elementwise(
      a, [c](T x) { return x > c ? x : c; },
      [c](T x, T) { return x >= c ? T(1) : T(0); });
}

// Standard normal CDF via erfc; accurate in both tails.
template <typename T>
T normal_cdf_scalar(T x) {
  return T(0.5) * std::erfc(-x * T(0.70710678118654752440));
}

template <typename T>
Var<T> normal_cdf_op(const Var<T>& a) {
  return detail::unary_elementwise(
      a, [](T x) { return normal_cdf_scalar(x); },
      [](T x, T) {
        return T(0.39894228040143267794) * std::exp(T(-0.5) * x * x);
      });
}

template <typename T>
Var<T> sum_all(const Var<T>& a) {
  T acc = 0;
  for (int64_t i = 0; i < a->value.numel(); ++i) acc += a->value[i];
  auto node = detail::new_node<T>(Tensor<T>({1}, {acc}), {a});
  if (node->requires_grad)
    node->backprop = [a](Node<T>& self) {
      a->ensure_grad();
      const T g = self.grad[0];
      for (int64_t i = 0; i < a->grad.numel(); ++i) a->grad[i] += g;
    };
  return node;
}

template <typename T>
Var<T> mean_all(const Var<T>& a) {
  return mul_const(sum_all(a), T(1) / T(a->value.numel()));
}

template <typename T>
Var<T> reshape(const Var<T>& a, std::vector<int64_t> shape) {
  Tensor<T> out = a->value.reshaped(std::move(shape));
  auto node = detail::new_node<T>(std::move(out), {a});
  if (node->requires_grad)
    node->backprop = [a](Node<T>& self) {
      a->ensure_grad();
      for (int64_t i = 0; i < self.grad.numel(); ++i) a->grad[i] += self.grad[i];
    };
  return node;
}

// Detached copy: same value, no gradient path.
template <typename T>
Var<T> stopgrad(const Var<T>& a) {
  return make_const(a->value);
}

template <typename T>
void backward(const Var<T>& loss) {
  if (loss->value.numel() != 1) throw UsageError("backward expects a scalar loss");
  if (!loss->requires_grad)
    throw UsageError("backward: loss does not depend on any trainable leaf");

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  struct Frame {
    Node<T>* node;
    size_t next_parent;
  };
  std::vector<Frame> stack{{loss.get(), 0}};
  seen.insert(loss.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      Node<T>* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  loss->ensure_grad();
  loss->grad.fill(T(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backprop && n->grad.numel() == n->value.numel()) n->backprop(*n);
  }
}

}  // namespace vic
