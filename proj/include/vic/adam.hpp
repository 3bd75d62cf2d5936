#pragma once

#include <unordered_map>
#include <vector>

#include "vic/layers.hpp"

namespace vic {

// Adam with bias correction. Updates act on the unconstrained pre-images;
// lower-bounded parameters are projected back above their floor after each
// step.
template <typename T>
class Adam {
 public:
  explicit Adam(T lr = T(1e-4), T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  int64_t step_count() const { return step_; }
  T learning_rate() const { return lr_; }

  void zero_grad(const std::vector<Parameter<T>*>& params) {
    for (auto* p : params) p->zero_grad();
  }

  void step(const std::vector<Parameter<T>*>& params) {
    ++step_;
    const T bc1 = T(1) - std::pow(beta1_, T(step_));
    const T bc2 = T(1) - std::pow(beta2_, T(step_));
    for (auto* p : params) {
      Slot& s = slot(*p);
      Tensor<T>& v = p->value();
      p->raw->ensure_grad();
      const Tensor<T>& g = p->raw->grad;
      const T floor = p->tag == Reparam::lower_bounded ? p->raw_floor() : T(0);
      for (int64_t i = 0; i < v.numel(); ++i) {
        s.m[i] = beta1_ * s.m[i] + (T(1) - beta1_) * g[i];
        s.v[i] = beta2_ * s.v[i] + (T(1) - beta2_) * g[i] * g[i];
        const T mhat = s.m[i] / bc1;
        const T vhat = s.v[i] / bc2;
        v[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        if (p->tag == Reparam::lower_bounded && v[i] < floor) v[i] = floor;
      }
    }
  }

 private:
  struct Slot {
    Tensor<T> m, v;
  };

  Slot& slot(Parameter<T>& p) {
    auto it = slots_.find(p.raw.get());
    if (it == slots_.end()) {
      Slot s{Tensor<T>(p.value().shape()), Tensor<T>(p.value().shape())};
      it = slots_.emplace(p.raw.get(), std::move(s)).first;
    }
    return it->second;
  }

  T lr_, beta1_, beta2_, eps_;
  int64_t step_ = 0;
  std::unordered_map<Node<T>*, Slot> slots_;
};

}  // namespace vic
