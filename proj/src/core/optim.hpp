#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace himap {

// Named parameter tensors with per-parameter AdamW state. Iteration order is
// the (sorted) name order, which keeps initialization, updates, and
// checkpoints deterministic.
template <typename T>
class ParamStore {
 public:
  struct Param {
    std::vector<int> shape;
    std::shared_ptr<std::vector<T>> value;
    std::vector<T> grad;
    bool has_grad = false;
    std::vector<T> m, v;  // Adam moments, zero-initialized
    int64_t step = 0;
  };

  Tensor<T> create(const std::string& name, std::vector<int> shape,
                   const std::function<T(Rng&)>& init, uint64_t seed) {
    if (params_.count(name)) throw Error(ErrorKind::internal, "duplicate parameter " + name);
    Param p;
    p.shape = shape;
    int64_t n = Tensor<T>::numel(shape);
    p.value = std::make_shared<std::vector<T>>(static_cast<size_t>(n));
    Rng rng = derive_rng(seed, "param/" + name);
    for (auto& v : *p.value) v = init(rng);
    p.m.assign(static_cast<size_t>(n), T(0));
    p.v.assign(static_cast<size_t>(n), T(0));
    params_[name] = std::move(p);
    return tensor(name);
  }

  bool has(const std::string& name) const { return params_.count(name) > 0; }

  // Untracked tensor view sharing the parameter's storage.
  Tensor<T> tensor(const std::string& name) {
    Param& p = at(name);
    Tensor<T> t;
    t.shape = p.shape;
    t.data = p.value;
    return t;
  }

  // Graph leaf sharing the parameter's storage; remembers the node so
  // pull_grads can fetch the gradient after backward(). Binding the same
  // name again on the same graph returns the existing leaf, so gradients
  // accumulate on a single node no matter how many forwards reuse it.
  Tensor<T> bind(Graph<T>& g, const std::string& name) {
    Param& p = at(name);
    auto it = bound_.find(name);
    if (it != bound_.end() && it->second.first == &g) {
      Tensor<T> t;
      t.shape = p.shape;
      t.data = p.value;
      t.graph = &g;
      t.node = it->second.second;
      return t;
    }
    Tensor<T> t = g.leaf(tensor(name));
    bound_[name] = {&g, t.node};
    return t;
  }

  void pull_grads(Graph<T>& g) {
    for (auto& [name, binding] : bound_) {
      if (binding.first != &g) continue;
      Param& p = at(name);
      const auto& buf = g.grad_buf(binding.second);
      p.grad = buf;
      p.has_grad = true;
    }
    bound_.clear();
  }

  void zero_grads() {
    for (auto& [name, p] : params_) {
      p.grad.clear();
      p.has_grad = false;
    }
    bound_.clear();
  }

  // Global gradient-norm clipping; returns the pre-clip norm.
  double clip_grad_norm(double max_norm) {
    double sq = 0.0;
    for (auto& [name, p] : params_) {
      if (!p.has_grad) continue;
      for (T gv : p.grad) sq += static_cast<double>(gv) * static_cast<double>(gv);
    }
    double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
      T scale = static_cast<T>(max_norm / norm);
      for (auto& [name, p] : params_) {
        if (!p.has_grad) continue;
        for (T& gv : p.grad) gv *= scale;
      }
    }
    return norm;
  }

  // Decoupled-weight-decay Adam step. Parameters without a gradient are
  // skipped entirely and returned by name.
  std::vector<std::string> adamw_step(double lr, double weight_decay, double beta1 = 0.9,
                                      double beta2 = 0.999, double eps = 1e-8) {
    std::vector<std::string> skipped;
    for (auto& [name, p] : params_) {
      if (!p.has_grad) {
        skipped.push_back(name);
        continue;
      }
      p.step += 1;
      double bc1 = 1.0 - std::pow(beta1, static_cast<double>(p.step));
      double bc2 = 1.0 - std::pow(beta2, static_cast<double>(p.step));
      auto& val = *p.value;
      for (size_t i = 0; i < val.size(); ++i) {
        double gv = static_cast<double>(p.grad[i]);
        double m = beta1 * static_cast<double>(p.m[i]) + (1.0 - beta1) * gv;
        double v = beta2 * static_cast<double>(p.v[i]) + (1.0 - beta2) * gv * gv;
        p.m[i] = static_cast<T>(m);
        p.v[i] = static_cast<T>(v);
        double mhat = m / bc1;
        double vhat = v / bc2;
        double x = static_cast<double>(val[i]);
        x -= lr * weight_decay * x;  // decoupled decay
        x -= lr * mhat / (std::sqrt(vhat) + eps);
        val[i] = static_cast<T>(x);
      }
    }
    return skipped;
  }

  const std::map<std::string, Param>& params() const { return params_; }
  std::map<std::string, Param>& params() { return params_; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [name, p] : params_) out.push_back(name);
    return out;
  }

  int64_t total_scalars() const {
    int64_t n = 0;
    for (const auto& [name, p] : params_) n += static_cast<int64_t>(p.value->size());
    return n;
  }

 private:
  Param& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error(ErrorKind::internal, "unknown parameter " + name);
    return it->second;
  }

  std::map<std::string, Param> params_;
  std::map<std::string, std::pair<Graph<T>*, int>> bound_;
};

// min_lr + 0.5 * (base_lr - min_lr) * (1 + cos(pi * step / total_steps))
inline double cosine_lr(int64_t step, int64_t total_steps, double base_lr, double min_lr) {
  if (total_steps <= 0) throw Error(ErrorKind::usage, "cosine_lr: total_steps must be positive");
  if (step < 0 || step > total_steps) throw Error(ErrorKind::usage, "cosine_lr: step out of range");
  double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return min_lr + 0.5 * (base_lr - min_lr) * (1.0 + std::cos(3.141592653589793 * t));
}

}  // namespace himap
