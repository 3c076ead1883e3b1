#pragma once

#include <functional>
#include <vector>

#include "core/tensor.hpp"

namespace himap {

struct FdReport {
  double max_rel_err = 0.0;
  int64_t worst_input = -1;
  int64_t worst_coord = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Central-difference gradient check. `f` receives graph-bound leaves built
// from `inputs` and must return a scalar. Relative error uses the denominator
// max(|analytic|, |numeric|, 1e-8). 64-bit only.
inline FdReport fd_check(
    const std::function<Tensor<double>(Graph<double>&, const std::vector<Tensor<double>>&)>& f,
    const std::vector<Tensor<double>>& inputs, double h = 1e-5) {
  // Analytic gradients.
  Graph<double> g;
  std::vector<Tensor<double>> leaves;
  leaves.reserve(inputs.size());
  for (const auto& in : inputs) leaves.push_back(g.leaf(in));
  Tensor<double> loss = f(g, leaves);
  g.backward(loss);
  std::vector<std::vector<double>> analytic;
  for (const auto& leaf : leaves) {
    const std::vector<double>* gr = g.grad(leaf);
    analytic.push_back(gr ? *gr : std::vector<double>(static_cast<size_t>(leaf.size()), 0.0));
  }

  auto eval = [&](const std::vector<Tensor<double>>& xs) {
    Graph<double> g2;
    std::vector<Tensor<double>> ls;
    for (const auto& x : xs) ls.push_back(g2.leaf(x));
    return f(g2, ls).item();
  };

  FdReport rep;
  for (size_t ii = 0; ii < inputs.size(); ++ii) {
    for (int64_t j = 0; j < inputs[ii].size(); ++j) {
      std::vector<Tensor<double>> xs;
      for (const auto& in : inputs) {
        xs.push_back(Tensor<double>::from(in.shape, *in.data));  // deep copy
      }
      xs[ii].ptr()[j] += h;
      double fp = eval(xs);
      xs[ii].ptr()[j] -= 2 * h;
      double fm = eval(xs);
      double num = (fp - fm) / (2 * h);
      double ana = analytic[ii][static_cast<size_t>(j)];
      double denom = std::max({std::abs(ana), std::abs(num), 1e-8});
      double rel = std::abs(ana - num) / denom;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_input = static_cast<int64_t>(ii);
        rep.worst_coord = j;
        rep.analytic = ana;
        rep.numeric = num;
      }
    }
  }
  return rep;
}

}  // namespace himap
