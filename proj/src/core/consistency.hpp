#pragma once

#include "core/nn_ops.hpp"

namespace himap {

// Pseudo element representation: softmax(w_ps)-weighted sum of the point-level
// intermediate representations within each element.
template <typename T>
Tensor<T> pseudo_element(const Tensor<T>& point_tap,  // [E, P, C]
                         const Tensor<T>& w_ps) {     // [P]
  return ops::axis1_weighted_sum(point_tap, ops::softmax(w_ps, 0));
}

// Point-element consistency loss: similarity matrix between the pseudo and
// actual element representations, scaled by 1/sqrt(C), squashed through a
// sigmoid and scored with BCE against the E x E identity target (same-element
// pairs positive, cross-element pairs negative). Mean over all E^2 entries.
template <typename T>
Tensor<T> consistency_loss(const Tensor<T>& pseudo_e,  // [E, C]
                           const Tensor<T>& elem_tap) {  // [E, C]
  using namespace ops;
  int e = pseudo_e.dim(0), c = pseudo_e.dim(1);
  Tensor<T> sim = matmul(pseudo_e, transpose2d(elem_tap));
  sim = mul_scalar(sim, static_cast<T>(1.0 / std::sqrt(double(c))));
  Tensor<T> target = Tensor<T>::zeros({e, e});
  for (int i = 0; i < e; ++i) target.ptr()[i * e + i] = T(1);
  return mean_all(bce_with_logits(sim, target));
}

}  // namespace himap
