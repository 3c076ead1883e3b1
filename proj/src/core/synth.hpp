#pragma once

#include <map>

#include "core/geometry.hpp"
#include "core/nn_ops.hpp"
#include "core/optim.hpp"
#include "core/rng.hpp"

namespace himap {

struct SynthConfig {
  uint64_t seed = 1;
  // per-class [min, max] element counts
  std::map<MapClass, std::pair<int, int>> counts = {
      {MapClass::pedestrian_crossing, {1, 2}},
      {MapClass::lane_divider, {1, 2}},
      {MapClass::road_boundary, {1, 2}},
  };
  int grid_h = 200;
  int grid_w = 100;
  double cell_size = 0.3;  // meters per BEV cell
  double noise_sigma = 0.1;
};

// Deterministic synthetic scene: smooth open polylines (2-5 control points,
// monotone in y) for dividers and boundaries, axis-aligned rectangles for
// pedestrian crossings, all inside the perception range.
Scene generate_scene(uint64_t scene_seed, const SynthConfig& cfg, const PerceptionRange& range,
                     int max_elements);

// Per-class occupancy raster of a scene: kNumMapClasses * H * W, values {0,1}.
std::vector<uint8_t> class_occupancy(const Scene& scene, int h, int w,
                                     const PerceptionRange& range);

// Stand-in BEV feature extractor: trainable per-cell linear projection of the
// class-occupancy raster, plus the fixed sinusoidal embedding and optional
// Gaussian noise. Returns an [H,W,C] tensor; differentiable through the
// projection parameters when bound into a graph.
template <typename T>
Tensor<T> encode_bev(const std::vector<uint8_t>& occupancy, int h, int w,
                     const Tensor<T>& proj_w,  // [3, C]
                     const Tensor<T>& proj_b,  // [C]
                     const Tensor<T>& sinus,   // [H, W, C] constant
                     double noise_sigma, uint64_t noise_seed) {
  using namespace ops;
  int c = proj_w.dim(1);
  int64_t cells = static_cast<int64_t>(h) * w;

  // occupancy as a constant [H*W, 3] tensor
  Tensor<T> occ = Tensor<T>::zeros({static_cast<int>(cells), kNumMapClasses});
  for (int64_t i = 0; i < cells; ++i)
    for (int k = 0; k < kNumMapClasses; ++k)
      occ.ptr()[i * kNumMapClasses + k] =
          static_cast<T>(occupancy[static_cast<size_t>(k) * cells + i]);

  Tensor<T> feat = matmul(occ, proj_w);                       // [HW, C]
  feat = add(feat, broadcast_leading(proj_b, static_cast<int>(cells)));
  feat = add(feat, reshape(sinus, {static_cast<int>(cells), c}));
  if (noise_sigma > 0.0) {
    Tensor<T> noise = Tensor<T>::zeros({static_cast<int>(cells), c});
    Rng rng(noise_seed, Rng::hash_name("bev-noise"));
    for (int64_t i = 0; i < noise.size(); ++i)
      noise.ptr()[i] = static_cast<T>(noise_sigma * rng.normal());
    feat = add(feat, noise);
  }
  return reshape(feat, {h, w, c});
}

}  // namespace himap
