#pragma once

#include "core/consistency.hpp"
#include "core/decoder.hpp"
#include "core/matching.hpp"

namespace himap {

// Ground truth of one scene prepared for training: resampled points,
// orderings, rasters. Built once per scene and reused every step.
template <typename T>
struct SceneGroundTruth {
  std::vector<GtElement> elements;  // matching inputs (normalized points, rasters)
  Tensor<T> rasters;                // [G, HW] constant 0/1
  Tensor<T> union_raster;           // [HW] constant
  int grid_h = 0, grid_w = 0;
};

template <typename T>
SceneGroundTruth<T> prepare_ground_truth(const Scene& scene, const PerceptionRange& range,
                                         int points_per_element, int grid_h, int grid_w) {
  SceneGroundTruth<T> out;
  out.grid_h = grid_h;
  out.grid_w = grid_w;
  int64_t hw = static_cast<int64_t>(grid_h) * grid_w;
  int g = static_cast<int>(scene.elements.size());
  out.rasters = Tensor<T>::zeros({g, static_cast<int>(hw)});
  for (int i = 0; i < g; ++i) {
    const MapElement& e = scene.elements[static_cast<size_t>(i)];
    GtElement gt;
    gt.class_id = static_cast<int>(e.cls);
    std::vector<Vec2> rp = resample(e, points_per_element);
    gt.points.reserve(rp.size());
    for (Vec2 p : rp) gt.points.push_back(normalize_point(p, range));
    gt.orderings = equivalent_orderings(points_per_element, e.closed);
    gt.raster = rasterize(e, grid_h, grid_w, range);
    for (int64_t j = 0; j < hw; ++j)
      out.rasters.ptr()[i * hw + j] = static_cast<T>(gt.raster[static_cast<size_t>(j)]);
    out.elements.push_back(std::move(gt));
  }
  std::vector<uint8_t> uni = rasterize_union(scene.elements, grid_h, grid_w, range);
  out.union_raster = Tensor<T>::zeros({static_cast<int>(hw)});
  for (int64_t j = 0; j < hw; ++j) out.union_raster.ptr()[j] = static_cast<T>(uni[static_cast<size_t>(j)]);
  return out;
}

// Sigmoid focal classification loss over all E queries: matched queries
// target their GT class one-hot, unmatched queries target all zeros. The
// per-query focal terms are summed over classes and averaged over E.
template <typename T>
Tensor<T> focal_class_loss(const Tensor<T>& class_logits,  // [E, NC]
                           const Assignment& assignment,
                           const std::vector<GtElement>& gts, T gamma = T(2),
                           T alpha = T(0.25)) {
  using namespace ops;
  int e = class_logits.dim(0), nc = class_logits.dim(1);
  Tensor<T> target = Tensor<T>::zeros({e, nc});
  for (const auto& pr : assignment.pairs) {
    target.ptr()[static_cast<int64_t>(pr.pred) * nc +
                 gts[static_cast<size_t>(pr.gt)].class_id] = T(1);
  }
  Tensor<T> fl = focal_bce_with_logits(class_logits, target, gamma, alpha);
  return mul_scalar(reduce_sum_all(fl), T(1) / static_cast<T>(e));
}

// GT points for the matched pairs under the orderings chosen by matching.
template <typename T>
Tensor<T> matched_gt_points(const Assignment& assignment, const std::vector<GtElement>& gts) {
  int g = static_cast<int>(assignment.pairs.size());
  int p = g > 0 ? static_cast<int>(gts[static_cast<size_t>(assignment.pairs[0].gt)].points.size()) : 0;
  Tensor<T> out = Tensor<T>::zeros({g, p, 2});
  for (int i = 0; i < g; ++i) {
    const auto& pr = assignment.pairs[static_cast<size_t>(i)];
    const GtElement& gt = gts[static_cast<size_t>(pr.gt)];
    const auto& perm = gt.orderings[static_cast<size_t>(pr.ordering)];
    for (int j = 0; j < p; ++j) {
      Vec2 q = gt.points[static_cast<size_t>(perm[static_cast<size_t>(j)])];
      out.ptr()[(static_cast<int64_t>(i) * p + j) * 2 + 0] = static_cast<T>(q.x);
      out.ptr()[(static_cast<int64_t>(i) * p + j) * 2 + 1] = static_cast<T>(q.y);
    }
  }
  return out;
}

template <typename T>
Tensor<T> matched_pred_points(const Tensor<T>& points, const Assignment& assignment) {
  int p = points.dim(1);
  std::vector<int> rows;
  std::vector<std::vector<int>> identity;
  std::vector<int> id(static_cast<size_t>(p));
  for (int j = 0; j < p; ++j) id[static_cast<size_t>(j)] = j;
  for (const auto& pr : assignment.pairs) {
    rows.push_back(pr.pred);
    identity.push_back(id);
  }
  return ops::gather_points(points, rows, identity);
}

// Mean per-point L1 distance (|dx| + |dy|) in normalized coordinates over the
// matched pairs, under the matching-selected orderings.
template <typename T>
Tensor<T> point_loss(const Tensor<T>& points, const Assignment& assignment,
                     const std::vector<GtElement>& gts) {
  using namespace ops;
  if (assignment.pairs.empty()) return Tensor<T>::scalar(T(0));
  Tensor<T> pred = matched_pred_points(points, assignment);
  Tensor<T> gt = matched_gt_points<T>(assignment, gts);
  int g = pred.dim(0), p = pred.dim(1);
  Tensor<T> l1 = abs(sub(pred, gt));
  return mul_scalar(reduce_sum_all(l1), T(1) / static_cast<T>(g * p));
}

// Mean cosine dissimilarity (1 - cos) of consecutive-edge directions under
// the matching-selected orderings. GT edges shorter than 1e-12 are skipped.
template <typename T>
Tensor<T> direction_loss(const Tensor<T>& points, const Assignment& assignment,
                         const std::vector<GtElement>& gts) {
  using namespace ops;
  if (assignment.pairs.empty()) return Tensor<T>::scalar(T(0));
  Tensor<T> pred = matched_pred_points(points, assignment);
  int g = pred.dim(0), p = pred.dim(1);
  if (p < 2) return Tensor<T>::scalar(T(0));

  // constant unit GT directions and a validity mask for degenerate edges
  Tensor<T> gt_dir = Tensor<T>::zeros({g, p - 1, 2});
  Tensor<T> valid = Tensor<T>::zeros({g, p - 1});
  int valid_count = 0;
  for (int i = 0; i < g; ++i) {
    const auto& pr = assignment.pairs[static_cast<size_t>(i)];
    const GtElement& gt = gts[static_cast<size_t>(pr.gt)];
    const auto& perm = gt.orderings[static_cast<size_t>(pr.ordering)];
    for (int j = 0; j + 1 < p; ++j) {
      Vec2 a = gt.points[static_cast<size_t>(perm[static_cast<size_t>(j)])];
      Vec2 b = gt.points[static_cast<size_t>(perm[static_cast<size_t>(j + 1)])];
      Vec2 d = b - a;
      double len = std::hypot(d.x, d.y);
      if (len < 1e-12) continue;
      gt_dir.ptr()[(static_cast<int64_t>(i) * (p - 1) + j) * 2 + 0] = static_cast<T>(d.x / len);
      gt_dir.ptr()[(static_cast<int64_t>(i) * (p - 1) + j) * 2 + 1] = static_cast<T>(d.y / len);
      valid.ptr()[static_cast<int64_t>(i) * (p - 1) + j] = T(1);
      ++valid_count;
    }
  }
  if (valid_count == 0) return Tensor<T>::scalar(T(0));

  Tensor<T> edges = sub(slice(pred, 1, 1, p - 1), slice(pred, 1, 0, p - 1));  // [G, P-1, 2]
  Tensor<T> unit = l2_normalize(edges, T(1e-8));
  Tensor<T> cos = reduce_sum(mul(unit, gt_dir), 2);  // [G, P-1]
  // sum over valid edges of (1 - cos) = count - sum(cos * valid)
  Tensor<T> cos_sum = reduce_sum_all(mul(cos, valid));
  Tensor<T> loss = add_scalar(neg(cos_sum), static_cast<T>(valid_count));
  return mul_scalar(loss, T(1) / static_cast<T>(valid_count));
}

// Mean BCE plus dice loss (smoothing 1.0) of the matched mask logits against
// the rasterized GT masks.
template <typename T>
Tensor<T> mask_loss(const Tensor<T>& mask_logits,  // [E, HW]
                    const Assignment& assignment, const SceneGroundTruth<T>& gt) {
  using namespace ops;
  if (assignment.pairs.empty()) return Tensor<T>::scalar(T(0));
  std::vector<int> pred_rows, gt_rows;
  for (const auto& pr : assignment.pairs) {
    pred_rows.push_back(pr.pred);
    gt_rows.push_back(pr.gt);
  }
  Tensor<T> sel = gather_rows(mask_logits, pred_rows);          // [G, HW]
  Tensor<T> target = gather_rows(gt.rasters, gt_rows);          // constant
  int g = sel.dim(0);

  Tensor<T> bce = mean_all(bce_with_logits(sel, target));

  Tensor<T> prob = sigmoid(sel);
  Tensor<T> inter = reduce_sum(mul(prob, target), 1);  // [G]
  Tensor<T> psum = reduce_sum(prob, 1);
  Tensor<T> ysum = reduce_sum(target, 1);
  Tensor<T> dice = div(add_scalar(mul_scalar(inter, T(2)), T(1)),
                       add_scalar(add(psum, ysum), T(1)));
  Tensor<T> dice_loss = add_scalar(neg(mul_scalar(reduce_sum_all(dice), T(1) / static_cast<T>(g))),
                                   T(1));
  return add(bce, dice_loss);
}

// BCE of the per-cell segmentation logits against the union rasterization of
// all GT elements; applied once per scene on the encoder output.
template <typename T>
Tensor<T> bev_seg_loss(const Tensor<T>& seg_logits,  // [HW]
                       const SceneGroundTruth<T>& gt) {
  using namespace ops;
  return mean_all(bce_with_logits(seg_logits, gt.union_raster));
}

template <typename T>
struct LayerLossTerms {
  Tensor<T> cls, point, direction, mask, consistency;
};

struct LossBreakdown {
  double bev_seg = 0.0;
  double cls = 0.0;
  double point = 0.0;
  double direction = 0.0;
  double mask = 0.0;
  double consistency = 0.0;
  double total = 0.0;

  double weighted_sum(const LossWeights& w) const {
    return w.bev_seg * bev_seg + w.cls * cls + w.point * point + w.direction * direction +
           w.mask * mask + w.consistency * consistency;
  }
};

// Weighted total over all layers plus the BEV segmentation term (applied
// once). Per-term scalars are summed across layers in the breakdown.
template <typename T>
struct TotalLoss {
  Tensor<T> total;
  LossBreakdown breakdown;
};

template <typename T>
TotalLoss<T> total_loss(const std::vector<LayerLossTerms<T>>& layers, const Tensor<T>& bev_term,
                        const LossWeights& w) {
  using namespace ops;
  TotalLoss<T> out;
  Tensor<T> total = mul_scalar(bev_term, static_cast<T>(w.bev_seg));
  out.breakdown.bev_seg = static_cast<double>(bev_term.item());
  for (const auto& l : layers) {
    total = add(total, mul_scalar(l.cls, static_cast<T>(w.cls)));
    total = add(total, mul_scalar(l.point, static_cast<T>(w.point)));
    total = add(total, mul_scalar(l.direction, static_cast<T>(w.direction)));
    total = add(total, mul_scalar(l.mask, static_cast<T>(w.mask)));
    total = add(total, mul_scalar(l.consistency, static_cast<T>(w.consistency)));
    out.breakdown.cls += static_cast<double>(l.cls.item());
    out.breakdown.point += static_cast<double>(l.point.item());
    out.breakdown.direction += static_cast<double>(l.direction.item());
    out.breakdown.mask += static_cast<double>(l.mask.item());
    out.breakdown.consistency += static_cast<double>(l.consistency.item());
  }
  out.total = total;
  out.breakdown.total = static_cast<double>(total.item());
  return out;
}

}  // namespace himap
