#pragma once

#include <vector>

#include "core/geometry.hpp"

namespace himap {

struct MatchWeights {
  double cls = 2.0;
  double point = 5.0;
  double direction = 0.005;
  double mask = 2.0;
};

struct PairCost {
  double total = 0.0;
  double class_term = 0.0;
  double point_term = 0.0;
  double direction_term = 0.0;
  double mask_term = 0.0;
  int ordering = 0;  // index into the GT's equivalent orderings
};

// Ground-truth element prepared for matching: resampled to P points in
// normalized coordinates, with its equivalent orderings and raster mask.
struct GtElement {
  int class_id = 0;
  std::vector<Vec2> points;                 // P points, normalized [0,1]^2
  std::vector<std::vector<int>> orderings;  // index permutations
  std::vector<uint8_t> raster;              // H*W binary
};

// One prediction's values snapshot (no graph involvement).
struct PredSnapshot {
  std::vector<double> class_probs;  // num_classes, sigmoid applied
  std::vector<Vec2> points;         // P points, normalized
  std::vector<double> mask_logits;  // H*W
};

// Integrated matching cost between one prediction and one GT element:
//   class:     focal-style negative quality of the GT class probability
//   point:     min over equivalent orderings of mean per-point L1
//   direction: mean cosine dissimilarity of consecutive edges, same ordering
//   mask:      mean BCE + dice loss of mask logits vs the GT raster
// All terms are nonnegative; total = weighted sum.
PairCost matching_cost(const PredSnapshot& pred, const GtElement& gt, const MatchWeights& w,
                       double focal_gamma = 2.0, double focal_alpha = 0.25);

struct CostMatrix {
  int rows = 0;  // predictions
  int cols = 0;  // GT elements
  std::vector<PairCost> entries;  // row-major

  const PairCost& at(int r, int c) const { return entries[static_cast<size_t>(r) * cols + c]; }
};

CostMatrix build_cost_matrix(const std::vector<PredSnapshot>& preds,
                             const std::vector<GtElement>& gts, const MatchWeights& w);

struct Assignment {
  struct Pair {
    int pred = -1;
    int gt = -1;
    int ordering = 0;
  };
  std::vector<Pair> pairs;           // sorted by gt index
  std::vector<int> unmatched_preds;  // ascending
  double total_cost = 0.0;
};

// Minimum-cost assignment of predictions (rows) to GTs (cols), G <= E.
// Rectangular matrices are padded with a constant exceeding any real entry,
// so every GT column is matched. O(n^3) augmenting-path implementation.
Assignment hungarian(const CostMatrix& cost);

// Plain solver on a raw matrix; returns row -> col (-1 when unassigned) and
// the total over real columns. Exposed for testing.
std::vector<int> hungarian_solve(const std::vector<double>& cost, int rows, int cols,
                                 double* total_out);

}  // namespace himap
