#include "core/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace himap {

namespace {

double stable_sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// mean over cells of BCE(logit, target) in stable form
double mask_bce(const std::vector<double>& logits, const std::vector<uint8_t>& target) {
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    double z = logits[i];
    double y = target[i] ? 1.0 : 0.0;
    sum += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  return sum / static_cast<double>(logits.size());
}

double mask_dice_loss(const std::vector<double>& logits, const std::vector<uint8_t>& target,
                      double smooth = 1.0) {
  double inter = 0.0, psum = 0.0, ysum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    double p = stable_sigmoid(logits[i]);
    double y = target[i] ? 1.0 : 0.0;
    inter += p * y;
    psum += p;
    ysum += y;
  }
  return 1.0 - (2.0 * inter + smooth) / (psum + ysum + smooth);
}

}  // namespace

PairCost matching_cost(const PredSnapshot& pred, const GtElement& gt, const MatchWeights& w,
                       double focal_gamma, double focal_alpha) {
  size_t p = gt.points.size();
  if (pred.points.size() != p) {
    throw Error(ErrorKind::usage, "matching_cost: point count mismatch");
  }
  PairCost out;

  // Focal-style positive cost of the GT class probability: zero when certain.
  double prob = pred.class_probs[static_cast<size_t>(gt.class_id)];
  prob = std::clamp(prob, 1e-12, 1.0);
  out.class_term = focal_alpha * std::pow(1.0 - prob, focal_gamma) * (-std::log(prob));

  // Point term: min over equivalent orderings of mean per-point L1 distance.
  double best = std::numeric_limits<double>::infinity();
  int best_ord = 0;
  for (size_t oi = 0; oi < gt.orderings.size(); ++oi) {
    const auto& perm = gt.orderings[oi];
    double sum = 0.0;
    for (size_t j = 0; j < p; ++j) {
      Vec2 gp = gt.points[static_cast<size_t>(perm[j])];
      sum += std::abs(pred.points[j].x - gp.x) + std::abs(pred.points[j].y - gp.y);
    }
    double mean = sum / static_cast<double>(p);
    if (mean < best) {
      best = mean;
      best_ord = static_cast<int>(oi);
    }
  }
  out.point_term = best;
  out.ordering = best_ord;

  // Direction term under the minimizing ordering: mean (1 - cos) over edges,
  // skipping degenerate GT edges.
  const auto& perm = gt.orderings[static_cast<size_t>(best_ord)];
  double dir_sum = 0.0;
  int dir_count = 0;
  for (size_t j = 0; j + 1 < p; ++j) {
    Vec2 ga = gt.points[static_cast<size_t>(perm[j])];
    Vec2 gb = gt.points[static_cast<size_t>(perm[j + 1])];
    Vec2 gd = gb - ga;
    double glen = std::hypot(gd.x, gd.y);
    if (glen < 1e-12) continue;
    Vec2 pd = pred.points[j + 1] - pred.points[j];
    double plen = std::hypot(pd.x, pd.y);
    double cosv = (pd.x * gd.x + pd.y * gd.y) / ((plen + 1e-8) * (glen + 1e-8));
    dir_sum += 1.0 - cosv;
    ++dir_count;
  }
  out.direction_term = dir_count > 0 ? dir_sum / dir_count : 0.0;

  if (!pred.mask_logits.empty() && !gt.raster.empty()) {
    out.mask_term = mask_bce(pred.mask_logits, gt.raster) + mask_dice_loss(pred.mask_logits, gt.raster);
  }

  out.total = w.cls * out.class_term + w.point * out.point_term +
              w.direction * out.direction_term + w.mask * out.mask_term;
  return out;
}

CostMatrix build_cost_matrix(const std::vector<PredSnapshot>& preds,
                             const std::vector<GtElement>& gts, const MatchWeights& w) {
  CostMatrix cm;
  cm.rows = static_cast<int>(preds.size());
  cm.cols = static_cast<int>(gts.size());
  cm.entries.resize(static_cast<size_t>(cm.rows) * cm.cols);
  for (int r = 0; r < cm.rows; ++r)
    for (int c = 0; c < cm.cols; ++c)
      cm.entries[static_cast<size_t>(r) * cm.cols + c] =
          matching_cost(preds[static_cast<size_t>(r)], gts[static_cast<size_t>(c)], w);
  return cm;
}

std::vector<int> hungarian_solve(const std::vector<double>& cost, int rows, int cols,
                                 double* total_out) {
  if (rows == 0 || cols == 0) {
    if (total_out) *total_out = 0.0;
    return std::vector<int>(static_cast<size_t>(rows), -1);
  }
  if (cols > rows) throw Error(ErrorKind::usage, "hungarian: more columns than rows");
  for (double v : cost) {
    if (!std::isfinite(v)) throw Error(ErrorKind::usage, "hungarian: non-finite cost entry");
  }

  // Pad to square with a constant larger than any real entry so padded cells
  // are used only when unavoidable.
  int n = rows;
  double pad = 0.0;
  for (double v : cost) pad = std::max(pad, v);
  pad = pad + 1.0;
  auto at = [&](int r, int c) -> double {
    return c < cols ? cost[static_cast<size_t>(r) * cols + c] : pad;
  };

  // Jonker-Volgenant style augmenting path over rows in index order; row
  // order fixes tie-breaking deterministically.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<size_t>(n + 1), 0.0), v(static_cast<size_t>(n + 1), 0.0);
  std::vector<int> p(static_cast<size_t>(n + 1), 0), way(static_cast<size_t>(n + 1), 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(n + 1), inf);
    std::vector<char> used(static_cast<size_t>(n + 1), 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      int i0 = p[static_cast<size_t>(j0)], j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        double cur = at(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0);
  }

  std::vector<int> rowsol(static_cast<size_t>(rows), -1);
  for (int j = 1; j <= n; ++j) {
    int i = p[static_cast<size_t>(j)];
    if (i >= 1 && j - 1 < cols) rowsol[static_cast<size_t>(i - 1)] = j - 1;
  }
  if (total_out) {
    double total = 0.0;
    for (int r = 0; r < rows; ++r) {
      if (rowsol[static_cast<size_t>(r)] >= 0) {
        total += cost[static_cast<size_t>(r) * cols + rowsol[static_cast<size_t>(r)]];
      }
    }
    *total_out = total;
  }
  return rowsol;
}

Assignment hungarian(const CostMatrix& cost) {
  Assignment out;
  if (cost.rows == 0 || cost.cols == 0) {
    for (int r = 0; r < cost.rows; ++r) out.unmatched_preds.push_back(r);
    return out;
  }
  std::vector<double> raw(cost.entries.size());
  for (size_t i = 0; i < cost.entries.size(); ++i) raw[i] = cost.entries[i].total;
  std::vector<int> rowsol = hungarian_solve(raw, cost.rows, cost.cols, &out.total_cost);

  for (int r = 0; r < cost.rows; ++r) {
    int c = rowsol[static_cast<size_t>(r)];
    if (c >= 0) {
      out.pairs.push_back({r, c, cost.at(r, c).ordering});
    } else {
      out.unmatched_preds.push_back(r);
    }
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const Assignment::Pair& a, const Assignment::Pair& b) { return a.gt < b.gt; });
  return out;
}

}  // namespace himap
