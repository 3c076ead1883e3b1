#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <limits>
#include <numeric>

#include "core/matching.hpp"
#include "core/rng.hpp"

using namespace himap;

namespace {

// canonical total: assigned entries summed in row-index order
double row_order_total(const std::vector<double>& cost, const std::vector<int>& rowsol,
                       int cols) {
  double total = 0.0;
  for (size_t r = 0; r < rowsol.size(); ++r) {
    if (rowsol[r] >= 0) total += cost[r * static_cast<size_t>(cols) + rowsol[r]];
  }
  return total;
}

// exhaustive minimum over all injections of columns into rows; returns the
// best row -> col assignment
std::vector<int> brute_force_best(const std::vector<double>& cost, int rows, int cols) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> col_to_row(static_cast<size_t>(cols), -1), best_pick;
  std::function<void(int, uint64_t, double)> rec = [&](int c, uint64_t used, double acc) {
    if (acc >= best) return;
    if (c == cols) {
      best = acc;
      best_pick = col_to_row;
      return;
    }
    for (int r = 0; r < rows; ++r) {
      if (used & (1ull << r)) continue;
      col_to_row[static_cast<size_t>(c)] = r;
      rec(c + 1, used | (1ull << r), acc + cost[static_cast<size_t>(r) * cols + c]);
    }
  };
  rec(0, 0, 0.0);
  std::vector<int> rowsol(static_cast<size_t>(rows), -1);
  for (int c = 0; c < cols; ++c) rowsol[static_cast<size_t>(best_pick[static_cast<size_t>(c)])] = c;
  return rowsol;
}

GtElement simple_gt(int class_id, std::vector<Vec2> points, bool closed,
                    std::vector<uint8_t> raster = {}) {
  GtElement g;
  g.class_id = class_id;
  g.points = std::move(points);
  g.orderings = equivalent_orderings(static_cast<int>(g.points.size()), closed);
  g.raster = std::move(raster);
  return g;
}

}  // namespace

TEST_CASE("hungarian picks the diagonal optimum") {
  std::vector<double> cost{1, 2, 2, 1};
  double total = 0;
  auto sol = hungarian_solve(cost, 2, 2, &total);
  CHECK(sol[0] == 0);
  CHECK(sol[1] == 1);
  CHECK(total == 2.0);
}

TEST_CASE("hungarian picks the anti-diagonal optimum") {
  std::vector<double> cost{2, 1, 1, 2};
  double total = 0;
  auto sol = hungarian_solve(cost, 2, 2, &total);
  CHECK(sol[0] == 1);
  CHECK(sol[1] == 0);
  CHECK(total == 2.0);
}

TEST_CASE("hungarian equals brute force on random rectangular matrices") {
  for (uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng(seed, 21);
    int rows = 6, cols = 4;
    std::vector<double> cost(static_cast<size_t>(rows) * cols);
    for (double& v : cost) v = rng.uniform(0.0, 10.0);
    auto sol = hungarian_solve(cost, rows, cols, nullptr);
    // all columns matched exactly once
    std::vector<int> col_hits(static_cast<size_t>(cols), 0);
    for (int r = 0; r < rows; ++r)
      if (sol[static_cast<size_t>(r)] >= 0) col_hits[static_cast<size_t>(sol[static_cast<size_t>(r)])]++;
    for (int c = 0; c < cols; ++c) CHECK(col_hits[static_cast<size_t>(c)] == 1);
    auto oracle = brute_force_best(cost, rows, cols);
    CHECK(row_order_total(cost, sol, cols) == row_order_total(cost, oracle, cols));
  }
}

TEST_CASE("hungarian equals brute force on square matrices up to 7x7") {
  for (uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng(seed, 22);
    int n = 2 + static_cast<int>(seed % 6);  // 2..7
    std::vector<double> cost(static_cast<size_t>(n) * n);
    for (double& v : cost) v = rng.uniform(0.0, 5.0);
    auto sol = hungarian_solve(cost, n, n, nullptr);
    auto oracle = brute_force_best(cost, n, n);
    CHECK(row_order_total(cost, sol, n) == row_order_total(cost, oracle, n));
  }
}

TEST_CASE("scaling the cost matrix leaves the assignment unchanged") {
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed, 23);
    int rows = 5, cols = 5;
    std::vector<double> cost(static_cast<size_t>(rows) * cols);
    for (double& v : cost) v = rng.uniform(0.1, 9.0);
    std::vector<double> scaled = cost;
    for (double& v : scaled) v *= 7.5;
    auto s1 = hungarian_solve(cost, rows, cols, nullptr);
    auto s2 = hungarian_solve(scaled, rows, cols, nullptr);
    CHECK(s1 == s2);
  }
}

TEST_CASE("empty matrix yields an empty assignment") {
  CostMatrix cm;
  Assignment a = hungarian(cm);
  CHECK(a.pairs.empty());
  CHECK(a.unmatched_preds.empty());

  cm.rows = 3;
  cm.cols = 0;
  Assignment b = hungarian(cm);
  CHECK(b.pairs.empty());
  CHECK(b.unmatched_preds == std::vector<int>{0, 1, 2});
}

TEST_CASE("hungarian rejects non-finite costs") {
  std::vector<double> cost{1.0, std::numeric_limits<double>::infinity(), 2.0, 3.0};
  CHECK_THROWS_AS(hungarian_solve(cost, 2, 2, nullptr), Error);
}

TEST_CASE("perfect prediction has near-zero matching cost") {
  std::vector<Vec2> pts{{0.1, 0.2}, {0.3, 0.4}, {0.5, 0.6}, {0.7, 0.8}};
  std::vector<uint8_t> raster(64, 0);
  raster[10] = raster[11] = 1;

  GtElement gt = simple_gt(1, pts, false, raster);
  PredSnapshot pred;
  pred.class_probs = {1e-9, 1.0 - 1e-12, 1e-9};
  pred.points = pts;
  pred.mask_logits.assign(64, -40.0);
  pred.mask_logits[10] = pred.mask_logits[11] = 40.0;

  PairCost c = matching_cost(pred, gt, MatchWeights{});
  CHECK(c.total <= 1e-6);
  CHECK(c.class_term <= 1e-6);
  CHECK(c.point_term <= 1e-12);
  // the epsilon guard in the cosine keeps this slightly above zero
  CHECK(c.direction_term <= 1e-6);
  CHECK(c.mask_term <= 1e-6);
}

TEST_CASE("matching cost is invariant to reversing the GT point order") {
  Rng rng(31, 0);
  std::vector<Vec2> pts;
  for (int i = 0; i < 5; ++i) pts.push_back({rng.uniform(0, 1), rng.uniform(0, 1)});
  PredSnapshot pred;
  pred.class_probs = {0.3, 0.5, 0.2};
  for (int i = 0; i < 5; ++i) pred.points.push_back({rng.uniform(0, 1), rng.uniform(0, 1)});

  GtElement fwd = simple_gt(0, pts, false);
  std::vector<Vec2> reversed(pts.rbegin(), pts.rend());
  GtElement rev = simple_gt(0, reversed, false);

  PairCost c1 = matching_cost(pred, fwd, MatchWeights{});
  PairCost c2 = matching_cost(pred, rev, MatchWeights{});
  CHECK(c1.total == doctest::Approx(c2.total).epsilon(1e-12));
}

TEST_CASE("matching cost equals a scalar-loop oracle on a hand case") {
  // 1 pred vs 1 gt, two points, small mask
  PredSnapshot pred;
  pred.class_probs = {0.7, 0.2, 0.1};
  pred.points = {{0.2, 0.3}, {0.6, 0.9}};
  pred.mask_logits = {1.5, -0.5, 0.25, -2.0};

  GtElement gt = simple_gt(0, {{0.25, 0.35}, {0.5, 0.8}}, false, {1, 0, 1, 0});

  MatchWeights w;
  PairCost got = matching_cost(pred, gt, w);

  // oracle: forward ordering L1 = mean(|.20-.25|+|.30-.35|, |.60-.50|+|.90-.80|)
  double fwd_l1 = 0.5 * ((0.05 + 0.05) + (0.10 + 0.10));
  double rev_l1 = 0.5 * ((std::abs(0.2 - 0.5) + std::abs(0.3 - 0.8)) +
                         (std::abs(0.6 - 0.25) + std::abs(0.9 - 0.35)));
  double point = std::min(fwd_l1, rev_l1);
  CHECK(got.point_term == doctest::Approx(point).epsilon(1e-12));

  double prob = 0.7;
  double cls = 0.25 * std::pow(1 - prob, 2.0) * -std::log(prob);
  CHECK(got.class_term == doctest::Approx(cls).epsilon(1e-12));

  // direction: single edge; forward ordering wins the point term
  Vec2 pd{0.4, 0.6};
  Vec2 gd{0.25, 0.45};
  double plen = std::hypot(pd.x, pd.y), glen = std::hypot(gd.x, gd.y);
  double cosv = (pd.x * gd.x + pd.y * gd.y) / ((plen + 1e-8) * (glen + 1e-8));
  CHECK(got.direction_term == doctest::Approx(1.0 - cosv).epsilon(1e-9));

  // mask: mean stable BCE + dice with smoothing 1
  double bce = 0, inter = 0, psum = 0, ysum = 2;
  std::vector<double> y{1, 0, 1, 0};
  for (int i = 0; i < 4; ++i) {
    double z = pred.mask_logits[static_cast<size_t>(i)];
    bce += std::max(z, 0.0) - z * y[static_cast<size_t>(i)] + std::log1p(std::exp(-std::abs(z)));
    double p = 1.0 / (1.0 + std::exp(-z));
    inter += p * y[static_cast<size_t>(i)];
    psum += p;
  }
  bce /= 4;
  double dice = 1.0 - (2 * inter + 1) / (psum + ysum + 1);
  CHECK(got.mask_term == doctest::Approx(bce + dice).epsilon(1e-12));

  double total = w.cls * cls + w.point * point + w.direction * got.direction_term +
                 w.mask * got.mask_term;
  CHECK(got.total == doctest::Approx(total).epsilon(1e-12));
  CHECK(got.total ==
        doctest::Approx(got.class_term * w.cls + got.point_term * w.point +
                        got.direction_term * w.direction + got.mask_term * w.mask));
}

TEST_CASE("assignment covers every GT when G <= E and is injective") {
  Rng rng(41, 0);
  std::vector<PredSnapshot> preds(6);
  for (auto& p : preds) {
    p.class_probs = {rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)};
    for (int i = 0; i < 4; ++i) p.points.push_back({rng.uniform(0, 1), rng.uniform(0, 1)});
  }
  std::vector<GtElement> gts;
  for (int j = 0; j < 3; ++j) {
    std::vector<Vec2> pts;
    for (int i = 0; i < 4; ++i) pts.push_back({rng.uniform(0, 1), rng.uniform(0, 1)});
    gts.push_back(simple_gt(j % 3, pts, false));
  }
  Assignment a = hungarian(build_cost_matrix(preds, gts, MatchWeights{}));
  CHECK(a.pairs.size() == 3);
  CHECK(a.unmatched_preds.size() == 3);
  std::vector<int> seen_pred, seen_gt;
  for (const auto& pr : a.pairs) {
    seen_pred.push_back(pr.pred);
    seen_gt.push_back(pr.gt);
  }
  std::sort(seen_pred.begin(), seen_pred.end());
  std::sort(seen_gt.begin(), seen_gt.end());
  CHECK(std::unique(seen_pred.begin(), seen_pred.end()) == seen_pred.end());
  CHECK(seen_gt == std::vector<int>{0, 1, 2});
}
