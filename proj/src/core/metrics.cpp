#include "core/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

namespace himap {

namespace {

// Chamfer matrix between resampled predictions and GTs of one group.
std::vector<double> chamfer_matrix(const std::vector<MapElement>& preds,
                                   const std::vector<MapElement>& gts, int resample_n) {
  std::vector<std::vector<Vec2>> rp(preds.size()), rg(gts.size());
  for (size_t i = 0; i < preds.size(); ++i) rp[i] = resample(preds[i], resample_n);
  for (size_t j = 0; j < gts.size(); ++j) rg[j] = resample(gts[j], resample_n);
  auto directed = [](const std::vector<Vec2>& from, const std::vector<Vec2>& to) {
    double sum = 0.0;
    for (const Vec2& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec2& q : to) best = std::min(best, dist(p, q));
      sum += best;
    }
    return sum / static_cast<double>(from.size());
  };
  std::vector<double> m(preds.size() * gts.size());
  for (size_t i = 0; i < preds.size(); ++i)
    for (size_t j = 0; j < gts.size(); ++j)
      m[i * gts.size() + j] = 0.5 * (directed(rp[i], rg[j]) + directed(rg[j], rp[i]));
  return m;
}

// Greedy confidence-ordered assignment: row order is the confidence order.
std::vector<bool> greedy_tp(const std::vector<double>& chamfer, size_t num_preds,
                            size_t num_gts, double threshold) {
  std::vector<bool> flags(num_preds, false);
  std::vector<bool> claimed(num_gts, false);
  for (size_t i = 0; i < num_preds; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_j = -1;
    for (size_t j = 0; j < num_gts; ++j) {
      if (claimed[j]) continue;
      double d = chamfer[i * num_gts + j];
      if (d < best) {
        best = d;
        best_j = static_cast<int>(j);
      }
    }
    if (best_j >= 0 && best < threshold) {
      flags[i] = true;
      claimed[static_cast<size_t>(best_j)] = true;
    }
  }
  return flags;
}

}  // namespace

std::vector<bool> classify_tp(const std::vector<MapElement>& preds,
                              const std::vector<MapElement>& gts, double threshold,
                              int resample_n) {
  if (preds.empty()) return {};
  std::vector<double> m = chamfer_matrix(preds, gts, resample_n);
  return greedy_tp(m, preds.size(), gts.size(), threshold);
}

double average_precision(const std::vector<bool>& tp_flags,
                         const std::vector<double>& confidences, int num_gt) {
  if (tp_flags.size() != confidences.size()) {
    throw Error(ErrorKind::usage, "average_precision: flag/confidence size mismatch");
  }
  if (num_gt == 0) {
    if (tp_flags.empty()) return std::numeric_limits<double>::quiet_NaN();
    return 0.0;  // spurious detections against an empty class
  }
  if (tp_flags.empty()) return 0.0;

  std::vector<size_t> order(tp_flags.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return confidences[a] > confidences[b]; });

  std::vector<double> precision, recall;
  int tp = 0, fp = 0;
  for (size_t k = 0; k < order.size(); ++k) {
    if (tp_flags[order[k]]) ++tp; else ++fp;
    precision.push_back(static_cast<double>(tp) / (tp + fp));
    recall.push_back(static_cast<double>(tp) / num_gt);
  }

  // Area under the monotonized PR envelope (all-point interpolation).
  for (size_t k = precision.size(); k-- > 1;) {
    precision[k - 1] = std::max(precision[k - 1], precision[k]);
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (size_t k = 0; k < precision.size(); ++k) {
    ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return ap;
}

ApTable map_score(const std::map<int, std::vector<double>>& per_class_threshold_ap) {
  ApTable out;
  out.per_class = per_class_threshold_ap;
  double map_sum = 0.0;
  int map_count = 0;
  for (const auto& [cls, aps] : per_class_threshold_ap) {
    double sum = 0.0;
    int count = 0;
    for (double ap : aps) {
      if (!std::isnan(ap)) {
        sum += ap;
        ++count;
      }
    }
    if (count > 0) {
      double cap = sum / count;
      out.class_ap[cls] = cap;
      map_sum += cap;
      ++map_count;
    }
  }
  out.map = map_count > 0 ? map_sum / map_count : std::numeric_limits<double>::quiet_NaN();
  return out;
}

ApTable evaluate(const std::vector<DetectionRecord>& detections,
                 const std::map<std::string, Scene>& gt_scenes, const EvalConfig& cfg) {
  struct Group {
    std::vector<const DetectionRecord*> preds;  // sorted by confidence desc
    std::vector<const MapElement*> gts;
    std::vector<double> chamfer;
  };
  std::map<std::pair<std::string, int>, Group> groups;

  for (const auto& [id, scene] : gt_scenes) {
    for (const MapElement& e : scene.elements) {
      groups[{id, static_cast<int>(e.cls)}].gts.push_back(&e);
    }
  }
  for (const DetectionRecord& d : detections) {
    groups[{d.scene_id, static_cast<int>(d.cls)}].preds.push_back(&d);
  }
  for (auto& [key, g] : groups) {
    std::stable_sort(g.preds.begin(), g.preds.end(),
                     [](const DetectionRecord* a, const DetectionRecord* b) {
                       return a->confidence > b->confidence;
                     });
  }

  // Chamfer matrices, optionally in parallel over groups; merged results are
  // order-independent so the worker count does not affect the output.
  std::vector<Group*> work;
  for (auto& [key, g] : groups) {
    if (!g.preds.empty() && !g.gts.empty()) work.push_back(&g);
  }
  auto compute = [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
      Group& g = *work[i];
      std::vector<MapElement> pe, ge;
      for (auto* p : g.preds) pe.push_back(p->element);
      for (auto* e : g.gts) ge.push_back(*e);
      g.chamfer = chamfer_matrix(pe, ge, cfg.resample_n);
    }
  };
  int workers = std::max(1, cfg.workers);
  if (workers == 1 || work.size() <= 1) {
    compute(0, work.size());
  } else {
    std::vector<std::thread> threads;
    size_t per = (work.size() + workers - 1) / static_cast<size_t>(workers);
    for (size_t b = 0; b < work.size(); b += per) {
      threads.emplace_back(compute, b, std::min(b + per, work.size()));
    }
    for (auto& t : threads) t.join();
  }

  // num_gt per class across all scenes
  std::map<int, int> num_gt;
  for (const auto& [id, scene] : gt_scenes) {
    for (const MapElement& e : scene.elements) num_gt[static_cast<int>(e.cls)]++;
  }

  std::map<int, std::vector<double>> per_class;
  for (int cls = 0; cls < kNumMapClasses; ++cls) {
    std::vector<double> aps;
    for (double threshold : cfg.thresholds) {
      std::vector<bool> flags;
      std::vector<double> confs;
      for (auto& [key, g] : groups) {
        if (key.second != cls || g.preds.empty()) continue;
        std::vector<bool> f = g.gts.empty()
                                  ? std::vector<bool>(g.preds.size(), false)
                                  : greedy_tp(g.chamfer, g.preds.size(), g.gts.size(), threshold);
        for (size_t i = 0; i < g.preds.size(); ++i) {
          flags.push_back(f[i]);
          confs.push_back(g.preds[i]->confidence);
        }
      }
      aps.push_back(average_precision(flags, confs, num_gt.count(cls) ? num_gt[cls] : 0));
    }
    per_class[cls] = std::move(aps);
  }
  return map_score(per_class);
}

std::string format_report(const ApTable& table, const std::vector<double>& thresholds) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  for (const auto& [cls, aps] : table.per_class) {
    for (size_t t = 0; t < aps.size(); ++t) {
      os << "ap class=" << map_class_name(static_cast<MapClass>(cls))
         << " threshold=" << thresholds[t] << " ap=";
      if (std::isnan(aps[t])) os << "undefined";
      else os << aps[t];
      os << "\n";
    }
  }
  for (const auto& [cls, cap] : table.class_ap) {
    os << "class_ap class=" << map_class_name(static_cast<MapClass>(cls)) << " ap=" << cap << "\n";
  }
  os << "map value=";
  if (std::isnan(table.map)) os << "undefined";
  else os << table.map;
  os << "\n";
  return os.str();
}

}  // namespace himap
