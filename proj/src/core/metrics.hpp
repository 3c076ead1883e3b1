#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "core/geometry.hpp"

namespace himap {

inline const std::vector<double> kHardThresholds{0.2, 0.5, 1.0};
inline const std::vector<double> kEasyThresholds{0.5, 1.0, 1.5};

struct EvalConfig {
  std::vector<double> thresholds = kEasyThresholds;  // strictly increasing, meters
  PerceptionRange range;
  int resample_n = 100;
  int workers = 1;
};

struct DetectionRecord {
  std::string scene_id;
  MapClass cls = MapClass::lane_divider;
  double confidence = 0.0;  // in [0,1]
  MapElement element;       // meters
};

// Greedy TP/FP classification for one (scene, class) group at one threshold.
// Predictions must be sorted by descending confidence; each claims the
// nearest unclaimed GT if its chamfer distance is below the threshold.
std::vector<bool> classify_tp(const std::vector<MapElement>& preds,
                              const std::vector<MapElement>& gts, double threshold,
                              int resample_n = 100);

// All-point interpolated average precision. Flags/confidences are parallel;
// order does not need to be sorted. Returns NaN when num_gt == 0 and there
// are no detections (undefined, excluded from averages); 0 when num_gt == 0
// but spurious detections exist.
double average_precision(const std::vector<bool>& tp_flags,
                         const std::vector<double>& confidences, int num_gt);

struct ApTable {
  // ap[class][threshold_index]; NaN marks undefined cells
  std::map<int, std::vector<double>> per_class;
  std::map<int, double> class_ap;  // mean over thresholds
  double map = 0.0;                // mean over defined classes
};

// Class AP = mean over thresholds, mAP = mean over classes. NaN cells and
// fully-undefined classes are excluded from the averages.
ApTable map_score(const std::map<int, std::vector<double>>& per_class_threshold_ap);

// Full evaluation: chamfer-based greedy TP assignment per scene/class and
// threshold, AP over pooled detections, averaged into class AP and mAP.
ApTable evaluate(const std::vector<DetectionRecord>& detections,
                 const std::map<std::string, Scene>& gt_scenes, const EvalConfig& cfg);

// Structured text report: one record per line.
std::string format_report(const ApTable& table, const std::vector<double>& thresholds);

}  // namespace himap
