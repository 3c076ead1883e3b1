#include "core/synth.hpp"

#include <algorithm>

namespace himap {

namespace {

// Smooth open polyline through 2-5 control points with strictly increasing y.
MapElement make_polyline(Rng& rng, MapClass cls, const PerceptionRange& range, double margin) {
  int n = rng.uniform_int(2, 5);
  double y_lo = range.y_min + margin;
  double y_hi = range.y_max - margin;
  double x_lo = range.x_min + margin;
  double x_hi = range.x_max - margin;

  // y positions: sorted draws with a minimum span to avoid degenerate curves
  std::vector<double> ys(static_cast<size_t>(n));
  double span = (y_hi - y_lo) * rng.uniform(0.5, 1.0);
  double y0 = rng.uniform(y_lo, y_hi - span);
  for (int i = 0; i < n; ++i) ys[static_cast<size_t>(i)] = y0 + span * i / (n - 1);

  // x: bounded random walk keeps the curve smooth
  MapElement e;
  e.cls = cls;
  e.closed = false;
  double x = rng.uniform(x_lo, x_hi);
  double max_step = (x_hi - x_lo) * 0.25;
  for (int i = 0; i < n; ++i) {
    e.points.push_back({std::clamp(x, x_lo, x_hi), ys[static_cast<size_t>(i)]});
    x += rng.uniform(-max_step, max_step);
  }
  return e;
}

MapElement make_rectangle(Rng& rng, const PerceptionRange& range, double margin) {
  double min_w = range.width() * 0.1;
  double max_w = range.width() * 0.3;
  double min_h = range.height() * 0.05;
  double max_h = range.height() * 0.2;
  double w = rng.uniform(min_w, max_w);
  double h = rng.uniform(min_h, max_h);
  double cx = rng.uniform(range.x_min + margin + w / 2, range.x_max - margin - w / 2);
  double cy = rng.uniform(range.y_min + margin + h / 2, range.y_max - margin - h / 2);
  MapElement e;
  e.cls = MapClass::pedestrian_crossing;
  e.closed = true;
  e.points = {{cx - w / 2, cy - h / 2},
              {cx + w / 2, cy - h / 2},
              {cx + w / 2, cy + h / 2},
              {cx - w / 2, cy + h / 2}};
  return e;
}

}  // namespace

Scene generate_scene(uint64_t scene_seed, const SynthConfig& cfg, const PerceptionRange& range,
                     int max_elements) {
  if (!range.valid()) throw Error(ErrorKind::usage, "generate_scene: invalid range");
  Rng rng(cfg.seed, Rng::mix(scene_seed) ^ Rng::hash_name("scene-gen"));
  double margin = 0.02 * std::min(range.width(), range.height());

  Scene scene;
  for (auto cls : {MapClass::pedestrian_crossing, MapClass::lane_divider,
                   MapClass::road_boundary}) {
    auto it = cfg.counts.find(cls);
    if (it == cfg.counts.end()) continue;
    int count = rng.uniform_int(it->second.first, it->second.second);
    for (int i = 0; i < count; ++i) {
      if (static_cast<int>(scene.elements.size()) >= max_elements) break;
      if (cls == MapClass::pedestrian_crossing) {
        scene.elements.push_back(make_rectangle(rng, range, margin));
      } else {
        scene.elements.push_back(make_polyline(rng, cls, range, margin));
      }
    }
  }
  return scene;
}

std::vector<uint8_t> class_occupancy(const Scene& scene, int h, int w,
                                     const PerceptionRange& range) {
  int64_t cells = static_cast<int64_t>(h) * w;
  std::vector<uint8_t> occ(static_cast<size_t>(kNumMapClasses) * cells, 0);
  for (const MapElement& e : scene.elements) {
    std::vector<uint8_t> m = rasterize(e, h, w, range);
    uint8_t* dst = occ.data() + static_cast<size_t>(static_cast<int>(e.cls)) * cells;
    for (int64_t i = 0; i < cells; ++i) dst[i] |= m[static_cast<size_t>(i)];
  }
  return occ;
}

}  // namespace himap
