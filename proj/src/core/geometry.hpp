#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/error.hpp"

namespace himap {

// Stable integer codes are part of the scene file format.
enum class MapClass : int {
  pedestrian_crossing = 0,
  lane_divider = 1,
  road_boundary = 2,
};
constexpr int kNumMapClasses = 3;

const char* map_class_name(MapClass c);
MapClass map_class_from_code(int code);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
double dist(Vec2 a, Vec2 b);

struct PerceptionRange {
  double x_min = -15.0, x_max = 15.0;
  double y_min = -30.0, y_max = 30.0;

  bool valid() const { return x_min < x_max && y_min < y_max; }
  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  bool contains(Vec2 p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
};

// One vectorized element. Points are meters in the ego frame, ordered.
// Closed elements (polygons) do not repeat the first point at the end.
struct MapElement {
  MapClass cls = MapClass::lane_divider;
  std::vector<Vec2> points;
  bool closed = false;

  double total_length() const;
};

struct Scene {
  std::string id;
  std::vector<MapElement> elements;
};

// Affine map of the perception range onto the unit square and back.
Vec2 normalize_point(Vec2 p, const PerceptionRange& range);
Vec2 denormalize_point(Vec2 u, const PerceptionRange& range);

// n points equally spaced by arc length. For open elements the first and
// last outputs coincide with the endpoints; for closed elements the n points
// cover the full loop (including the closing segment) with perimeter/n
// spacing, anchored at points[0].
std::vector<Vec2> resample(const MapElement& element, int n);

// Symmetric chamfer distance in meters between the two curves after
// resampling each to n points.
double chamfer_distance(const MapElement& a, const MapElement& b, int n = 100);

// Binary occupancy mask, h rows by w cols, row-major. A cell is set when its
// center lies within thickness/2 (in cell units) of the element's polyline;
// closed elements rasterize the outline only.
std::vector<uint8_t> rasterize(const MapElement& element, int h, int w,
                               const PerceptionRange& range,
                               double thickness = 1.0);

// Rasterize the outline union of several elements into one mask.
std::vector<uint8_t> rasterize_union(const std::vector<MapElement>& elements,
                                     int h, int w, const PerceptionRange& range,
                                     double thickness = 1.0);

// Index permutations of a P-point sequence treated as equivalent: forward and
// reversed for open polylines (2), all cyclic rotations in both directions
// for closed polygons (2P).
std::vector<std::vector<int>> equivalent_orderings(int num_points, bool closed);

// Same, applied to the element's own point sequence.
std::vector<std::vector<Vec2>> equivalent_orderings(const MapElement& element);

}  // namespace himap
