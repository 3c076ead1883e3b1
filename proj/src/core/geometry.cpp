#include "core/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace himap {

const char* map_class_name(MapClass c) {
  switch (c) {
    case MapClass::pedestrian_crossing: return "pedestrian_crossing";
    case MapClass::lane_divider: return "lane_divider";
    case MapClass::road_boundary: return "road_boundary";
  }
  return "unknown";
}

MapClass map_class_from_code(int code) {
  if (code < 0 || code >= kNumMapClasses) {
    throw Error(ErrorKind::data, "invalid map class code " + std::to_string(code));
  }
  return static_cast<MapClass>(code);
}

double dist(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

double MapElement::total_length() const {
  double len = 0.0;
  for (size_t i = 0; i + 1 < points.size(); ++i) len += dist(points[i], points[i + 1]);
  if (closed && points.size() >= 2) len += dist(points.back(), points.front());
  return len;
}

Vec2 normalize_point(Vec2 p, const PerceptionRange& range) {
  if (!range.valid()) throw Error(ErrorKind::usage, "degenerate perception range");
  return {(p.x - range.x_min) / range.width(), (p.y - range.y_min) / range.height()};
}

Vec2 denormalize_point(Vec2 u, const PerceptionRange& range) {
  if (!range.valid()) throw Error(ErrorKind::usage, "degenerate perception range");
  return {range.x_min + u.x * range.width(), range.y_min + u.y * range.height()};
}

namespace {

// Vertices of the curve with the closing segment made explicit for closed
// elements, plus cumulative arc length.
struct ArcTable {
  std::vector<Vec2> verts;
  std::vector<double> cum;  // cum[i] = arc length from verts[0] to verts[i]
};

ArcTable build_arc_table(const MapElement& e) {
  if (e.points.size() < 2) {
    throw Error(ErrorKind::data, "map element needs at least 2 points");
  }
  ArcTable t;
  t.verts = e.points;
  if (e.closed) t.verts.push_back(e.points.front());
  t.cum.resize(t.verts.size());
  t.cum[0] = 0.0;
  for (size_t i = 1; i < t.verts.size(); ++i) {
    t.cum[i] = t.cum[i - 1] + dist(t.verts[i - 1], t.verts[i]);
  }
  return t;
}

Vec2 point_at_arc(const ArcTable& t, double s) {
  if (s <= 0.0) return t.verts.front();
  double total = t.cum.back();
  if (s >= total) return t.verts.back();
  auto it = std::upper_bound(t.cum.begin(), t.cum.end(), s);
  size_t i = static_cast<size_t>(it - t.cum.begin());  // cum[i-1] <= s < cum[i]
  double seg = t.cum[i] - t.cum[i - 1];
  double a = seg > 0.0 ? (s - t.cum[i - 1]) / seg : 0.0;
  return t.verts[i - 1] + a * (t.verts[i] - t.verts[i - 1]);
}

double point_segment_dist(Vec2 p, Vec2 a, Vec2 b) {
  Vec2 ab = b - a;
  double len2 = ab.x * ab.x + ab.y * ab.y;
  if (len2 == 0.0) return dist(p, a);
  double t = ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return dist(p, a + t * ab);
}

}  // namespace

std::vector<Vec2> resample(const MapElement& element, int n) {
  if (n < 2) throw Error(ErrorKind::usage, "resample needs n >= 2");
  ArcTable t = build_arc_table(element);
  double total = t.cum.back();
  if (total <= 0.0) throw Error(ErrorKind::data, "cannot resample zero-length element");
  std::vector<Vec2> out(static_cast<size_t>(n));
  if (element.closed) {
    for (int i = 0; i < n; ++i) out[i] = point_at_arc(t, total * i / n);
  } else {
    for (int i = 0; i < n; ++i) out[i] = point_at_arc(t, total * i / (n - 1));
  }
  return out;
}

double chamfer_distance(const MapElement& a, const MapElement& b, int n) {
  std::vector<Vec2> pa = resample(a, n);
  std::vector<Vec2> pb = resample(b, n);
  auto directed = [](const std::vector<Vec2>& from, const std::vector<Vec2>& to) {
    double sum = 0.0;
    for (const Vec2& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec2& q : to) best = std::min(best, dist(p, q));
      sum += best;
    }
    return sum / static_cast<double>(from.size());
  };
  return 0.5 * (directed(pa, pb) + directed(pb, pa));
}

std::vector<uint8_t> rasterize(const MapElement& element, int h, int w,
                               const PerceptionRange& range, double thickness) {
  if (h <= 0 || w <= 0) throw Error(ErrorKind::usage, "rasterize needs h, w > 0");
  if (thickness < 1.0) throw Error(ErrorKind::usage, "rasterize needs thickness >= 1");
  std::vector<uint8_t> mask(static_cast<size_t>(h) * w, 0);

  // Work in cell coordinates so the thickness threshold is isotropic even
  // when cells are not square in meters.
  double cw = range.width() / w;
  double ch = range.height() / h;
  auto to_cell = [&](Vec2 p) -> Vec2 {
    return {(p.x - range.x_min) / cw, (p.y - range.y_min) / ch};
  };
  std::vector<Vec2> verts;
  verts.reserve(element.points.size() + 1);
  for (Vec2 p : element.points) verts.push_back(to_cell(p));
  if (element.closed && !element.points.empty()) verts.push_back(to_cell(element.points.front()));

  double radius = thickness * 0.5;
  for (size_t i = 0; i + 1 < verts.size(); ++i) {
    Vec2 a = verts[i], b = verts[i + 1];
    int c0 = static_cast<int>(std::floor(std::min(a.x, b.x) - radius - 0.5));
    int c1 = static_cast<int>(std::ceil(std::max(a.x, b.x) + radius - 0.5));
    int r0 = static_cast<int>(std::floor(std::min(a.y, b.y) - radius - 0.5));
    int r1 = static_cast<int>(std::ceil(std::max(a.y, b.y) + radius - 0.5));
    c0 = std::max(c0, 0); r0 = std::max(r0, 0);
    c1 = std::min(c1, w - 1); r1 = std::min(r1, h - 1);
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        Vec2 center{c + 0.5, r + 0.5};
        if (point_segment_dist(center, a, b) <= radius) {
          mask[static_cast<size_t>(r) * w + c] = 1;
        }
      }
    }
  }
  return mask;
}

std::vector<uint8_t> rasterize_union(const std::vector<MapElement>& elements,
                                     int h, int w, const PerceptionRange& range,
                                     double thickness) {
  std::vector<uint8_t> mask(static_cast<size_t>(h) * w, 0);
  for (const MapElement& e : elements) {
    std::vector<uint8_t> m = rasterize(e, h, w, range, thickness);
    for (size_t i = 0; i < mask.size(); ++i) mask[i] |= m[i];
  }
  return mask;
}

std::vector<std::vector<int>> equivalent_orderings(int num_points, bool closed) {
  std::vector<std::vector<int>> out;
  if (num_points <= 0) return out;
  int p = num_points;
  if (!closed) {
    std::vector<int> fwd(p), rev(p);
    for (int i = 0; i < p; ++i) {
      fwd[i] = i;
      rev[i] = p - 1 - i;
    }
    out.push_back(std::move(fwd));
    out.push_back(std::move(rev));
    return out;
  }
  for (int s = 0; s < p; ++s) {
    std::vector<int> fwd(p), rev(p);
    for (int i = 0; i < p; ++i) {
      fwd[i] = (s + i) % p;
      rev[i] = ((s - i) % p + p) % p;
    }
    out.push_back(std::move(fwd));
    out.push_back(std::move(rev));
  }
  return out;
}

std::vector<std::vector<Vec2>> equivalent_orderings(const MapElement& element) {
  auto perms = equivalent_orderings(static_cast<int>(element.points.size()), element.closed);
  std::vector<std::vector<Vec2>> out;
  out.reserve(perms.size());
  for (const auto& perm : perms) {
    std::vector<Vec2> seq(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) seq[i] = element.points[perm[i]];
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace himap
