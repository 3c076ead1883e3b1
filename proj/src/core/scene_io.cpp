#include "core/scene_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace himap {

using nlohmann::json;

std::string scene_to_json(const Scene& scene) {
  json j;
  j["id"] = scene.id;
  j["elements"] = json::array();
  for (const MapElement& e : scene.elements) {
    json je;
    je["class"] = static_cast<int>(e.cls);
    je["closed"] = e.closed;
    json pts = json::array();
    for (Vec2 p : e.points) pts.push_back({p.x, p.y});
    je["points"] = std::move(pts);
    j["elements"].push_back(std::move(je));
  }
  return j.dump();
}

Scene scene_from_json(const std::string& text, const PerceptionRange& range) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::data, std::string("scene parse error: ") + e.what());
  }
  Scene scene;
  try {
    scene.id = j.at("id").get<std::string>();
    for (const json& je : j.at("elements")) {
      MapElement e;
      e.cls = map_class_from_code(je.at("class").get<int>());
      e.closed = je.at("closed").get<bool>();
      for (const json& jp : je.at("points")) {
        Vec2 p{jp.at(0).get<double>(), jp.at(1).get<double>()};
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
          throw Error(ErrorKind::data, "non-finite coordinate in scene " + scene.id);
        }
        // Clip to the perception range on load.
        p.x = std::clamp(p.x, range.x_min, range.x_max);
        p.y = std::clamp(p.y, range.y_min, range.y_max);
        e.points.push_back(p);
      }
      // Normalize closed elements that repeat their first point.
      if (e.closed && e.points.size() >= 2 &&
          dist(e.points.front(), e.points.back()) < 1e-12) {
        e.points.pop_back();
      }
      if (e.points.size() < 2) {
        throw Error(ErrorKind::data, "element with fewer than 2 points in scene " + scene.id);
      }
      scene.elements.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::data, std::string("scene schema error: ") + e.what());
  }
  return scene;
}

void write_scene_file(const Scene& scene, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::data, "cannot write scene file " + path);
  out << scene_to_json(scene) << "\n";
}

Scene read_scene_file(const std::string& path, const PerceptionRange& range) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::data, "cannot read scene file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return scene_from_json(ss.str(), range);
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::data, "cannot write manifest " + path);
  for (const ManifestEntry& e : entries) {
    json j;
    j["seed"] = e.seed;
    j["scene"] = e.scene_id;
    j["file"] = e.file;
    out << j.dump() << "\n";
  }
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::data, "cannot read manifest " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      ManifestEntry e;
      e.seed = j.at("seed").get<uint64_t>();
      e.scene_id = j.at("scene").get<std::string>();
      e.file = j.at("file").get<std::string>();
      entries.push_back(std::move(e));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::data, std::string("manifest parse error: ") + e.what());
    }
  }
  return entries;
}

}  // namespace himap
