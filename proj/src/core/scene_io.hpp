#pragma once

#include <string>
#include <vector>

#include "core/geometry.hpp"

namespace himap {

// Scene file: one JSON object per scene with id and elements
// [{class: 0|1|2, closed: bool, points: [[x,y],...]}], coordinates in meters.
std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text, const PerceptionRange& range);

void write_scene_file(const Scene& scene, const std::string& path);
Scene read_scene_file(const std::string& path, const PerceptionRange& range);

struct ManifestEntry {
  uint64_t seed = 0;
  std::string scene_id;
  std::string file;  // path relative to the manifest
};

// Dataset manifest: one JSON record per line.
void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path);
std::vector<ManifestEntry> read_manifest(const std::string& path);

}  // namespace himap
