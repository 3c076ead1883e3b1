#pragma once

#include <filesystem>

#include "core/losses.hpp"
#include "core/scene_io.hpp"
#include "core/synth.hpp"

namespace himap {

template <typename T>
struct DatasetEntry {
  Scene scene;
  uint64_t seed = 0;  // generation seed from the manifest
  SceneGroundTruth<T> gt;
  std::vector<uint8_t> occupancy;  // class occupancy raster, 3*H*W
};

template <typename T>
struct Dataset {
  std::vector<DatasetEntry<T>> entries;
};

// BEV noise is fixed per scene: keyed by the run seed and the scene seed so
// training and evaluation see identical features.
inline uint64_t scene_noise_seed(uint64_t run_seed, uint64_t scene_seed) {
  return Rng::mix(run_seed) ^ Rng::mix(scene_seed ^ 0x5eedULL);
}

template <typename T>
Dataset<T> load_dataset(const std::string& data_dir, const RunConfig& cfg) {
  namespace fs = std::filesystem;
  std::string manifest_path = (fs::path(data_dir) / "manifest.jsonl").string();
  std::vector<ManifestEntry> manifest = read_manifest(manifest_path);
  Dataset<T> ds;
  for (const ManifestEntry& m : manifest) {
    DatasetEntry<T> entry;
    entry.scene = read_scene_file((fs::path(data_dir) / m.file).string(), cfg.range);
    if (entry.scene.id != m.scene_id) {
      throw Error(ErrorKind::data, "scene id mismatch for " + m.file);
    }
    if (static_cast<int>(entry.scene.elements.size()) > cfg.decoder.elements) {
      throw Error(ErrorKind::data, "scene " + m.scene_id + " has more elements than E=" +
                                       std::to_string(cfg.decoder.elements));
    }
    entry.seed = m.seed;
    entry.gt = prepare_ground_truth<T>(entry.scene, cfg.range, cfg.decoder.points,
                                       cfg.synth.grid_h, cfg.synth.grid_w);
    entry.occupancy = class_occupancy(entry.scene, cfg.synth.grid_h, cfg.synth.grid_w, cfg.range);
    ds.entries.push_back(std::move(entry));
  }
  return ds;
}

}  // namespace himap
