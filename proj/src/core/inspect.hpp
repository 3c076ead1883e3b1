#pragma once

#include <filesystem>
#include <fstream>

#include "core/model.hpp"
#include "core/pgm.hpp"

namespace himap {

// Per-layer dump for one element of one scene: anchor/sampling tables as
// text, anchor masks as binary graymaps, masked-attention rows normalized to
// 0..255, and an overlay of the mask (255) on the rasterized GT (128).
template <typename T>
void inspect_element(const Model<T>& model, ParamStore<T>& store, const DatasetEntry<T>& entry,
                     int element_index, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const RunConfig& cfg = model.config();
  const int e = cfg.decoder.elements, pts = cfg.decoder.points, k = cfg.decoder.sample_points;
  const int h = cfg.synth.grid_h, w = cfg.synth.grid_w;
  const int hw = h * w;
  if (element_index < 0 || element_index >= e) {
    throw Error(ErrorKind::usage, "inspect: element index out of range");
  }
  fs::create_directories(out_dir);

  ParamAccess<T> P{&store, nullptr};
  Tensor<T> bev = model.encode(P, entry);
  std::vector<LayerCapture<T>> capture;
  ForwardOptions<T> opts;
  opts.capture = &capture;
  model.forward(P, bev, opts);

  std::vector<uint8_t> gt_raster =
      rasterize_union(entry.scene.elements, h, w, cfg.range);

  for (size_t l = 0; l < capture.size(); ++l) {
    const LayerCapture<T>& cap = capture[l];
    std::string stem = (fs::path(out_dir) / ("layer" + std::to_string(l))).string();

    // anchor + sampling table
    std::ofstream table(stem + "_anchors.txt");
    table << "# layer " << l << " element " << element_index << "\n";
    table << "# point anchor_x anchor_y";
    for (int s = 0; s < k; ++s) table << " sample" << s << "_x sample" << s << "_y sample" << s << "_w";
    table << "\n";
    for (int j = 0; j < pts; ++j) {
      int64_t pi = static_cast<int64_t>(element_index) * pts + j;
      table << j << " " << cap.anchors[static_cast<size_t>(pi * 2 + 0)] << " "
            << cap.anchors[static_cast<size_t>(pi * 2 + 1)];
      for (int s = 0; s < k; ++s) {
        int64_t si = pi * k + s;
        table << " " << cap.sample_locs[static_cast<size_t>(si * 2 + 0)] << " "
              << cap.sample_locs[static_cast<size_t>(si * 2 + 1)] << " "
              << cap.sample_weights[static_cast<size_t>(si)];
      }
      table << "\n";
    }

    // binary anchor mask
    std::vector<uint8_t> mask_img(static_cast<size_t>(hw));
    for (int i = 0; i < hw; ++i) {
      T v = cap.effective_mask[static_cast<size_t>(element_index) * hw + i];
      mask_img[static_cast<size_t>(i)] = v > T(0.5) ? 255 : 0;
    }
    write_pgm(stem + "_mask.pgm", mask_img, h, w);

    // mask overlaid on the rasterized GT
    std::vector<uint8_t> overlay(static_cast<size_t>(hw));
    for (int i = 0; i < hw; ++i) {
      overlay[static_cast<size_t>(i)] =
          mask_img[static_cast<size_t>(i)] ? 255 : (gt_raster[static_cast<size_t>(i)] ? 128 : 0);
    }
    write_pgm(stem + "_overlay.pgm", overlay, h, w);

    // masked attention row, min-max scaled
    std::vector<uint8_t> attn_img(static_cast<size_t>(hw));
    T lo = cap.attention[static_cast<size_t>(element_index) * hw];
    T hi = lo;
    for (int i = 0; i < hw; ++i) {
      T v = cap.attention[static_cast<size_t>(element_index) * hw + i];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    T span = hi - lo;
    for (int i = 0; i < hw; ++i) {
      T v = cap.attention[static_cast<size_t>(element_index) * hw + i];
      attn_img[static_cast<size_t>(i)] =
          span > T(0) ? static_cast<uint8_t>(255.0 * static_cast<double>((v - lo) / span)) : 0;
    }
    write_pgm(stem + "_attn.pgm", attn_img, h, w);
  }
}

}  // namespace himap
