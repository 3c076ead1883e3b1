#pragma once

#include "core/dataset.hpp"
#include "core/decoder.hpp"
#include "core/metrics.hpp"

namespace himap {

// Decoder plus the stand-in BEV encoder and the segmentation projection:
// everything trained together and stored in one ParamStore.
template <typename T>
class Model {
 public:
  explicit Model(const RunConfig& cfg)
      : cfg_(cfg), decoder_(cfg.decoder, cfg.synth.grid_h, cfg.synth.grid_w) {}

  const RunConfig& config() const { return cfg_; }
  const HybridDecoder<T>& decoder() const { return decoder_; }

  void init_params(ParamStore<T>& store) const {
    decoder_.init_params(store, cfg_.run_seed);
    double limit = std::sqrt(6.0 / (kNumMapClasses + cfg_.decoder.channels));
    store.create("encoder.proj.w", {kNumMapClasses, cfg_.decoder.channels},
                 [limit](Rng& r) { return static_cast<T>(r.uniform(-limit, limit)); },
                 cfg_.run_seed);
    store.create("encoder.proj.b", {cfg_.decoder.channels}, [](Rng&) { return T(0); },
                 cfg_.run_seed);
    double slimit = std::sqrt(6.0 / (cfg_.decoder.channels + 1));
    store.create("encoder.seg.w", {cfg_.decoder.channels, 1},
                 [slimit](Rng& r) { return static_cast<T>(r.uniform(-slimit, slimit)); },
                 cfg_.run_seed);
    store.create("encoder.seg.b", {1}, [](Rng&) { return T(0); }, cfg_.run_seed);
  }

  Tensor<T> encode(ParamAccess<T> P, const DatasetEntry<T>& entry) const {
    Tensor<T> sinus = ops::sinusoidal_embedding_2d<T>(cfg_.synth.grid_h, cfg_.synth.grid_w,
                                                      cfg_.decoder.channels);
    return encode_bev<T>(entry.occupancy, cfg_.synth.grid_h, cfg_.synth.grid_w,
                         P("encoder.proj.w"), P("encoder.proj.b"), sinus,
                         cfg_.synth.noise_sigma, scene_noise_seed(cfg_.run_seed, entry.seed));
  }

  // Per-cell segmentation logits from the BEV features, flattened to [HW].
  Tensor<T> seg_logits(ParamAccess<T> P, const Tensor<T>& bev) const {
    using namespace ops;
    int hw = cfg_.synth.grid_h * cfg_.synth.grid_w;
    Tensor<T> flat = reshape(bev, {hw, cfg_.decoder.channels});
    LinearParams<T> seg{P("encoder.seg.w"), P("encoder.seg.b")};
    return reshape(linear(flat, seg), {hw});
  }

  DecoderForwardResult<T> forward(ParamAccess<T> P, const Tensor<T>& bev,
                                  const ForwardOptions<T>& opts = {}) const {
    return decoder_.forward(P, bev, opts);
  }

  // Final-layer predictions of one scene converted to detection records:
  // every query becomes a detection with its argmax class and that class's
  // sigmoid probability as confidence.
  std::vector<DetectionRecord> predict(ParamStore<T>& store, const DatasetEntry<T>& entry) const {
    ParamAccess<T> P{&store, nullptr};
    Tensor<T> bev = encode(P, entry);
    DecoderForwardResult<T> fwd = forward(P, bev);
    const LayerPrediction<T>& last = fwd.final();

    std::vector<DetectionRecord> out;
    int e = cfg_.decoder.elements, pts = cfg_.decoder.points, nc = cfg_.decoder.num_classes;
    for (int i = 0; i < e; ++i) {
      int best = 0;
      double best_prob = -1.0;
      for (int k = 0; k < nc; ++k) {
        double z = static_cast<double>(last.class_logits.ptr()[i * nc + k]);
        double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        if (p > best_prob) {
          best_prob = p;
          best = k;
        }
      }
      DetectionRecord det;
      det.scene_id = entry.scene.id;
      det.cls = static_cast<MapClass>(best);
      det.confidence = best_prob;
      det.element.cls = det.cls;
      det.element.closed = det.cls == MapClass::pedestrian_crossing;
      for (int j = 0; j < pts; ++j) {
        Vec2 u{static_cast<double>(last.points.ptr()[(i * pts + j) * 2 + 0]),
               static_cast<double>(last.points.ptr()[(i * pts + j) * 2 + 1])};
        det.element.points.push_back(denormalize_point(u, cfg_.range));
      }
      out.push_back(std::move(det));
    }
    return out;
  }

 private:
  RunConfig cfg_;
  HybridDecoder<T> decoder_;
};

}  // namespace himap
