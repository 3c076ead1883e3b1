#pragma once

#include <string>

#include "core/geometry.hpp"
#include "core/synth.hpp"

namespace himap {

struct DecoderConfig {
  int elements = 50;       // E
  int points = 20;         // P
  int channels = 256;      // C
  int layers = 6;          // L
  int sample_points = 4;   // K, deformable samples per anchor
  int num_classes = kNumMapClasses;
  int self_attn_heads = 4;
  int ffn_mult = 2;
  bool cross_level_update = true;  // mutual point/element query update
  bool eq4_scale = false;          // optional 1/sqrt(C) inside the masked-attention logits
};

struct LossWeights {
  double bev_seg = 2.0;
  double cls = 2.0;
  double point = 5.0;
  double direction = 0.005;
  double mask = 2.0;
  double consistency = 2.0;
};

struct OptimizerConfig {
  double base_lr = 0.0006;
  double min_lr = 0.0;
  double weight_decay = 0.01;
  int64_t total_steps = 1000;
  int batch_size = 32;
  double grad_clip = 35.0;  // global norm; <= 0 disables
  int64_t eval_interval = 250;
  int64_t checkpoint_interval = 1000;
};

struct RunConfig {
  uint64_t run_seed = 1;
  std::string dtype = "f32";  // "f32" | "f64"
  DecoderConfig decoder;
  LossWeights loss_weights;
  OptimizerConfig optimizer;
  PerceptionRange range;  // defaults to [-15,15] x [-30,30]
  SynthConfig synth;
  int eval_resample_n = 100;

  void validate() const;
};

RunConfig config_from_json(const std::string& text);
std::string config_to_json(const RunConfig& cfg);
RunConfig load_config_file(const std::string& path);

// Desk-scale preset: 20x40 grid at 0.3 m, small decoder; used by tests.
RunConfig desk_config();

}  // namespace himap
