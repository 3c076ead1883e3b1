#include "core/runconfig.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace himap {

using nlohmann::json;

void RunConfig::validate() const {
  if (dtype != "f32" && dtype != "f64") {
    throw Error(ErrorKind::usage, "config: dtype must be f32 or f64");
  }
  const DecoderConfig& d = decoder;
  if (d.elements <= 0 || d.points <= 0 || d.channels <= 0 || d.layers <= 0 ||
      d.sample_points <= 0 || d.num_classes <= 0 || d.self_attn_heads <= 0) {
    throw Error(ErrorKind::usage, "config: decoder dimensions must be positive");
  }
  if (d.channels % d.self_attn_heads != 0) {
    throw Error(ErrorKind::usage, "config: channels must divide by self_attn_heads");
  }
  if (d.channels % 4 != 0) {
    throw Error(ErrorKind::usage, "config: channels must be a multiple of 4");
  }
  if (!range.valid()) throw Error(ErrorKind::usage, "config: invalid perception range");
  if (optimizer.total_steps <= 0 || optimizer.batch_size <= 0) {
    throw Error(ErrorKind::usage, "config: total_steps and batch_size must be positive");
  }
  // The BEV grid must tile the perception range at the configured cell size.
  double gw = synth.grid_w * synth.cell_size;
  double gh = synth.grid_h * synth.cell_size;
  if (std::abs(gw - range.width()) > 1e-6 || std::abs(gh - range.height()) > 1e-6) {
    std::ostringstream os;
    os << "config: grid " << synth.grid_h << "x" << synth.grid_w << " at " << synth.cell_size
       << " m does not cover the range " << range.width() << "x" << range.height() << " m";
    throw Error(ErrorKind::usage, os.str());
  }
}

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (j.contains(key)) return j.at(key).get<T>();
  return fallback;
}

}  // namespace

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = text.empty() ? json::object() : json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::usage, std::string("config parse error: ") + e.what());
  }
  RunConfig cfg;
  try {
    cfg.run_seed = get_or<uint64_t>(j, "run_seed", cfg.run_seed);
    cfg.dtype = get_or<std::string>(j, "dtype", cfg.dtype);
    if (j.contains("decoder")) {
      const json& d = j["decoder"];
      cfg.decoder.elements = get_or(d, "elements", cfg.decoder.elements);
      cfg.decoder.points = get_or(d, "points", cfg.decoder.points);
      cfg.decoder.channels = get_or(d, "channels", cfg.decoder.channels);
      cfg.decoder.layers = get_or(d, "layers", cfg.decoder.layers);
      cfg.decoder.sample_points = get_or(d, "sample_points", cfg.decoder.sample_points);
      cfg.decoder.num_classes = get_or(d, "num_classes", cfg.decoder.num_classes);
      cfg.decoder.self_attn_heads = get_or(d, "self_attn_heads", cfg.decoder.self_attn_heads);
      cfg.decoder.ffn_mult = get_or(d, "ffn_mult", cfg.decoder.ffn_mult);
      cfg.decoder.cross_level_update =
          get_or(d, "cross_level_update", cfg.decoder.cross_level_update);
      cfg.decoder.eq4_scale = get_or(d, "eq4_scale", cfg.decoder.eq4_scale);
    }
    if (j.contains("loss_weights")) {
      const json& w = j["loss_weights"];
      cfg.loss_weights.bev_seg = get_or(w, "bev_seg", cfg.loss_weights.bev_seg);
      cfg.loss_weights.cls = get_or(w, "class", cfg.loss_weights.cls);
      cfg.loss_weights.point = get_or(w, "point", cfg.loss_weights.point);
      cfg.loss_weights.direction = get_or(w, "direction", cfg.loss_weights.direction);
      cfg.loss_weights.mask = get_or(w, "mask", cfg.loss_weights.mask);
      cfg.loss_weights.consistency = get_or(w, "consistency", cfg.loss_weights.consistency);
    }
    if (j.contains("optimizer")) {
      const json& o = j["optimizer"];
      cfg.optimizer.base_lr = get_or(o, "base_lr", cfg.optimizer.base_lr);
      cfg.optimizer.min_lr = get_or(o, "min_lr", cfg.optimizer.min_lr);
      cfg.optimizer.weight_decay = get_or(o, "weight_decay", cfg.optimizer.weight_decay);
      cfg.optimizer.total_steps = get_or(o, "total_steps", cfg.optimizer.total_steps);
      cfg.optimizer.batch_size = get_or(o, "batch_size", cfg.optimizer.batch_size);
      cfg.optimizer.grad_clip = get_or(o, "grad_clip", cfg.optimizer.grad_clip);
      cfg.optimizer.eval_interval = get_or(o, "eval_interval", cfg.optimizer.eval_interval);
      cfg.optimizer.checkpoint_interval =
          get_or(o, "checkpoint_interval", cfg.optimizer.checkpoint_interval);
    }
    if (j.contains("range")) {
      const json& r = j["range"];
      cfg.range.x_min = get_or(r, "x_min", cfg.range.x_min);
      cfg.range.x_max = get_or(r, "x_max", cfg.range.x_max);
      cfg.range.y_min = get_or(r, "y_min", cfg.range.y_min);
      cfg.range.y_max = get_or(r, "y_max", cfg.range.y_max);
    }
    if (j.contains("synth")) {
      const json& s = j["synth"];
      cfg.synth.seed = get_or<uint64_t>(s, "seed", cfg.run_seed);
      cfg.synth.grid_h = get_or(s, "grid_h", cfg.synth.grid_h);
      cfg.synth.grid_w = get_or(s, "grid_w", cfg.synth.grid_w);
      cfg.synth.cell_size = get_or(s, "cell_size", cfg.synth.cell_size);
      cfg.synth.noise_sigma = get_or(s, "noise_sigma", cfg.synth.noise_sigma);
      if (s.contains("counts")) {
        for (int c = 0; c < kNumMapClasses; ++c) {
          const char* name = map_class_name(static_cast<MapClass>(c));
          if (s["counts"].contains(name)) {
            auto arr = s["counts"][name];
            cfg.synth.counts[static_cast<MapClass>(c)] = {arr.at(0).get<int>(),
                                                          arr.at(1).get<int>()};
          }
        }
      }
    } else {
      cfg.synth.seed = cfg.run_seed;
    }
    cfg.eval_resample_n = get_or(j, "eval_resample_n", cfg.eval_resample_n);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::usage, std::string("config schema error: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string config_to_json(const RunConfig& cfg) {
  json j;
  j["run_seed"] = cfg.run_seed;
  j["dtype"] = cfg.dtype;
  j["decoder"] = {{"elements", cfg.decoder.elements},
                  {"points", cfg.decoder.points},
                  {"channels", cfg.decoder.channels},
                  {"layers", cfg.decoder.layers},
                  {"sample_points", cfg.decoder.sample_points},
                  {"num_classes", cfg.decoder.num_classes},
                  {"self_attn_heads", cfg.decoder.self_attn_heads},
                  {"ffn_mult", cfg.decoder.ffn_mult},
                  {"cross_level_update", cfg.decoder.cross_level_update},
                  {"eq4_scale", cfg.decoder.eq4_scale}};
  j["loss_weights"] = {{"bev_seg", cfg.loss_weights.bev_seg},
                       {"class", cfg.loss_weights.cls},
                       {"point", cfg.loss_weights.point},
                       {"direction", cfg.loss_weights.direction},
                       {"mask", cfg.loss_weights.mask},
                       {"consistency", cfg.loss_weights.consistency}};
  j["optimizer"] = {{"base_lr", cfg.optimizer.base_lr},
                    {"min_lr", cfg.optimizer.min_lr},
                    {"weight_decay", cfg.optimizer.weight_decay},
                    {"total_steps", cfg.optimizer.total_steps},
                    {"batch_size", cfg.optimizer.batch_size},
                    {"grad_clip", cfg.optimizer.grad_clip},
                    {"eval_interval", cfg.optimizer.eval_interval},
                    {"checkpoint_interval", cfg.optimizer.checkpoint_interval}};
  j["range"] = {{"x_min", cfg.range.x_min},
                {"x_max", cfg.range.x_max},
                {"y_min", cfg.range.y_min},
                {"y_max", cfg.range.y_max}};
  json counts = json::object();
  for (const auto& [cls, mm] : cfg.synth.counts) {
    counts[map_class_name(cls)] = {mm.first, mm.second};
  }
  j["synth"] = {{"seed", cfg.synth.seed},       {"counts", counts},
                {"grid_h", cfg.synth.grid_h},   {"grid_w", cfg.synth.grid_w},
                {"cell_size", cfg.synth.cell_size}, {"noise_sigma", cfg.synth.noise_sigma}};
  j["eval_resample_n"] = cfg.eval_resample_n;
  return j.dump();
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::usage, "cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

RunConfig desk_config() {
  RunConfig cfg;
  cfg.decoder.elements = 10;
  cfg.decoder.points = 8;
  cfg.decoder.channels = 32;
  cfg.decoder.layers = 3;
  cfg.range = {-6.0, 6.0, -3.0, 3.0};
  cfg.synth.grid_h = 20;
  cfg.synth.grid_w = 40;
  cfg.synth.cell_size = 0.3;
  cfg.optimizer.batch_size = 4;
  cfg.validate();
  return cfg;
}

}  // namespace himap
