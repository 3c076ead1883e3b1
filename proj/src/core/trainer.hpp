#pragma once

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "core/checkpoint.hpp"
#include "core/model.hpp"

namespace himap {

template <typename T>
std::vector<PredSnapshot> layer_snapshots(const LayerPrediction<T>& pred, int num_classes,
                                          int points, int hw) {
  int e = pred.class_logits.dim(0);
  std::vector<PredSnapshot> out(static_cast<size_t>(e));
  for (int i = 0; i < e; ++i) {
    PredSnapshot& s = out[static_cast<size_t>(i)];
    s.class_probs.resize(static_cast<size_t>(num_classes));
    for (int k = 0; k < num_classes; ++k) {
      double z = static_cast<double>(pred.class_logits.ptr()[i * num_classes + k]);
      s.class_probs[static_cast<size_t>(k)] =
          z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    }
    s.points.resize(static_cast<size_t>(points));
    for (int j = 0; j < points; ++j) {
      s.points[static_cast<size_t>(j)] = {
          static_cast<double>(pred.points.ptr()[(i * points + j) * 2 + 0]),
          static_cast<double>(pred.points.ptr()[(i * points + j) * 2 + 1])};
    }
    s.mask_logits.resize(static_cast<size_t>(hw));
    for (int j = 0; j < hw; ++j) {
      s.mask_logits[static_cast<size_t>(j)] =
          static_cast<double>(pred.mask_logits.ptr()[i * hw + j]);
    }
  }
  return out;
}

template <typename T>
struct SceneLossResult {
  Tensor<T> total;  // weighted scalar for this scene
  LossBreakdown breakdown;
  std::vector<Assignment> assignments;  // per layer
};

// Full training loss of one scene: per-layer Hungarian matching and losses
// plus one BEV segmentation term. Pass fixed assignments/masks to evaluate
// the loss as a smooth function of the parameters (gradient checking).
template <typename T>
SceneLossResult<T> scene_loss(const Model<T>& model, ParamAccess<T> P,
                              const DatasetEntry<T>& entry,
                              const std::vector<Assignment>* fixed_assignments = nullptr,
                              const std::vector<std::vector<T>>* fixed_masks = nullptr) {
  const RunConfig& cfg = model.config();
  int hw = cfg.synth.grid_h * cfg.synth.grid_w;

  Tensor<T> bev = model.encode(P, entry);
  ForwardOptions<T> opts;
  opts.fixed_masks = fixed_masks;
  DecoderForwardResult<T> fwd = model.forward(P, bev, opts);

  MatchWeights mw{cfg.loss_weights.cls, cfg.loss_weights.point, cfg.loss_weights.direction,
                  cfg.loss_weights.mask};

  SceneLossResult<T> out;
  std::vector<LayerLossTerms<T>> terms;
  for (size_t l = 0; l < fwd.layers.size(); ++l) {
    const LayerPrediction<T>& pred = fwd.layers[l];
    Assignment assignment;
    if (fixed_assignments) {
      assignment = (*fixed_assignments)[l];
    } else if (!entry.gt.elements.empty()) {
      std::vector<PredSnapshot> snaps =
          layer_snapshots(pred, cfg.decoder.num_classes, cfg.decoder.points, hw);
      assignment = hungarian(build_cost_matrix(snaps, entry.gt.elements, mw));
    }
    LayerLossTerms<T> t;
    t.cls = focal_class_loss(pred.class_logits, assignment, entry.gt.elements);
    t.point = point_loss(pred.points, assignment, entry.gt.elements);
    t.direction = direction_loss(pred.points, assignment, entry.gt.elements);
    t.mask = mask_loss(pred.mask_logits, assignment, entry.gt);
    t.consistency = consistency_loss(pseudo_element(pred.point_tap, P("layers." +
                                                    std::to_string(l) + ".w_ps")),
                                     pred.elem_tap);
    terms.push_back(std::move(t));
    out.assignments.push_back(std::move(assignment));
  }
  Tensor<T> bev_term = bev_seg_loss(model.seg_logits(P, bev), entry.gt);
  TotalLoss<T> tl = total_loss(terms, bev_term, cfg.loss_weights);
  out.total = tl.total;
  out.breakdown = tl.breakdown;
  return out;
}

// Easy-setting evaluation of the current parameters on the dataset.
template <typename T>
ApTable evaluate_model(const Model<T>& model, ParamStore<T>& store, const Dataset<T>& ds,
                       const std::vector<double>& thresholds, int workers = 1) {
  std::vector<DetectionRecord> detections;
  std::map<std::string, Scene> gt_scenes;
  for (const auto& entry : ds.entries) {
    std::vector<DetectionRecord> dets = model.predict(store, entry);
    detections.insert(detections.end(), dets.begin(), dets.end());
    gt_scenes[entry.scene.id] = entry.scene;
  }
  EvalConfig ec;
  ec.thresholds = thresholds;
  ec.range = model.config().range;
  ec.resample_n = model.config().eval_resample_n;
  ec.workers = workers;
  return evaluate(detections, gt_scenes, ec);
}

struct TrainResult {
  int64_t steps = 0;
  double final_map = 0.0;
  std::string final_checkpoint;
};

// Serialized training loop. Writes the resolved config, an append-only
// metrics stream (one JSON record per line), periodic checkpoints, and a
// final checkpoint under out_dir.
template <typename T>
TrainResult train(const RunConfig& cfg, const Dataset<T>& ds, const std::string& out_dir) {
  namespace fs = std::filesystem;
  if (ds.entries.empty()) throw Error(ErrorKind::data, "training dataset is empty");
  fs::create_directories(out_dir);

  std::string config_json = config_to_json(cfg);
  {
    std::ofstream cf(fs::path(out_dir) / "config.json");
    cf << config_json << "\n";
  }
  std::ofstream metrics(fs::path(out_dir) / "metrics.jsonl");
  if (!metrics) throw Error(ErrorKind::data, "cannot write metrics stream in " + out_dir);

  Model<T> model(cfg);
  ParamStore<T> store;
  model.init_params(store);

  const int64_t total = cfg.optimizer.total_steps;
  const int batch = cfg.optimizer.batch_size;
  const size_t n = ds.entries.size();

  TrainResult result;
  auto run_eval = [&](int64_t step) {
    ApTable table = evaluate_model(model, store, ds, kEasyThresholds);
    nlohmann::json rec;
    rec["type"] = "eval";
    rec["step"] = step;
    nlohmann::json aps = nlohmann::json::object();
    for (const auto& [cls, ap] : table.class_ap) {
      aps[map_class_name(static_cast<MapClass>(cls))] = ap;
    }
    rec["class_ap"] = aps;
    rec["map"] = std::isnan(table.map) ? 0.0 : table.map;
    metrics << rec.dump() << "\n";
    metrics.flush();
    return table.map;
  };

  for (int64_t step = 0; step < total; ++step) {
    double lr = cosine_lr(step, total, cfg.optimizer.base_lr, cfg.optimizer.min_lr);

    Graph<T> graph;
    ParamAccess<T> P{&store, &graph};
    Tensor<T> batch_total;
    LossBreakdown bd;
    for (int b = 0; b < batch; ++b) {
      const DatasetEntry<T>& entry =
          ds.entries[static_cast<size_t>((step * batch + b) % static_cast<int64_t>(n))];
      SceneLossResult<T> sl = scene_loss(model, P, entry);
      batch_total = (b == 0) ? sl.total : ops::add(batch_total, sl.total);
      bd.bev_seg += sl.breakdown.bev_seg;
      bd.cls += sl.breakdown.cls;
      bd.point += sl.breakdown.point;
      bd.direction += sl.breakdown.direction;
      bd.mask += sl.breakdown.mask;
      bd.consistency += sl.breakdown.consistency;
    }
    batch_total = ops::mul_scalar(batch_total, T(1) / static_cast<T>(batch));
    bd.bev_seg /= batch;
    bd.cls /= batch;
    bd.point /= batch;
    bd.direction /= batch;
    bd.mask /= batch;
    bd.consistency /= batch;
    bd.total = static_cast<double>(batch_total.item());

    graph.backward(batch_total);
    store.pull_grads(graph);
    if (cfg.optimizer.grad_clip > 0.0) store.clip_grad_norm(cfg.optimizer.grad_clip);
    store.adamw_step(lr, cfg.optimizer.weight_decay);
    store.zero_grads();

    nlohmann::json rec;
    rec["type"] = "step";
    rec["step"] = step;
    rec["lr"] = lr;
    rec["loss"] = {{"bev_seg", bd.bev_seg},     {"class", bd.cls},
                   {"point", bd.point},         {"direction", bd.direction},
                   {"mask", bd.mask},           {"consistency", bd.consistency},
                   {"total", bd.total}};
    metrics << rec.dump() << "\n";
    metrics.flush();

    int64_t done = step + 1;
    if (cfg.optimizer.eval_interval > 0 && done % cfg.optimizer.eval_interval == 0 &&
        done < total) {
      run_eval(done);
    }
    if (cfg.optimizer.checkpoint_interval > 0 && done % cfg.optimizer.checkpoint_interval == 0 &&
        done < total) {
      save_checkpoint(store, config_json,
                      (fs::path(out_dir) / ("checkpoint_" + std::to_string(done) + ".ckpt"))
                          .string());
    }
  }

  result.steps = total;
  result.final_map = run_eval(total);
  result.final_checkpoint = (fs::path(out_dir) / "checkpoint_final.ckpt").string();
  save_checkpoint(store, config_json, result.final_checkpoint);
  return result;
}

}  // namespace himap
