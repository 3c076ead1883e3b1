#pragma once

#include <functional>
#include <sstream>

#include "core/fd_check.hpp"
#include "core/trainer.hpp"

namespace himap {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 1e-4;
  bool pass() const { return max_rel_err < tolerance; }
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool all_pass() const {
    for (const auto& e : entries)
      if (!e.pass()) return false;
    return true;
  }
  std::string format() const {
    std::ostringstream os;
    for (const auto& e : entries) {
      os << "op " << e.name << " max_rel_err=" << e.max_rel_err
         << " tol=" << e.tolerance << " " << (e.pass() ? "PASS" : "FAIL") << "\n";
    }
    os << (all_pass() ? "gradcheck PASS" : "gradcheck FAIL") << "\n";
    return os.str();
  }
};

namespace gradcheck_detail {

using D = double;
using TensorD = Tensor<double>;
using GraphD = Graph<double>;

inline TensorD rand_tensor(Rng& rng, std::vector<int> shape, double lo = -1.0, double hi = 1.0) {
  TensorD t = TensorD::zeros(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t.ptr()[i] = rng.uniform(lo, hi);
  return t;
}

// Random projection makes the scalar loss sensitive to every output entry.
inline TensorD project(const TensorD& out, uint64_t seed) {
  Rng rng(seed, Rng::hash_name("proj"));
  TensorD w = rand_tensor(rng, out.shape, -1.0, 1.0);
  return ops::reduce_sum_all(ops::mul(out, w));
}

using CheckFn = std::function<FdReport(uint64_t seed)>;

}  // namespace gradcheck_detail

// Central-difference checks of every differentiable op (h = 1e-5, 64-bit),
// each over `seeds` random instances, plus one end-to-end loss graph checked
// on a random subset of parameter coordinates.
GradCheckReport run_gradcheck(int seeds = 10, double per_op_tol = 1e-4, double e2e_tol = 1e-3);

namespace gradcheck_detail {

inline std::vector<std::pair<std::string, CheckFn>> op_checks() {
  using namespace ops;
  std::vector<std::pair<std::string, CheckFn>> checks;
  auto add_check = [&](const std::string& name, CheckFn fn) { checks.emplace_back(name, fn); };

  auto simple = [](std::vector<std::vector<int>> shapes,
                   std::function<TensorD(GraphD&, const std::vector<TensorD>&)> body,
                   double lo = -1.0, double hi = 1.0) {
    return [shapes, body, lo, hi](uint64_t seed) {
      Rng rng(seed, Rng::hash_name("inputs"));
      std::vector<TensorD> inputs;
      for (const auto& s : shapes) inputs.push_back(rand_tensor(rng, s, lo, hi));
      return fd_check(
          [body, seed](GraphD& g, const std::vector<TensorD>& leaves) {
            return project(body(g, leaves), seed);
          },
          inputs);
    };
  };

  add_check("add", simple({{3, 4}, {3, 4}}, [](GraphD&, const std::vector<TensorD>& x) {
    return add(x[0], x[1]);
  }));
  add_check("sub", simple({{3, 4}, {3, 4}}, [](GraphD&, const std::vector<TensorD>& x) {
    return sub(x[0], x[1]);
  }));
  add_check("mul", simple({{3, 4}, {3, 4}}, [](GraphD&, const std::vector<TensorD>& x) {
    return mul(x[0], x[1]);
  }));
  add_check("div", simple({{3, 4}, {3, 4}},
                          [](GraphD&, const std::vector<TensorD>& x) { return div(x[0], x[1]); },
                          0.5, 2.0));
  add_check("neg", simple({{3, 4}}, [](GraphD&, const std::vector<TensorD>& x) {
    return neg(x[0]);
  }));
  add_check("add_scalar", simple({{3, 4}}, [](GraphD&, const std::vector<TensorD>& x) {
    return add_scalar(x[0], 0.7);
  }));
  add_check("mul_scalar", simple({{3, 4}}, [](GraphD&, const std::vector<TensorD>& x) {
    return mul_scalar(x[0], -1.3);
  }));
  add_check("sigmoid", simple({{3, 4}}, [](GraphD&, const std::vector<TensorD>& x) {
    return sigmoid(x[0]);
  }));
  add_check("relu", simple({{3, 4}}, [](GraphD&, const std::vector<TensorD>& x) {
    return relu(x[0]);
  }));
  add_check("exp", simple({{3, 4}}, [](GraphD&, const std::vector<TensorD>& x) {
    return ops::exp(x[0]);
  }));
  add_check("log", simple({{3, 4}},
                          [](GraphD&, const std::vector<TensorD>& x) { return ops::log(x[0]); },
                          0.5, 2.0));
  add_check("abs", simple({{3, 4}}, [](GraphD&, const std::vector<TensorD>& x) {
    return ops::abs(x[0]);
  }));
  add_check("matmul", simple({{3, 4}, {4, 5}}, [](GraphD&, const std::vector<TensorD>& x) {
    return matmul(x[0], x[1]);
  }));
  add_check("transpose2d", simple({{3, 5}}, [](GraphD&, const std::vector<TensorD>& x) {
    return transpose2d(x[0]);
  }));
  add_check("bmm", simple({{2, 3, 4}, {2, 4, 5}}, [](GraphD&, const std::vector<TensorD>& x) {
    return bmm(x[0], x[1]);
  }));
  add_check("bmm_nt", simple({{2, 3, 4}, {2, 5, 4}}, [](GraphD&, const std::vector<TensorD>& x) {
    return bmm_nt(x[0], x[1]);
  }));
  add_check("concat", simple({{2, 3}, {2, 4}}, [](GraphD&, const std::vector<TensorD>& x) {
    return concat<D>({x[0], x[1]}, 1);
  }));
  add_check("slice", simple({{4, 6}}, [](GraphD&, const std::vector<TensorD>& x) {
    return slice(x[0], 1, 1, 3);
  }));
  add_check("broadcast_leading", simple({{5}}, [](GraphD&, const std::vector<TensorD>& x) {
    return broadcast_leading(x[0], 3);
  }));
  add_check("expand_middle", simple({{3, 4}}, [](GraphD&, const std::vector<TensorD>& x) {
    return expand_middle(x[0], 5);
  }));
  add_check("reduce_sum_all", simple({{3, 4}}, [](GraphD&, const std::vector<TensorD>& x) {
    return reduce_sum_all(x[0]);
  }));
  add_check("reduce_sum_axis", simple({{3, 4, 2}}, [](GraphD&, const std::vector<TensorD>& x) {
    return reduce_sum(x[0], 1);
  }));
  add_check("mean_all", simple({{3, 4}}, [](GraphD&, const std::vector<TensorD>& x) {
    return mean_all(x[0]);
  }));
  add_check("scale_rows", simple({{4, 3}, {4}}, [](GraphD&, const std::vector<TensorD>& x) {
    return scale_rows(x[0], x[1]);
  }));
  add_check("axis1_weighted_sum",
            simple({{2, 4, 3}, {4}}, [](GraphD&, const std::vector<TensorD>& x) {
              return axis1_weighted_sum(x[0], x[1]);
            }));
  add_check("gather_rows", simple({{5, 3}}, [](GraphD&, const std::vector<TensorD>& x) {
    return gather_rows(x[0], {4, 0, 2, 0});
  }));
  add_check("gather_points", simple({{3, 4, 2}}, [](GraphD&, const std::vector<TensorD>& x) {
    return gather_points(x[0], {2, 0}, {{1, 0, 3, 2}, {3, 2, 1, 0}});
  }));
  add_check("repeat_rows", simple({{3, 2}}, [](GraphD&, const std::vector<TensorD>& x) {
    return repeat_rows(x[0], 3);
  }));
  add_check("swap01", simple({{2, 3, 4}}, [](GraphD&, const std::vector<TensorD>& x) {
    return swap01(x[0]);
  }));
  add_check("softmax", simple({{3, 5}}, [](GraphD&, const std::vector<TensorD>& x) {
    return softmax(x[0], 1);
  }, -2.0, 2.0));
  add_check("l2_normalize", simple({{3, 4}},
                                   [](GraphD&, const std::vector<TensorD>& x) {
                                     return l2_normalize(x[0]);
                                   },
                                   0.3, 1.5));
  add_check("layernorm", simple({{4, 6}, {6}, {6}}, [](GraphD&, const std::vector<TensorD>& x) {
    return layernorm(x[0], x[1], x[2]);
  }));
  // Locations keep fractional parts away from the lattice so the finite
  // difference never crosses a cell boundary kink.
  add_check("bilinear_gather", [](uint64_t seed) {
    Rng rng(seed, Rng::hash_name("inputs"));
    TensorD grid = rand_tensor(rng, {5, 6, 3});
    TensorD locs = TensorD::zeros({7, 2});
    for (int i = 0; i < 7; ++i) {
      locs.ptr()[i * 2 + 0] = rng.uniform_int(0, 4) + rng.uniform(0.1, 0.9);
      locs.ptr()[i * 2 + 1] = rng.uniform_int(0, 3) + rng.uniform(0.1, 0.9);
    }
    return fd_check(
        [seed](GraphD&, const std::vector<TensorD>& x) {
          return project(ops::bilinear_gather(x[0], x[1]), seed);
        },
        {grid, locs});
  });
  add_check("bce_with_logits", [](uint64_t seed) {
    Rng rng(seed, Rng::hash_name("inputs"));
    TensorD z = rand_tensor(rng, {3, 4}, -2.0, 2.0);
    TensorD y = TensorD::zeros({3, 4});
    for (int64_t i = 0; i < y.size(); ++i) y.ptr()[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    return fd_check(
        [y, seed](GraphD&, const std::vector<TensorD>& x) {
          return project(ops::bce_with_logits(x[0], y), seed);
        },
        {z});
  });
  add_check("focal_bce_with_logits", [](uint64_t seed) {
    Rng rng(seed, Rng::hash_name("inputs"));
    TensorD z = rand_tensor(rng, {3, 4}, -2.0, 2.0);
    TensorD y = TensorD::zeros({3, 4});
    for (int64_t i = 0; i < y.size(); ++i) y.ptr()[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    return fd_check(
        [y, seed](GraphD&, const std::vector<TensorD>& x) {
          return project(ops::focal_bce_with_logits(x[0], y, 2.0, 0.25), seed);
        },
        {z});
  });
  return checks;
}

// End-to-end: the full weighted training loss of one synthetic scene on a
// tiny model, differentiated w.r.t. a random subset of parameter scalars.
// Matching and anchor masks are frozen at the base point; both are discrete
// and only piecewise-constant in the parameters.
inline GradCheckEntry e2e_check(double tol, int coords = 16, double h = 1e-5) {
  RunConfig cfg;
  cfg.run_seed = 42;
  cfg.dtype = "f64";
  cfg.decoder.elements = 2;
  cfg.decoder.points = 4;
  cfg.decoder.channels = 8;
  cfg.decoder.layers = 2;
  cfg.decoder.sample_points = 4;
  cfg.decoder.self_attn_heads = 2;
  cfg.range = {-2.0, 2.0, -2.0, 2.0};
  cfg.synth.grid_h = 8;
  cfg.synth.grid_w = 8;
  cfg.synth.cell_size = 0.5;
  cfg.synth.noise_sigma = 0.05;
  cfg.synth.counts = {{MapClass::pedestrian_crossing, {1, 1}}, {MapClass::lane_divider, {1, 1}},
                      {MapClass::road_boundary, {0, 0}}};
  cfg.validate();

  Model<double> model(cfg);
  ParamStore<double> store;
  model.init_params(store);

  DatasetEntry<double> entry;
  entry.scene = generate_scene(7, cfg.synth, cfg.range, cfg.decoder.elements);
  entry.scene.id = "fd";
  entry.seed = 7;
  entry.gt = prepare_ground_truth<double>(entry.scene, cfg.range, cfg.decoder.points,
                                          cfg.synth.grid_h, cfg.synth.grid_w);
  entry.occupancy = class_occupancy(entry.scene, cfg.synth.grid_h, cfg.synth.grid_w, cfg.range);

  // Base pass: capture assignments and the effective anchor masks.
  std::vector<Assignment> assignments;
  std::vector<std::vector<double>> masks;
  {
    Graph<double> g;
    ParamAccess<double> P{&store, &g};
    std::vector<LayerCapture<double>> capture;
    Tensor<double> bev = model.encode(P, entry);
    ForwardOptions<double> opts;
    opts.capture = &capture;
    model.forward(P, bev, opts);
    for (const auto& cap : capture) masks.push_back(cap.effective_mask);
    store.zero_grads();

    Graph<double> g2;
    ParamAccess<double> P2{&store, &g2};
    SceneLossResult<double> sl = scene_loss(model, P2, entry);
    assignments = sl.assignments;
    store.zero_grads();
  }

  auto loss_value = [&]() {
    Graph<double> g;
    ParamAccess<double> P{&store, &g};
    SceneLossResult<double> sl = scene_loss(model, P, entry, &assignments, &masks);
    double v = sl.total.item();
    store.zero_grads();
    return v;
  };

  // Analytic gradients at the base point.
  std::map<std::string, std::vector<double>> grads;
  {
    Graph<double> g;
    ParamAccess<double> P{&store, &g};
    SceneLossResult<double> sl = scene_loss(model, P, entry, &assignments, &masks);
    g.backward(sl.total);
    store.pull_grads(g);
    for (const auto& [name, p] : store.params()) {
      grads[name] = p.has_grad ? p.grad : std::vector<double>(p.value->size(), 0.0);
    }
    store.zero_grads();
  }

  // Random parameter coordinates.
  std::vector<std::pair<std::string, size_t>> flat;
  for (const auto& [name, p] : store.params()) {
    for (size_t i = 0; i < p.value->size(); ++i) flat.emplace_back(name, i);
  }
  Rng rng(123, Rng::hash_name("e2e-coords"));
  GradCheckEntry entry_report;
  entry_report.name = "end_to_end_loss";
  entry_report.tolerance = tol;
  for (int c = 0; c < coords; ++c) {
    auto [name, idx] = flat[static_cast<size_t>(rng.next_u64() % flat.size())];
    auto& value = (*store.params().at(name).value)[idx];
    double saved = value;
    value = saved + h;
    double fp = loss_value();
    value = saved - h;
    double fm = loss_value();
    value = saved;
    double num = (fp - fm) / (2 * h);
    double ana = grads[name][idx];
    double rel = std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), 1e-8});
    entry_report.max_rel_err = std::max(entry_report.max_rel_err, rel);
  }
  return entry_report;
}

}  // namespace gradcheck_detail

inline GradCheckReport run_gradcheck(int seeds, double per_op_tol, double e2e_tol) {
  GradCheckReport report;
  for (auto& [name, fn] : gradcheck_detail::op_checks()) {
    GradCheckEntry e;
    e.name = name;
    e.tolerance = per_op_tol;
    for (int s = 0; s < seeds; ++s) {
      FdReport r = fn(static_cast<uint64_t>(s) + 1);
      e.max_rel_err = std::max(e.max_rel_err, r.max_rel_err);
    }
    report.entries.push_back(e);
  }
  report.entries.push_back(gradcheck_detail::e2e_check(e2e_tol));
  return report;
}

}  // namespace himap
