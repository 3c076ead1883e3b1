// Command-line front end. Links the public C API only.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "himap/himap.h"

namespace {

int status_to_exit(himap_status s) { return static_cast<int>(s); }

void report_error(himap_status s) {
  if (s != HIMAP_OK) std::fprintf(stderr, "error: %s\n", himap_last_error());
}

// Relative output paths resolve under HIMAP_OUT_ROOT when it is set.
std::string resolve_out(const std::string& path) {
  const char* root = std::getenv("HIMAP_OUT_ROOT");
  if (!root || !*root) return path;
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(root) / p).string();
}

struct ConfigHandle {
  himap_config* cfg = nullptr;
  ~ConfigHandle() { himap_config_destroy(cfg); }
};

himap_status load_config(const std::string& config_path, bool has_seed, uint64_t seed,
                         ConfigHandle& out) {
  himap_status s = config_path.empty() ? himap_config_create(nullptr, &out.cfg)
                                       : himap_config_load_file(config_path.c_str(), &out.cfg);
  if (s != HIMAP_OK) return s;
  if (has_seed) s = himap_config_set_seed(out.cfg, seed);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid vectorized-map decoder: data generation, training, evaluation"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  uint64_t seed = 0;
  bool has_seed = false;
  app.add_option("--config", config_path, "config JSON file (defaults when omitted)");
  app.add_option("--seed", seed, "override the run seed")->each([&](const std::string&) {
    has_seed = true;
  });

  auto* gen = app.add_subcommand("generate", "write synthetic scenes and a manifest");
  int n_scenes = 16;
  std::string gen_out = "data";
  bool force = false;
  gen->add_option("-n,--n-scenes", n_scenes, "number of scenes");
  gen->add_option("--out", gen_out, "output directory");
  gen->add_flag("--force", force, "overwrite an existing manifest");

  auto* train = app.add_subcommand("train", "train on a generated dataset");
  std::string train_data = "data";
  std::string train_out = "run";
  train->add_option("--data", train_data, "dataset directory (with manifest.jsonl)");
  train->add_option("--out", train_out, "output directory for checkpoints and metrics");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_data = "data", setting = "easy";
  int workers = 1;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--data", eval_data, "dataset directory");
  eval->add_option("--setting", setting, "easy|hard threshold set");
  eval->add_option("--workers", workers, "parallel chamfer workers");

  auto* gradcheck = app.add_subcommand("gradcheck", "run the gradient-check suite");

  auto* inspect = app.add_subcommand("inspect", "dump per-layer anchors, masks and attention");
  std::string ins_ckpt, ins_scene, ins_out = "inspect";
  int element_index = 0;
  inspect->add_option("--checkpoint", ins_ckpt, "checkpoint file")->required();
  inspect->add_option("--scene", ins_scene, "scene JSON file")->required();
  inspect->add_option("--element", element_index, "element slot index");
  inspect->add_option("--out", ins_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  himap_status s = HIMAP_OK;
  if (*gen) {
    ConfigHandle cfg;
    s = load_config(config_path, has_seed, seed, cfg);
    if (s == HIMAP_OK) s = himap_generate(cfg.cfg, n_scenes, resolve_out(gen_out).c_str(), force);
  } else if (*train) {
    ConfigHandle cfg;
    s = load_config(config_path, has_seed, seed, cfg);
    if (s == HIMAP_OK) s = himap_train(cfg.cfg, train_data.c_str(), resolve_out(train_out).c_str());
  } else if (*eval) {
    char* report = nullptr;
    s = himap_eval(eval_ckpt.c_str(), eval_data.c_str(), setting.c_str(), workers, &report);
    if (report) {
      std::fputs(report, stdout);
      himap_string_free(report);
    }
  } else if (*gradcheck) {
    ConfigHandle cfg;
    s = load_config(config_path, has_seed, seed, cfg);
    if (s == HIMAP_OK) {
      char* report = nullptr;
      s = himap_gradcheck(cfg.cfg, &report);
      if (report) {
        std::fputs(report, stdout);
        himap_string_free(report);
      }
    }
  } else if (*inspect) {
    s = himap_inspect(ins_ckpt.c_str(), ins_scene.c_str(), element_index,
                      resolve_out(ins_out).c_str());
  }

  report_error(s);
  return status_to_exit(s);
}
