#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "core/fd_check.hpp"
#include "core/scene_io.hpp"
#include "core/synth.hpp"

using namespace himap;
using TensorD = Tensor<double>;
using GraphD = Graph<double>;

namespace {
const PerceptionRange kDeskRange{-6, 6, -3, 3};
}

TEST_CASE("scene generation is a pure function of the seed") {
  SynthConfig cfg;
  Scene a = generate_scene(17, cfg, kDeskRange, 10);
  Scene b = generate_scene(17, cfg, kDeskRange, 10);
  REQUIRE(a.elements.size() == b.elements.size());
  for (size_t i = 0; i < a.elements.size(); ++i) {
    CHECK(a.elements[i].cls == b.elements[i].cls);
    CHECK(a.elements[i].closed == b.elements[i].closed);
    REQUIRE(a.elements[i].points.size() == b.elements[i].points.size());
    for (size_t j = 0; j < a.elements[i].points.size(); ++j) {
      CHECK(a.elements[i].points[j].x == b.elements[i].points[j].x);
      CHECK(a.elements[i].points[j].y == b.elements[i].points[j].y);
    }
  }
  Scene c = generate_scene(18, cfg, kDeskRange, 10);
  bool differs = c.elements.size() != a.elements.size();
  if (!differs && !c.elements.empty() && !a.elements.empty()) {
    differs = c.elements[0].points[0].x != a.elements[0].points[0].x;
  }
  CHECK(differs);
}

TEST_CASE("fixed per-class counts give exactly that many elements") {
  SynthConfig cfg;
  cfg.counts = {{MapClass::pedestrian_crossing, {2, 2}},
                {MapClass::lane_divider, {2, 2}},
                {MapClass::road_boundary, {2, 2}}};
  Scene s = generate_scene(5, cfg, kDeskRange, 50);
  CHECK(s.elements.size() == 6);
  int per_class[3] = {0, 0, 0};
  for (const auto& e : s.elements) per_class[static_cast<int>(e.cls)]++;
  for (int c = 0; c < 3; ++c) CHECK(per_class[c] == 2);
}

TEST_CASE("all generated points lie inside the perception range") {
  SynthConfig cfg;
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    Scene s = generate_scene(seed, cfg, kDeskRange, 10);
    for (const auto& e : s.elements) {
      CHECK(e.points.size() >= 2);
      for (Vec2 p : e.points) CHECK(kDeskRange.contains(p));
    }
  }
}

TEST_CASE("generation respects the element cap") {
  SynthConfig cfg;
  cfg.counts = {{MapClass::pedestrian_crossing, {3, 3}},
                {MapClass::lane_divider, {3, 3}},
                {MapClass::road_boundary, {3, 3}}};
  Scene s = generate_scene(3, cfg, kDeskRange, 4);
  CHECK(s.elements.size() <= 4);
}

TEST_CASE("dividers are open and monotone in y, crossings are closed rectangles") {
  SynthConfig cfg;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    Scene s = generate_scene(seed, cfg, kDeskRange, 10);
    for (const auto& e : s.elements) {
      if (e.cls == MapClass::pedestrian_crossing) {
        CHECK(e.closed);
        CHECK(e.points.size() == 4);
      } else {
        CHECK_FALSE(e.closed);
        for (size_t j = 0; j + 1 < e.points.size(); ++j)
          CHECK(e.points[j].y < e.points[j + 1].y);
      }
    }
  }
}

TEST_CASE("zero projection and zero noise leave only the sinusoidal embedding") {
  int h = 6, w = 8, c = 8;
  SynthConfig cfg;
  Scene s = generate_scene(2, cfg, kDeskRange, 10);
  std::vector<uint8_t> occ = class_occupancy(s, h, w, kDeskRange);
  TensorD proj_w = TensorD::zeros({3, c});
  TensorD proj_b = TensorD::zeros({c});
  TensorD sinus = ops::sinusoidal_embedding_2d<double>(h, w, c);
  TensorD bev = encode_bev<double>(occ, h, w, proj_w, proj_b, sinus, 0.0, 1);
  for (int64_t i = 0; i < bev.size(); ++i) CHECK(bev.ptr()[i] == sinus.ptr()[i]);
}

TEST_CASE("scenes differing in one element differ only near that element") {
  int h = 10, w = 20, c = 4;
  SynthConfig cfg;
  Scene base = generate_scene(4, cfg, kDeskRange, 10);
  Scene more = base;
  MapElement extra;
  extra.cls = MapClass::lane_divider;
  extra.points = {{-5.0, -2.5}, {-4.5, 2.5}};
  more.elements.push_back(extra);

  Rng rng(1, 2);
  TensorD proj_w = TensorD::zeros({3, c});
  for (int64_t i = 0; i < proj_w.size(); ++i) proj_w.ptr()[i] = rng.uniform(-1, 1);
  TensorD proj_b = TensorD::zeros({c});
  TensorD sinus = ops::sinusoidal_embedding_2d<double>(h, w, c);

  TensorD bev_a = encode_bev<double>(class_occupancy(base, h, w, kDeskRange), h, w, proj_w,
                                     proj_b, sinus, 0.0, 1);
  TensorD bev_b = encode_bev<double>(class_occupancy(more, h, w, kDeskRange), h, w, proj_w,
                                     proj_b, sinus, 0.0, 1);
  std::vector<uint8_t> extra_mask = rasterize(extra, h, w, kDeskRange);
  for (int cell = 0; cell < h * w; ++cell) {
    bool same = true;
    for (int k = 0; k < c; ++k)
      same = same && bev_a.ptr()[cell * c + k] == bev_b.ptr()[cell * c + k];
    if (!extra_mask[static_cast<size_t>(cell)]) CHECK(same);
    else CHECK_FALSE(same);
  }
}

TEST_CASE("encoder projection gradient passes finite differences") {
  int h = 4, w = 6, c = 4;
  SynthConfig cfg;
  Scene s = generate_scene(9, cfg, kDeskRange, 10);
  std::vector<uint8_t> occ = class_occupancy(s, h, w, kDeskRange);
  TensorD sinus = ops::sinusoidal_embedding_2d<double>(h, w, c);
  Rng rng(2, 1);
  TensorD w0 = TensorD::zeros({3, c});
  for (int64_t i = 0; i < w0.size(); ++i) w0.ptr()[i] = rng.uniform(-1, 1);
  TensorD b0 = TensorD::zeros({c});
  FdReport rep = fd_check(
      [&](GraphD&, const std::vector<TensorD>& in) {
        TensorD bev = encode_bev<double>(occ, h, w, in[0], in[1], sinus, 0.1, 7);
        return ops::mean_all(ops::mul(bev, bev));
      },
      {w0, b0});
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("noise is deterministic per seed") {
  int h = 4, w = 4, c = 4;
  SynthConfig cfg;
  Scene s = generate_scene(1, cfg, kDeskRange, 10);
  std::vector<uint8_t> occ = class_occupancy(s, h, w, kDeskRange);
  TensorD pw = TensorD::zeros({3, c});
  TensorD pb = TensorD::zeros({c});
  TensorD sinus = ops::sinusoidal_embedding_2d<double>(h, w, c);
  TensorD a = encode_bev<double>(occ, h, w, pw, pb, sinus, 0.5, 99);
  TensorD b = encode_bev<double>(occ, h, w, pw, pb, sinus, 0.5, 99);
  TensorD d = encode_bev<double>(occ, h, w, pw, pb, sinus, 0.5, 100);
  bool same = true, diff = false;
  for (int64_t i = 0; i < a.size(); ++i) {
    same = same && a.ptr()[i] == b.ptr()[i];
    diff = diff || a.ptr()[i] != d.ptr()[i];
  }
  CHECK(same);
  CHECK(diff);
}

TEST_CASE("scene json round trip preserves everything") {
  SynthConfig cfg;
  Scene s = generate_scene(21, cfg, kDeskRange, 10);
  s.id = "roundtrip";
  Scene back = scene_from_json(scene_to_json(s), kDeskRange);
  CHECK(back.id == s.id);
  REQUIRE(back.elements.size() == s.elements.size());
  for (size_t i = 0; i < s.elements.size(); ++i) {
    CHECK(back.elements[i].cls == s.elements[i].cls);
    CHECK(back.elements[i].closed == s.elements[i].closed);
    REQUIRE(back.elements[i].points.size() == s.elements[i].points.size());
    for (size_t j = 0; j < s.elements[i].points.size(); ++j) {
      CHECK(back.elements[i].points[j].x == doctest::Approx(s.elements[i].points[j].x));
      CHECK(back.elements[i].points[j].y == doctest::Approx(s.elements[i].points[j].y));
    }
  }
}

TEST_CASE("scene loader clips out-of-range points and rejects bad input") {
  std::string json = R"({"id":"t","elements":[
    {"class":1,"closed":false,"points":[[100.0,0.0],[0.0,100.0]]}]})";
  Scene s = scene_from_json(json, kDeskRange);
  CHECK(s.elements[0].points[0].x == 6.0);
  CHECK(s.elements[0].points[1].y == 3.0);

  CHECK_THROWS_AS(scene_from_json("{not json", kDeskRange), Error);
  CHECK_THROWS_AS(
      scene_from_json(R"({"id":"t","elements":[{"class":7,"closed":false,"points":[[0,0],[1,1]]}]})",
                      kDeskRange),
      Error);
  CHECK_THROWS_AS(
      scene_from_json(R"({"id":"t","elements":[{"class":1,"closed":false,"points":[[0,0]]}]})",
                      kDeskRange),
      Error);
}

TEST_CASE("closed elements drop a repeated closing point on load") {
  std::string json = R"({"id":"t","elements":[
    {"class":0,"closed":true,"points":[[0,0],[1,0],[1,1],[0,1],[0,0]]}]})";
  Scene s = scene_from_json(json, kDeskRange);
  CHECK(s.elements[0].points.size() == 4);
}

TEST_CASE("manifest round trip") {
  namespace fs = std::filesystem;
  fs::path path = fs::temp_directory_path() / "himap_manifest_test.jsonl";
  std::vector<ManifestEntry> entries{{7, "scene_a", "scenes/scene_a.json"},
                                     {9, "scene_b", "scenes/scene_b.json"}};
  write_manifest(entries, path.string());
  auto back = read_manifest(path.string());
  REQUIRE(back.size() == 2);
  CHECK(back[0].seed == 7);
  CHECK(back[1].scene_id == "scene_b");
  CHECK(back[1].file == "scenes/scene_b.json");
  fs::remove(path);
}
