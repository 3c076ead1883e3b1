#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "core/checkpoint.hpp"
#include "core/optim.hpp"

using namespace himap;
using TensorD = Tensor<double>;

namespace {
ParamStore<double> store_with(const std::string& name, std::vector<int> shape,
                              std::vector<double> values) {
  ParamStore<double> s;
  size_t i = 0;
  s.create(name, shape, [&](Rng&) { return values[i++]; }, 1);
  return s;
}
}  // namespace

TEST_CASE("zero gradient and zero decay leave parameters unchanged") {
  auto s = store_with("w", {3}, {1.0, -2.0, 0.5});
  Graph<double> g;
  TensorD w = s.bind(g, "w");
  g.backward(ops::mul_scalar(ops::reduce_sum_all(w), 0.0));
  s.pull_grads(g);
  s.adamw_step(0.01, 0.0);
  TensorD after = s.tensor("w");
  CHECK(after.ptr()[0] == 1.0);
  CHECK(after.ptr()[1] == -2.0);
  CHECK(after.ptr()[2] == 0.5);
}

TEST_CASE("first adamw step from zero moments matches the closed form") {
  // p1 = p0 - lr*wd*p0 - lr * mhat / (sqrt(vhat) + eps)
  // with zero moments: mhat = g, vhat = g^2
  double p0 = 2.0, grad = 0.4, lr = 1e-3, wd = 0.01, eps = 1e-8;
  auto s = store_with("w", {1}, {p0});
  Graph<double> g;
  TensorD w = s.bind(g, "w");
  g.backward(ops::mul_scalar(ops::reduce_sum_all(w), grad));
  s.pull_grads(g);
  s.adamw_step(lr, wd);
  double expect = p0 - lr * wd * p0 - lr * grad / (std::abs(grad) + eps);
  CHECK(s.tensor("w").item() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("zero gradient with weight decay applies pure decoupled decay") {
  double lr = 0.002, wd = 0.01;
  auto s = store_with("w", {2}, {3.0, -1.5});
  Graph<double> g;
  TensorD w = s.bind(g, "w");
  g.backward(ops::mul_scalar(ops::reduce_sum_all(w), 0.0));
  s.pull_grads(g);
  s.adamw_step(lr, wd);
  CHECK(s.tensor("w").ptr()[0] == doctest::Approx(3.0 * (1 - lr * wd)).epsilon(1e-12));
  CHECK(s.tensor("w").ptr()[1] == doctest::Approx(-1.5 * (1 - lr * wd)).epsilon(1e-12));
}

TEST_CASE("parameters without gradients are skipped and reported") {
  ParamStore<double> s;
  s.create("a", {1}, [](Rng&) { return 1.0; }, 1);
  s.create("b", {1}, [](Rng&) { return 2.0; }, 1);
  Graph<double> g;
  TensorD a = s.bind(g, "a");
  g.backward(ops::reduce_sum_all(a));
  s.pull_grads(g);
  auto skipped = s.adamw_step(0.1, 0.5);
  REQUIRE(skipped.size() == 1);
  CHECK(skipped[0] == "b");
  CHECK(s.tensor("b").item() == 2.0);  // untouched, no decay either
  CHECK(s.tensor("a").item() != 1.0);
}

TEST_CASE("binding twice in one graph reuses the leaf") {
  auto s = store_with("w", {2}, {1.0, 2.0});
  Graph<double> g;
  TensorD w1 = s.bind(g, "w");
  TensorD w2 = s.bind(g, "w");
  CHECK(w1.node == w2.node);
  g.backward(ops::reduce_sum_all(ops::add(w1, w2)));
  s.pull_grads(g);
  CHECK(s.params().at("w").grad[0] == 2.0);
}

TEST_CASE("cosine schedule endpoints and midpoint") {
  CHECK(cosine_lr(0, 100, 6e-4, 0.0) == doctest::Approx(6e-4));
  CHECK(cosine_lr(100, 100, 6e-4, 1e-5) == doctest::Approx(1e-5));
  CHECK(cosine_lr(50, 100, 6e-4, 2e-4) == doctest::Approx(0.5 * (6e-4 + 2e-4)));
  CHECK_THROWS_AS(cosine_lr(0, 0, 1e-3, 0.0), Error);
  CHECK_THROWS_AS(cosine_lr(5, 4, 1e-3, 0.0), Error);
}

TEST_CASE("checkpoint round trip preserves values and shapes") {
  namespace fs = std::filesystem;
  ParamStore<double> s;
  Rng rng(3, 1);
  s.create("alpha", {2, 3}, [&](Rng& r) { return r.uniform(-1, 1); }, 1);
  s.create("beta", {4}, [&](Rng& r) { return r.uniform(-1, 1); }, 1);
  fs::path path = fs::temp_directory_path() / "himap_ckpt_test.ckpt";
  save_checkpoint(s, "{\"k\":1}", path.string());

  ParamStore<double> loaded;
  std::string cfg = load_checkpoint(loaded, path.string());
  CHECK(cfg == "{\"k\":1}");
  REQUIRE(loaded.has("alpha"));
  REQUIRE(loaded.has("beta"));
  CHECK(loaded.params().at("alpha").shape == std::vector<int>{2, 3});
  for (int64_t i = 0; i < 6; ++i) {
    // values pass through float32
    CHECK(loaded.tensor("alpha").ptr()[i] ==
          doctest::Approx(s.tensor("alpha").ptr()[i]).epsilon(1e-7));
  }
  fs::remove(path);
}

TEST_CASE("checkpoint loader rejects a bad magic") {
  namespace fs = std::filesystem;
  fs::path path = fs::temp_directory_path() / "himap_bad_ckpt.ckpt";
  {
    std::ofstream out(path);
    out << "NOT-A-CHECKPOINT\n";
  }
  ParamStore<double> s;
  CHECK_THROWS_AS(load_checkpoint(s, path.string()), Error);
  fs::remove(path);
}
