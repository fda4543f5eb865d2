#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "ule/common.hpp"
#include "ule/nn.hpp"
#include "ule/rng.hpp"

using namespace ule;

namespace {

ModelConfig tiny_linear() {
  ModelConfig cfg;
  cfg.arch = Arch::linear;
  cfg.input_h = 1;
  cfg.input_w = 2;
  cfg.input_c = 1;
  cfg.num_classes = 2;
  return cfg;
}

ModelConfig tiny_mlp() {
  ModelConfig cfg;
  cfg.arch = Arch::mlp;
  cfg.input_h = 2;
  cfg.input_w = 2;
  cfg.input_c = 1;
  cfg.hidden_width = 3;
  cfg.num_classes = 3;
  return cfg;
}

}  // namespace

TEST_CASE("init_params") {
  const ModelConfig cfg = tiny_mlp();
  const Params a = init_params(cfg, 5);
  const Params b = init_params(cfg, 5);
  CHECK(a.v == b.v);  // same seed, identical params
  CHECK(static_cast<int>(a.v.size()) == cfg.param_count());

  // biases exactly zero
  const int d = cfg.input_dim();
  const int h = cfg.hidden_width;
  for (int j = 0; j < h; ++j) CHECK(a.v[h * d + j] == 0.0);
  for (int j = 0; j < cfg.num_classes; ++j)
    CHECK(a.v[h * d + h + cfg.num_classes * h + j] == 0.0);

  // weights inside the Xavier bound
  const double bound1 = std::sqrt(6.0 / (d + h));
  for (int i = 0; i < h * d; ++i) CHECK(std::fabs(a.v[i]) <= bound1);

  const Params c = init_params(cfg, 6);
  CHECK(a.v != c.v);
}

TEST_CASE("forward reproduces a hand-computed linear case") {
  const ModelConfig cfg = tiny_linear();
  Params p;
  p.v = {1.0, -2.0, 0.5, 0.25, 0.1, -0.3};  // W rows then b
  const std::vector<double> x = {0.4, 0.7};
  const std::vector<double> logits = forward(cfg, p, x, 1);
  REQUIRE(logits.size() == 2);
  CHECK(logits[0] == doctest::Approx(-0.9).epsilon(1e-12));
  CHECK(logits[1] == doctest::Approx(0.075).epsilon(1e-12));

  // pure: same call, same result
  CHECK(forward(cfg, p, x, 1) == logits);
}

TEST_CASE("zero params give uniform softmax and loss ln(M)") {
  const ModelConfig cfg = tiny_mlp();
  Params p;
  p.v.assign(cfg.param_count(), 0.0);
  Batch batch;
  batch.count = 2;
  batch.dim = cfg.input_dim();
  batch.x = {0.1, 0.9, 0.4, 0.2, 0.8, 0.3, 0.6, 0.5};
  batch.labels = {0, 2};

  const std::vector<double> logits = forward(cfg, p, batch.x, 2);
  for (double v : logits) CHECK(v == 0.0);

  Grads g;
  const double loss = loss_and_grads(cfg, p, batch, false, g);
  CHECK(loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("softmax probabilities sum to one (bias-gradient identity)") {
  // sum_j dL/db_j = mean_i (sum_j p_ij - 1), so it vanishes iff softmax is
  // normalized per sample.
  const ModelConfig cfg = tiny_mlp();
  Params p = init_params(cfg, 3);
  Rng rng(8);
  for (double& v : p.v) v += 0.3 * rng.normal();
  Batch batch;
  batch.count = 5;
  batch.dim = cfg.input_dim();
  batch.x.resize(5 * 4);
  for (double& v : batch.x) v = rng.uniform();
  batch.labels = {0, 1, 2, 1, 0};

  Grads g;
  loss_and_grads(cfg, p, batch, false, g);
  const int d = cfg.input_dim();
  const int h = cfg.hidden_width;
  const size_t b2 = static_cast<size_t>(h) * d + h + static_cast<size_t>(3) * h;
  double sum = 0.0;
  for (int j = 0; j < 3; ++j) sum += g.params[b2 + j];
  CHECK(std::fabs(sum) <= 1e-12);
}

TEST_CASE("saturated correct logit has near-zero gradient") {
  const ModelConfig cfg = tiny_linear();
  Params p;
  p.v = {40.0, 40.0, -40.0, -40.0, 0.0, 0.0};
  Batch batch;
  batch.count = 1;
  batch.dim = 2;
  batch.x = {1.0, 1.0};
  batch.labels = {0};  // logit 80 vs -80: softmax saturated at the label
  Grads g;
  const double loss = loss_and_grads(cfg, p, batch, false, g);
  CHECK(loss <= 1e-12);
  for (double v : g.params) CHECK(std::fabs(v) <= 1e-12);
}

TEST_CASE("loss is invariant under batch permutation") {
  const ModelConfig cfg = tiny_mlp();
  Params p = init_params(cfg, 4);
  Batch batch;
  batch.count = 3;
  batch.dim = cfg.input_dim();
  batch.x = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.1, 0.2, 0.3};
  batch.labels = {0, 1, 2};
  Grads g;
  const double loss = loss_and_grads(cfg, p, batch, false, g);

  Batch rev = batch;
  for (int i = 0; i < 3; ++i) {
    std::copy(batch.x.begin() + (2 - i) * 4, batch.x.begin() + (3 - i) * 4,
              rev.x.begin() + i * 4);
    rev.labels[i] = batch.labels[2 - i];
  }
  const double loss_rev = loss_and_grads(cfg, p, rev, false, g);
  CHECK(loss == doctest::Approx(loss_rev).epsilon(1e-12));
}

TEST_CASE("NaN inputs are rejected") {
  const ModelConfig cfg = tiny_linear();
  Params p = init_params(cfg, 1);
  Batch batch;
  batch.count = 1;
  batch.dim = 2;
  batch.x = {0.5, std::nan("")};
  batch.labels = {0};
  Grads g;
  CHECK_THROWS_AS(loss_and_grads(cfg, p, batch, false, g), numeric_error);
}

TEST_CASE("sgd_step") {
  SUBCASE("momentum 0, weight decay 0 is plain gradient descent") {
    Params p;
    p.v = {1.0, 2.0};
    SgdState st;
    sgd_step(p, {0.5, -1.0}, st, 0.1, 0.0, 0.0);
    CHECK(p.v[0] == doctest::Approx(0.95).epsilon(1e-15));
    CHECK(p.v[1] == doctest::Approx(2.1).epsilon(1e-15));
  }

  SUBCASE("zero grads, zero velocity, zero wd is a fixed point") {
    Params p;
    p.v = {1.5, -2.5};
    SgdState st;
    sgd_step(p, {0.0, 0.0}, st, 0.1, 0.9, 0.0);
    CHECK(p.v == std::vector<double>{1.5, -2.5});
  }

  SUBCASE("two steps with constant grad displace by 0.29g") {
    Params p;
    p.v = {0.0};
    SgdState st;
    const double g = 2.0;
    sgd_step(p, {g}, st, 0.1, 0.9, 0.0);
    sgd_step(p, {g}, st, 0.1, 0.9, 0.0);
    CHECK(p.v[0] == doctest::Approx(-0.29 * g).epsilon(1e-12));
  }

  SUBCASE("zero lr is the identity") {
    Params p;
    p.v = {3.0, 4.0};
    SgdState st;
    sgd_step(p, {1.0, 1.0}, st, 0.0, 0.9, 5e-4);
    CHECK(p.v == std::vector<double>{3.0, 4.0});
  }

  SUBCASE("layout mismatch") {
    Params p;
    p.v = {1.0};
    SgdState st;
    CHECK_THROWS_AS(sgd_step(p, {1.0, 2.0}, st, 0.1, 0.9, 0.0), shape_error);
  }
}

TEST_CASE("param_distance") {
  Params a, b;
  a.v = {1.0, 2.0};
  b.v = {1.0, 2.0};
  CHECK(param_distance(a, b) == 0.0);
  b.v = {4.0, 6.0};  // difference (3,4)
  CHECK(param_distance(a, b) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(param_distance(a, b) == param_distance(b, a));
  Params c;
  c.v = {1.0};
  CHECK_THROWS_AS(param_distance(a, c), shape_error);
}

TEST_CASE("checkpoint round trip and digest guard") {
  const ModelConfig cfg = tiny_mlp();
  const Params p = init_params(cfg, 77);
  const auto path = std::filesystem::temp_directory_path() / "ule_ckpt_test.ulep";
  save_checkpoint(path, cfg, p);
  const auto [cfg2, p2] = load_checkpoint(path);
  CHECK(cfg2.digest() == cfg.digest());
  CHECK(p2.v == p.v);

  // corrupt the stored hidden width: digest no longer matches
  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  }
  bytes[20] = 9;
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_AS(load_checkpoint(path), io_error);
  std::filesystem::remove(path);
}

TEST_CASE("finite differences confirm analytic gradients (quick slice)") {
  const GradCheckReport report = gradcheck(10, 2024);
  CHECK(report.instances == 10);
  CHECK(report.max_rel_param <= 1e-4);
  CHECK(report.max_rel_input <= 1e-4);
}
