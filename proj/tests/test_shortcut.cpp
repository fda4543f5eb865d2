#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracle.hpp"
#include "ule/common.hpp"
#include "ule/data_io.hpp"
#include "ule/parallel.hpp"
#include "ule/rng.hpp"
#include "ule/shortcut.hpp"

using namespace ule;

namespace {

Image gray(std::vector<double> pixels, int h, int w) {
  Image img = Image::zeros(h, w, 1);
  img.values = std::move(pixels);
  return img;
}

Image rgb1x1(double r, double g, double b) {
  Image img = Image::zeros(1, 1, 3);
  img.values = {r, g, b};
  return img;
}

CornerColor color_bits(unsigned bits, int channels) {
  return CornerColor::from_index(bits, channels);
}

}  // namespace

TEST_CASE("corner color index round trip, channel 0 is the MSB") {
  const CornerColor c = CornerColor::from_index(0b011, 3);
  CHECK(c.channels == std::vector<uint8_t>{0, 1, 1});
  CHECK(c.to_index() == 3);
  for (unsigned bits = 0; bits < 8; ++bits)
    CHECK(CornerColor::from_index(bits, 3).to_index() == bits);
}

TEST_CASE("pixel_distance") {
  const Image img = rgb1x1(0.2, 0.9, 0.5);
  CHECK(pixel_distance(img, {0, 0}, color_bits(0b011, 3)) ==
        doctest::Approx(0.8).epsilon(1e-12));

  // pixel already equal to the color
  const Image hit = rgb1x1(0.0, 1.0, 1.0);
  CHECK(pixel_distance(hit, {0, 0}, color_bits(0b011, 3)) == 0.0);

  const Image g = gray({0.8}, 1, 1);
  CHECK(pixel_distance(g, {0, 0}, color_bits(0, 1)) == doctest::Approx(0.8));

  CHECK_THROWS_AS(pixel_distance(g, {1, 0}, color_bits(0, 1)), index_error);
  CHECK_THROWS_AS(pixel_distance(g, {0, 0}, color_bits(0, 3)), shape_error);
}

TEST_CASE("class_objective matches hand computation and the naive oracle") {
  const std::vector<Image> images = {gray({0.8}, 1, 1), gray({0.6}, 1, 1)};

  // s = (0.8, 0.6): mean 0.7, population variance 0.01
  const double s0 = class_objective(images, {0, 0}, color_bits(0, 1));
  CHECK(s0 == doctest::Approx(69.999993).epsilon(1e-6));
  CHECK(s0 == doctest::Approx(oracle::class_objective(images, 0, 0, 0)).epsilon(1e-12));

  // s = (0.2, 0.4): mean 0.3, same variance
  const double s1 = class_objective(images, {0, 0}, color_bits(1, 1));
  CHECK(s1 == doctest::Approx(29.9999970).epsilon(1e-6));
  CHECK(s1 == doctest::Approx(oracle::class_objective(images, 0, 0, 1)).epsilon(1e-12));

  // identical pixels: variance 0, score d / kVarEps
  const std::vector<Image> same = {gray({0.4}, 1, 1), gray({0.4}, 1, 1)};
  CHECK(class_objective(same, {0, 0}, color_bits(0, 1)) ==
        doctest::Approx(0.4 / kVarEps).epsilon(1e-12));

  CHECK_THROWS_AS(class_objective(std::vector<Image>{}, {0, 0}, color_bits(0, 1)),
                  empty_class_error);
}

TEST_CASE("class_objective is invariant under image permutation") {
  Rng rng(11);
  auto images = oracle::random_images(rng, 7, 2, 3, 3);
  const double before = class_objective(images, {1, 2}, color_bits(0b101, 3));
  std::reverse(images.begin(), images.end());
  const double after = class_objective(images, {1, 2}, color_bits(0b101, 3));
  CHECK(before == doctest::Approx(after).epsilon(1e-12));
}

TEST_CASE("search_class on the two-pixel toy class") {
  // pixel 0 values (0.8, 0.6); pixel 1 values (0.5, 0.5). Zero variance at
  // pixel 1 gives 5e8 for both colors; the tie breaks toward xi=0.
  const std::vector<Image> images = {gray({0.8, 0.5}, 1, 2), gray({0.6, 0.5}, 1, 2)};
  const Candidate best = search_class(images);
  CHECK(best.pos == PixelPosition{0, 1});
  CHECK(best.color.to_index() == 0);
  CHECK(best.score == doctest::Approx(5e8).epsilon(1e-9));
}

TEST_CASE("search_class on a single one-pixel image prefers the far corner") {
  const std::vector<Image> images = {gray({0.3}, 1, 1)};
  const Candidate best = search_class(images);
  CHECK(best.pos == PixelPosition{0, 0});
  CHECK(best.color.to_index() == 1);
  CHECK(best.score == doctest::Approx(0.7 / kVarEps).epsilon(1e-9));
}

TEST_CASE("search space size matches H*W*2^C") {
  CHECK(search_space_size(32, 32, 3) == 8192);
  CHECK(search_space_size(1, 2, 1) == 4);
}

TEST_CASE("search_class agrees with the naive oracle on random tiny classes") {
  Rng rng(202);
  for (int trial = 0; trial < 40; ++trial) {
    const int h = 1 + static_cast<int>(rng.uniform_index(5));
    const int w = 1 + static_cast<int>(rng.uniform_index(5));
    const int c = rng.uniform_index(2) == 0 ? 1 : 3;
    const int n = 1 + static_cast<int>(rng.uniform_index(8));
    const auto images = oracle::random_images(rng, n, h, w, c);

    const Candidate got = search_class(images);
    const oracle::BestCandidate want = oracle::search(images);
    CHECK(got.pos.row == want.row);
    CHECK(got.pos.col == want.col);
    CHECK(got.color.to_index() == want.color_bits);
    CHECK(got.score == doctest::Approx(want.score).epsilon(1e-9));
  }
}

TEST_CASE("search is bit-identical across worker counts") {
  Rng rng(77);
  const auto images = oracle::random_images(rng, 12, 6, 6, 3);
  set_thread_override(1);
  const Candidate serial = search_class(images);
  set_thread_override(4);
  const Candidate parallel = search_class(images);
  set_thread_override(0);
  CHECK(serial.pos == parallel.pos);
  CHECK(serial.color == parallel.color);
  CHECK(serial.score == parallel.score);  // exact
}

TEST_CASE("apply_shortcut") {
  const Image img = rgb1x1(0.2, 0.9, 0.5);
  const Image out = apply_shortcut(img, {0, 0}, color_bits(0b011, 3));
  CHECK(out.values == std::vector<double>{0.0, 1.0, 1.0});
  CHECK(img.values == std::vector<double>{0.2, 0.9, 0.5});  // input untouched

  // fixed point: pixel already equals the color
  const Image fixed = apply_shortcut(out, {0, 0}, color_bits(0b011, 3));
  CHECK(fixed.values == out.values);

  CHECK_THROWS_AS(apply_shortcut(img, {0, 1}, color_bits(0, 3)), index_error);
}

TEST_CASE("apply_shortcut changes at most one pixel") {
  Rng rng(5);
  const auto images = oracle::random_images(rng, 1, 4, 5, 3);
  const Image out = apply_shortcut(images[0], {2, 3}, color_bits(0b101, 3));
  int changed = 0;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 5; ++c) {
      bool differs = false;
      for (int ch = 0; ch < 3; ++ch)
        if (images[0].at(r, c, ch) != out.at(r, c, ch)) differs = true;
      changed += differs ? 1 : 0;
    }
  CHECK(changed <= 1);
}

TEST_CASE("search_multi") {
  const std::vector<Image> images = {gray({0.8, 0.5}, 1, 2), gray({0.6, 0.5}, 1, 2)};

  SUBCASE("n=1 reduces to search_class") {
    const auto multi = search_multi(images, 1);
    const Candidate single = search_class(images);
    REQUIRE(multi.size() == 1);
    CHECK(multi[0].pos == single.pos);
    CHECK(multi[0].color == single.color);
    CHECK(multi[0].score == single.score);
  }

  SUBCASE("n=2 ranks the toy class as derived by hand") {
    const auto multi = search_multi(images, 2);
    REQUIRE(multi.size() == 2);
    CHECK(multi[0].pos == PixelPosition{0, 1});
    CHECK(multi[0].color.to_index() == 0);
    CHECK(multi[0].score == doctest::Approx(5e8).epsilon(1e-9));
    CHECK(multi[1].pos == PixelPosition{0, 0});
    CHECK(multi[1].color.to_index() == 0);
    CHECK(multi[1].score == doctest::Approx(69.999993).epsilon(1e-6));
  }

  SUBCASE("positions distinct, scores non-increasing") {
    Rng rng(9);
    const auto rnd = oracle::random_images(rng, 6, 4, 4, 3);
    const auto multi = search_multi(rnd, 10);
    REQUIRE(multi.size() == 10);
    for (size_t i = 0; i < multi.size(); ++i) {
      if (i > 0) CHECK(multi[i].score <= multi[i - 1].score);
      for (size_t j = i + 1; j < multi.size(); ++j)
        CHECK(!(multi[i].pos == multi[j].pos));
    }
  }

  SUBCASE("n beyond the pixel budget is a capacity error") {
    CHECK_THROWS_AS(search_multi(images, 3), shape_error);
  }
}

TEST_CASE("craft_ops perturbs each class uniformly at its winning pixel") {
  const LabeledDataset ds = make_synthetic(3, 6, 5, 5, 3, 0.3, 0.1, 42);
  const auto [crafted, spec] = craft_ops(ds);
  spec.validate();
  CHECK(crafted.labels == ds.labels);
  REQUIRE(static_cast<int>(spec.classes.size()) == 3);

  for (size_t i = 0; i < crafted.size(); ++i) {
    const Candidate& cand = spec.classes[crafted.labels[i]][0];
    // pixel matches xi exactly
    for (int ch = 0; ch < 3; ++ch)
      CHECK(crafted.images[i].at(cand.pos.row, cand.pos.col, ch) ==
            (cand.color.channels[ch] ? 1.0 : 0.0));
    // at most one pixel differs from the source
    int changed = 0;
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < 5; ++c) {
        bool differs = false;
        for (int ch = 0; ch < 3; ++ch)
          if (ds.images[i].at(r, c, ch) != crafted.images[i].at(r, c, ch)) differs = true;
        changed += differs ? 1 : 0;
      }
    CHECK(changed <= 1);
  }
}

TEST_CASE("craft_ops is deterministic for any worker count") {
  const LabeledDataset ds = make_synthetic(4, 8, 6, 6, 3, 0.3, 0.15, 7);
  set_thread_override(1);
  const auto [a_ds, a_spec] = craft_ops(ds);
  set_thread_override(8);
  const auto [b_ds, b_spec] = craft_ops(ds);
  set_thread_override(0);
  REQUIRE(a_ds.size() == b_ds.size());
  for (size_t i = 0; i < a_ds.size(); ++i) CHECK(a_ds.images[i].values == b_ds.images[i].values);
  for (int k = 0; k < 4; ++k) {
    CHECK(a_spec.classes[k][0].pos == b_spec.classes[k][0].pos);
    CHECK(a_spec.classes[k][0].color == b_spec.classes[k][0].color);
    CHECK(a_spec.classes[k][0].score == b_spec.classes[k][0].score);
  }
}

TEST_CASE("craft_ops rejects an empty class, naming it") {
  LabeledDataset ds = make_synthetic(2, 3, 3, 3, 1, 0.3, 0.1, 1);
  ds.num_classes = 3;  // class 2 exists but has no images
  CHECK_THROWS_WITH_AS(craft_ops(ds), doctest::Contains("class 2"), empty_class_error);
}

TEST_CASE("compose") {
  const LabeledDataset ds = make_synthetic(3, 5, 4, 4, 3, 0.3, 0.1, 9);
  const auto [crafted, spec] = craft_ops(ds);

  NoiseSet zero;
  zero.height = 4;
  zero.width = 4;
  zero.channels = 3;
  zero.bound = 8.0f / 255.0f;
  zero.deltas.assign(ds.size(), std::vector<float>(4 * 4 * 3, 0.0f));

  SUBCASE("zero noise reduces to the shortcut alone") {
    const LabeledDataset composed = compose(ds, zero, spec);
    for (size_t i = 0; i < ds.size(); ++i)
      CHECK(composed.images[i].values == crafted.images[i].values);
  }

  SUBCASE("empty pixel lists reduce to clip(x+delta)") {
    ShortcutSpec empty = spec;
    for (auto& cls : empty.classes) cls.clear();
    NoiseSet noise = zero;
    Rng rng(3);
    for (auto& d : noise.deltas)
      for (auto& v : d)
        v = static_cast<float>(rng.uniform(-noise.bound, noise.bound));
    const LabeledDataset composed = compose(ds, noise, empty);
    for (size_t i = 0; i < ds.size(); ++i)
      for (size_t j = 0; j < composed.images[i].values.size(); ++j)
        CHECK(composed.images[i].values[j] ==
              doctest::Approx(clip01(ds.images[i].values[j] + noise.deltas[i][j]))
                  .epsilon(1e-15));
  }

  SUBCASE("off-shortcut distance bounded by the noise bound, pixel exactly xi") {
    NoiseSet noise = zero;
    Rng rng(4);
    for (auto& d : noise.deltas)
      for (auto& v : d)
        v = static_cast<float>(rng.uniform(-noise.bound, noise.bound));
    const LabeledDataset composed = compose(ds, noise, spec);
    for (size_t i = 0; i < ds.size(); ++i) {
      const Candidate& cand = spec.classes[ds.labels[i]][0];
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
          for (int ch = 0; ch < 3; ++ch) {
            const double out = composed.images[i].at(r, c, ch);
            if (r == cand.pos.row && c == cand.pos.col) {
              CHECK(out == (cand.color.channels[ch] ? 1.0 : 0.0));
            } else {
              CHECK(std::fabs(out - ds.images[i].at(r, c, ch)) <=
                    static_cast<double>(noise.bound) + 1e-12);
            }
          }
    }
  }

  SUBCASE("shape mismatch is rejected") {
    NoiseSet bad = zero;
    bad.deltas.pop_back();
    CHECK_THROWS_AS(compose(ds, bad, spec), shape_error);
  }
}

TEST_CASE("shortcut spec JSON round trip") {
  const LabeledDataset ds = make_synthetic(3, 4, 4, 5, 3, 0.3, 0.1, 12);
  const auto [crafted, spec] = craft_multi(ds, 2);
  const auto path = std::filesystem::temp_directory_path() / "ule_spec_test.json";
  spec.save_json(path);
  const ShortcutSpec loaded = ShortcutSpec::load_json(path);
  CHECK(loaded.height == spec.height);
  CHECK(loaded.width == spec.width);
  CHECK(loaded.channels == spec.channels);
  CHECK(loaded.num_classes == spec.num_classes);
  for (int k = 0; k < spec.num_classes; ++k) {
    REQUIRE(loaded.classes[k].size() == spec.classes[k].size());
    for (size_t i = 0; i < spec.classes[k].size(); ++i) {
      CHECK(loaded.classes[k][i].pos == spec.classes[k][i].pos);
      CHECK(loaded.classes[k][i].color == spec.classes[k][i].color);
      // 17 significant digits round-trip doubles exactly
      CHECK(loaded.classes[k][i].score == spec.classes[k][i].score);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("shortcut spec validation") {
  ShortcutSpec spec;
  spec.height = 2;
  spec.width = 2;
  spec.channels = 1;
  spec.num_classes = 1;
  spec.classes.resize(1);
  Candidate cand;
  cand.pos = {0, 0};
  cand.color = CornerColor::from_index(0, 1);
  cand.score = 1.0;
  spec.classes[0] = {cand, cand};  // duplicate position
  CHECK_THROWS_AS(spec.validate(), invariant_error);
}
