#include "ule/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <json.hpp>

#include "ule/common.hpp"
#include "ule/data_io.hpp"
#include "ule/parallel.hpp"

namespace ule {

void AugmentConfig::validate(int height, int width) const {
  if (crop_padding < 0) throw invariant_error("crop_padding must be >= 0");
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0))
    throw invariant_error("flip_prob must be in [0,1]");
  if (cutout_size < 0 || cutout_size > std::min(height, width))
    throw invariant_error("cutout_size must be in [0, min(H,W)]");
  if (mixup_alpha < 0.0) throw invariant_error("mixup_alpha must be >= 0");
}

void ATConfig::validate() const {
  if (!enabled) return;
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw invariant_error("AT epsilon must be in (0,1]");
  if (!(step_size > 0.0 && step_size <= epsilon))
    throw invariant_error("AT step_size must be in (0, epsilon]");
  if (steps < 0) throw invariant_error("AT steps must be >= 0");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw invariant_error("epochs must be >= 1");
  if (batch_size < 1) throw invariant_error("batch_size must be >= 1");
  if (lr < 0.0) throw invariant_error("lr must be >= 0");
  at.validate();
}

Image flip_horizontal(const Image& img) {
  Image out = img;
  for (int ch = 0; ch < img.channels; ++ch)
    for (int r = 0; r < img.height; ++r)
      for (int c = 0; c < img.width; ++c)
        out.at(r, c, ch) = img.at(r, img.width - 1 - c, ch);
  return out;
}

Image augment_standard(const Image& img, Rng& rng, const AugmentConfig& cfg) {
  const int pad = cfg.crop_padding;
  const int dy = static_cast<int>(rng.uniform_index(2 * pad + 1));
  const int dx = static_cast<int>(rng.uniform_index(2 * pad + 1));
  Image out = img;
  if (pad > 0) {
    out = Image::zeros(img.height, img.width, img.channels);
    // crop window at (dy,dx) in the zero-padded image; source pixel is
    // (r+dy-pad, c+dx-pad), zero outside bounds
    for (int ch = 0; ch < img.channels; ++ch)
      for (int r = 0; r < img.height; ++r) {
        const int sr = r + dy - pad;
        if (sr < 0 || sr >= img.height) continue;
        for (int c = 0; c < img.width; ++c) {
          const int sc = c + dx - pad;
          if (sc < 0 || sc >= img.width) continue;
          out.at(r, c, ch) = img.at(sr, sc, ch);
        }
      }
  }
  if (rng.uniform() < cfg.flip_prob) out = flip_horizontal(out);
  return out;
}

Image cutout(const Image& img, Rng& rng, int size) {
  if (size < 1 || size > std::min(img.height, img.width))
    throw invariant_error("cutout size must be in [1, min(H,W)]");
  const int r0 = static_cast<int>(rng.uniform_index(img.height));
  const int c0 = static_cast<int>(rng.uniform_index(img.width));
  const int top = r0 - size / 2;
  const int left = c0 - size / 2;
  Image out = img;
  for (int ch = 0; ch < img.channels; ++ch)
    for (int r = std::max(0, top); r < std::min(img.height, top + size); ++r)
      for (int c = std::max(0, left); c < std::min(img.width, left + size); ++c)
        out.at(r, c, ch) = 0.0;
  return out;
}

void mixup_apply(Batch& batch, int num_classes, double lambda,
                 const std::vector<size_t>& partner) {
  const int b = batch.count;
  const size_t d = batch.dim;
  if (partner.size() != static_cast<size_t>(b))
    throw shape_error("mixup partner list length mismatch");

  if (batch.soft.empty()) {
    batch.soft.assign(static_cast<size_t>(b) * num_classes, 0.0);
    for (int i = 0; i < b; ++i)
      batch.soft[static_cast<size_t>(i) * num_classes + batch.labels[i]] = 1.0;
  }

  // x + (1-lambda) * (x_partner - x): exact identity for lambda=1 or self-mix
  const double w = 1.0 - lambda;
  std::vector<double> x0 = batch.x;
  std::vector<double> y0 = batch.soft;
  for (int i = 0; i < b; ++i) {
    const size_t p = partner[i];
    for (size_t j = 0; j < d; ++j)
      batch.x[i * d + j] = x0[i * d + j] + w * (x0[p * d + j] - x0[i * d + j]);
    for (int j = 0; j < num_classes; ++j)
      batch.soft[static_cast<size_t>(i) * num_classes + j] =
          y0[static_cast<size_t>(i) * num_classes + j] +
          w * (y0[p * num_classes + j] - y0[static_cast<size_t>(i) * num_classes + j]);
  }
}

void mixup_batch(Batch& batch, int num_classes, Rng& rng, double alpha) {
  if (alpha <= 0.0) throw invariant_error("mixup alpha must be > 0");
  const double lambda = rng.beta(alpha, alpha);
  const std::vector<size_t> partner = rng.permutation(batch.count);
  mixup_apply(batch, num_classes, lambda, partner);
}

void pgd_attack(const Params& params, const ModelConfig& cfg, Batch& batch,
                const ATConfig& at, Rng& rng) {
  at.validate();
  if (!at.enabled) throw invariant_error("pgd_attack requires at.enabled");
  const std::vector<double> x0 = batch.x;
  if (at.random_start)
    for (size_t j = 0; j < batch.x.size(); ++j)
      batch.x[j] = clip01(x0[j] + rng.uniform(-at.epsilon, at.epsilon));

  Grads g;
  for (int step = 0; step < at.steps; ++step) {
    loss_and_grads(cfg, params, batch, true, g, /*need_param_grads=*/false);
    for (size_t j = 0; j < batch.x.size(); ++j) {
      const double sgn = g.inputs[j] > 0.0 ? 1.0 : (g.inputs[j] < 0.0 ? -1.0 : 0.0);
      const double v = batch.x[j] + at.step_size * sgn;
      const double lo = std::max(x0[j] - at.epsilon, 0.0);
      const double hi = std::min(x0[j] + at.epsilon, 1.0);
      batch.x[j] = std::clamp(v, lo, hi);
    }
  }
}

double evaluate(const Params& params, const ModelConfig& cfg, const LabeledDataset& ds) {
  cfg.validate();
  if (ds.size() == 0) return 0.0;
  if (cfg.input_dim() != static_cast<int>(ds.images[0].values.size()) ||
      cfg.num_classes != ds.num_classes)
    throw shape_error("dataset does not match model config");
  const size_t d = ds.images[0].values.size();
  const int m = cfg.num_classes;

  constexpr size_t kChunk = 256;
  const size_t nblocks = (ds.size() + kChunk - 1) / kChunk;
  std::vector<size_t> correct(nblocks, 0);
  parallel_blocks(ds.size(), kChunk, [&](size_t blk, size_t begin, size_t end) {
    const int n = static_cast<int>(end - begin);
    std::vector<double> x(static_cast<size_t>(n) * d);
    for (size_t i = begin; i < end; ++i)
      std::copy(ds.images[i].values.begin(), ds.images[i].values.end(),
                x.begin() + static_cast<long>((i - begin) * d));
    const std::vector<double> logits = forward(cfg, params, x, n);
    size_t ok = 0;
    for (int i = 0; i < n; ++i) {
      int arg = 0;  // strict > keeps the smallest index on ties
      for (int j = 1; j < m; ++j)
        if (logits[static_cast<size_t>(i) * m + j] > logits[static_cast<size_t>(i) * m + arg])
          arg = j;
      if (arg == ds.labels[begin + i]) ++ok;
    }
    correct[blk] = ok;
  });
  size_t total = 0;
  for (size_t c : correct) total += c;
  return static_cast<double>(total) / static_cast<double>(ds.size());
}

TrainResult train(const LabeledDataset& train_set, const LabeledDataset& test_set,
                  const ModelConfig& model_cfg, const TrainConfig& cfg) {
  cfg.validate();
  model_cfg.validate();
  train_set.validate();
  test_set.validate();
  cfg.augment.validate(train_set.height(), train_set.width());
  if (model_cfg.input_dim() != static_cast<int>(train_set.images[0].values.size()) ||
      model_cfg.num_classes != train_set.num_classes)
    throw shape_error("training set does not match model config");
  if (test_set.size() > 0 &&
      (test_set.height() != train_set.height() || test_set.width() != train_set.width() ||
       test_set.channels() != train_set.channels()))
    throw shape_error("test set shape does not match training set");

  const size_t d = train_set.images[0].values.size();
  TrainResult result;
  result.params = init_params(model_cfg, derive_seed(cfg.seed, seed_stream::model_init));
  result.initial = result.params;
  SgdState opt;
  double lr = cfg.lr;

  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (std::find(cfg.lr_milestones.begin(), cfg.lr_milestones.end(), epoch) !=
        cfg.lr_milestones.end())
      lr *= cfg.lr_decay;

    Rng rng(derive_seed(cfg.seed, seed_stream::train_epoch, epoch));
    rng.shuffle(order);

    double loss_sum = 0.0;
    size_t batches = 0;
    Batch batch;
    batch.dim = static_cast<int>(d);
    Grads g;

    for (size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const size_t end = std::min(order.size(), begin + cfg.batch_size);
      const int n = static_cast<int>(end - begin);
      batch.count = n;
      batch.x.resize(static_cast<size_t>(n) * d);
      batch.labels.resize(n);
      batch.soft.clear();
      for (size_t i = begin; i < end; ++i) {
        Image img = augment_standard(train_set.images[order[i]], rng, cfg.augment);
        if (cfg.augment.cutout_size > 0) img = cutout(img, rng, cfg.augment.cutout_size);
        std::copy(img.values.begin(), img.values.end(),
                  batch.x.begin() + static_cast<long>((i - begin) * d));
        batch.labels[i - begin] = train_set.labels[order[i]];
      }
      if (cfg.augment.mixup_alpha > 0.0)
        mixup_batch(batch, model_cfg.num_classes, rng, cfg.augment.mixup_alpha);
      if (cfg.at.enabled) pgd_attack(result.params, model_cfg, batch, cfg.at, rng);

      double loss;
      try {
        loss = loss_and_grads(model_cfg, result.params, batch, false, g);
      } catch (const numeric_error& e) {
        throw numeric_error("training diverged at epoch " + std::to_string(epoch) +
                            ": " + e.what());
      }
      sgd_step(result.params, g.params, opt, lr, cfg.momentum, cfg.weight_decay);
      loss_sum += loss;
      ++batches;
    }

    EpochRecord rec;
    rec.train_acc = evaluate(result.params, model_cfg, train_set);
    rec.test_acc = test_set.size() ? evaluate(result.params, model_cfg, test_set) : 0.0;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    rec.param_dist = param_distance(result.params, result.initial);
    result.log.epochs.push_back(rec);
  }
  return result;
}

namespace {

std::vector<size_t> probe_permutation(size_t n, uint64_t seed) {
  Rng rng(derive_seed(seed, seed_stream::shuffle_probe));
  return rng.permutation(n);
}

}  // namespace

LabeledDataset shuffle_probe_with_permutation(const LabeledDataset& clean,
                                              const NoiseSet& noise,
                                              const std::vector<size_t>& perm) {
  clean.validate();
  if (noise.size() != clean.size()) throw shape_error("noise count does not match dataset");
  if (noise.height != clean.height() || noise.width != clean.width() ||
      noise.channels != clean.channels())
    throw shape_error("noise shape does not match dataset");
  if (perm.size() != clean.size()) throw shape_error("permutation length mismatch");

  LabeledDataset out = clean;
  out.name = clean.name + "-shuffled";
  for (size_t i = 0; i < clean.size(); ++i) {
    const size_t donor = perm[i];
    const auto& delta = noise.deltas[donor];
    Image& img = out.images[i];
    for (size_t j = 0; j < img.values.size(); ++j)
      img.values[j] = clip01(clean.images[i].values[j] + delta[j]);
    out.labels[i] = clean.labels[donor];
  }
  return out;
}

LabeledDataset shuffle_probe_with_permutation(const LabeledDataset& clean,
                                              const ShortcutSpec& spec,
                                              const std::vector<size_t>& perm) {
  clean.validate();
  spec.validate();
  if (spec.height != clean.height() || spec.width != clean.width() ||
      spec.channels != clean.channels() || spec.num_classes != clean.num_classes)
    throw shape_error("shortcut spec does not match dataset");
  if (perm.size() != clean.size()) throw shape_error("permutation length mismatch");

  LabeledDataset out = clean;
  out.name = clean.name + "-shuffled";
  for (size_t i = 0; i < clean.size(); ++i) {
    const size_t donor = perm[i];
    const int donor_class = clean.labels[donor];
    for (const Candidate& cand : spec.classes[donor_class])
      out.images[i] = apply_shortcut(out.images[i], cand.pos, cand.color);
    out.labels[i] = clean.labels[donor];
  }
  return out;
}

LabeledDataset shuffle_probe(const LabeledDataset& clean, const NoiseSet& noise,
                             uint64_t seed) {
  return shuffle_probe_with_permutation(clean, noise,
                                        probe_permutation(clean.size(), seed));
}

LabeledDataset shuffle_probe(const LabeledDataset& clean, const ShortcutSpec& spec,
                             uint64_t seed) {
  return shuffle_probe_with_permutation(clean, spec,
                                        probe_permutation(clean.size(), seed));
}

std::optional<int> epoch_to_reach(const MetricsLog& log, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw invariant_error("threshold must be in (0,1]");
  for (size_t i = 0; i < log.epochs.size(); ++i)
    if (log.epochs[i].train_acc >= threshold) return static_cast<int>(i);
  return std::nullopt;
}

void MetricsLog::write_csv(const std::filesystem::path& path) const {
  std::string out = "epoch,train_acc,test_acc,train_loss,param_dist\n";
  for (size_t i = 0; i < epochs.size(); ++i) {
    const EpochRecord& r = epochs[i];
    out += std::to_string(i) + "," + fmt_g(r.train_acc, 9) + "," +
           fmt_g(r.test_acc, 9) + "," + fmt_g(r.train_loss, 9) + "," +
           fmt_g(r.param_dist, 9) + "\n";
  }
  write_file_atomic(path, out);
}

void MetricsLog::write_summary(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["epochs"] = epochs.size();
  if (!epochs.empty()) {
    j["final_train_acc"] = epochs.back().train_acc;
    j["final_test_acc"] = epochs.back().test_acc;
    j["final_train_loss"] = epochs.back().train_loss;
    j["final_param_dist"] = epochs.back().param_dist;
  }
  const auto e90 = epoch_to_reach(*this, 0.9);
  if (e90)
    j["epoch_to_reach_0.9"] = *e90;
  else
    j["epoch_to_reach_0.9"] = nullptr;
  write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace ule
