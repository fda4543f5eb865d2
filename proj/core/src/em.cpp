#include "ule/em.hpp"

#include <algorithm>
#include <cmath>

#include "ule/common.hpp"
#include "ule/rng.hpp"

namespace ule {

namespace {

constexpr size_t kChunk = 256;  // images per gradient chunk

double sgn(double g) { return g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0); }

void check_deltas(const LabeledDataset& ds, const std::vector<std::vector<double>>& deltas,
                  double bound) {
  if (deltas.size() != ds.size())
    throw shape_error("delta count does not match dataset");
  const size_t per = ds.images.empty() ? 0 : ds.images[0].values.size();
  for (const auto& d : deltas) {
    if (d.size() != per) throw shape_error("delta length does not match image shape");
    for (double v : d)
      if (!(std::fabs(v) <= bound))
        throw invariant_error("input delta exceeds the L-inf bound");
  }
}

// Gradients of the mean loss w.r.t. every input, evaluated at x+delta,
// written per image into `grads` (image-major). Fixed chunking keeps the
// evaluation order independent of worker count.
void dataset_input_grads(const Params& params, const ModelConfig& cfg,
                         const LabeledDataset& ds,
                         const std::vector<std::vector<double>>& deltas,
                         std::vector<std::vector<double>>& grads) {
  const size_t d = ds.images[0].values.size();
  Batch batch;
  batch.dim = static_cast<int>(d);
  Grads g;
  for (size_t begin = 0; begin < ds.size(); begin += kChunk) {
    const size_t end = std::min(ds.size(), begin + kChunk);
    const int n = static_cast<int>(end - begin);
    batch.count = n;
    batch.x.resize(static_cast<size_t>(n) * d);
    batch.labels.resize(n);
    for (size_t i = begin; i < end; ++i) {
      double* row = batch.x.data() + (i - begin) * d;
      const auto& img = ds.images[i].values;
      const auto& delta = deltas[i];
      for (size_t j = 0; j < d; ++j) row[j] = clip01(img[j] + delta[j]);
      batch.labels[i - begin] = ds.labels[i];
    }
    loss_and_grads(cfg, params, batch, true, g, /*need_param_grads=*/false);
    for (size_t i = begin; i < end; ++i) {
      grads[i].assign(g.inputs.begin() + static_cast<long>((i - begin) * d),
                      g.inputs.begin() + static_cast<long>((i - begin + 1) * d));
    }
  }
}

double noised_accuracy(const Params& params, const ModelConfig& cfg,
                       const LabeledDataset& ds,
                       const std::vector<std::vector<double>>& deltas) {
  const size_t d = ds.images[0].values.size();
  const int m = cfg.num_classes;
  size_t correct = 0;
  std::vector<double> x;
  for (size_t begin = 0; begin < ds.size(); begin += kChunk) {
    const size_t end = std::min(ds.size(), begin + kChunk);
    const int n = static_cast<int>(end - begin);
    x.resize(static_cast<size_t>(n) * d);
    for (size_t i = begin; i < end; ++i)
      for (size_t j = 0; j < d; ++j)
        x[(i - begin) * d + j] = clip01(ds.images[i].values[j] + deltas[i][j]);
    const std::vector<double> logits = forward(cfg, params, x, n);
    for (int i = 0; i < n; ++i) {
      int arg = 0;
      for (int j = 1; j < m; ++j)
        if (logits[static_cast<size_t>(i) * m + j] > logits[static_cast<size_t>(i) * m + arg])
          arg = j;
      if (arg == ds.labels[begin + i]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

}  // namespace

void EMConfig::validate() const {
  if (!(bound > 0.0 && bound <= 1.0)) throw invariant_error("EM bound must be in (0,1]");
  if (inner_steps < 0) throw invariant_error("inner_steps must be >= 0");
  if (inner_step_size < 0.0) throw invariant_error("inner_step_size must be >= 0");
  if (outer_model_steps < 1) throw invariant_error("outer_model_steps must be >= 1");
  if (!(stop_train_acc > 0.0 && stop_train_acc <= 1.0))
    throw invariant_error("stop_train_acc must be in (0,1]");
  if (max_rounds < 1) throw invariant_error("max_rounds must be >= 1");
  if (batch_size < 1) throw invariant_error("batch_size must be >= 1");
}

std::vector<std::vector<double>> inner_min_noise(
    const Params& params, const ModelConfig& model_cfg, const LabeledDataset& ds,
    const std::vector<std::vector<double>>& deltas, const EMConfig& cfg) {
  cfg.validate();
  ds.validate();
  if (ds.size() == 0) throw invariant_error("dataset is empty");
  check_deltas(ds, deltas, cfg.bound);

  std::vector<std::vector<double>> cur = deltas;
  const size_t d = ds.images[0].values.size();
  const double eps = cfg.bound;
  const double alpha = cfg.inner_step_size;

  std::vector<std::vector<double>> grads(ds.size());
  const auto by_class = ds.indices_by_class();

  // Class-wise coordinate envelopes: delta must keep every member in [0,1].
  std::vector<std::vector<double>> lo, hi;
  if (cfg.mode == EMMode::class_wise) {
    lo.assign(ds.num_classes, std::vector<double>(d, -eps));
    hi.assign(ds.num_classes, std::vector<double>(d, eps));
    for (int k = 0; k < ds.num_classes; ++k)
      for (size_t i : by_class[k])
        for (size_t j = 0; j < d; ++j) {
          lo[k][j] = std::max(lo[k][j], -ds.images[i].values[j]);
          hi[k][j] = std::min(hi[k][j], 1.0 - ds.images[i].values[j]);
        }
  }

  for (int step = 0; step < cfg.inner_steps; ++step) {
    dataset_input_grads(params, model_cfg, ds, cur, grads);
    if (cfg.mode == EMMode::sample_wise) {
      for (size_t i = 0; i < ds.size(); ++i) {
        const auto& img = ds.images[i].values;
        auto& delta = cur[i];
        for (size_t j = 0; j < d; ++j) {
          const double v = delta[j] - alpha * sgn(grads[i][j]);
          const double lo_j = std::max(-eps, -img[j]);
          const double hi_j = std::min(eps, 1.0 - img[j]);
          delta[j] = std::clamp(v, lo_j, hi_j);
        }
      }
    } else {
      for (int k = 0; k < ds.num_classes; ++k) {
        if (by_class[k].empty()) continue;
        std::vector<double> mean(d, 0.0);
        for (size_t i : by_class[k])
          for (size_t j = 0; j < d; ++j) mean[j] += grads[i][j];
        const double inv = 1.0 / static_cast<double>(by_class[k].size());
        std::vector<double> delta = cur[by_class[k][0]];
        for (size_t j = 0; j < d; ++j)
          delta[j] = std::clamp(delta[j] - alpha * sgn(mean[j] * inv), lo[k][j], hi[k][j]);
        for (size_t i : by_class[k]) cur[i] = delta;
      }
    }
  }
  return cur;
}

EMResult craft_em(const LabeledDataset& ds, const ModelConfig& model_cfg,
                  const EMConfig& cfg) {
  cfg.validate();
  ds.validate();
  if (ds.size() == 0) throw invariant_error("dataset is empty");
  model_cfg.validate();
  if (model_cfg.input_dim() != static_cast<int>(ds.images[0].values.size()) ||
      model_cfg.num_classes != ds.num_classes)
    throw shape_error("generator model config does not match dataset");

  const size_t d = ds.images[0].values.size();
  std::vector<std::vector<double>> deltas(ds.size(), std::vector<double>(d, 0.0));
  std::vector<std::vector<double>> best = deltas;
  double best_acc = -1.0;

  Params params = init_params(model_cfg, derive_seed(cfg.seed, seed_stream::em_model));
  SgdState opt;
  Rng order_rng(derive_seed(cfg.seed, seed_stream::em_order));
  std::vector<size_t> order = order_rng.permutation(ds.size());
  size_t cursor = 0;
  auto next_index = [&]() {
    if (cursor == order.size()) {
      order_rng.shuffle(order);
      cursor = 0;
    }
    return order[cursor++];
  };

  Batch batch;
  batch.dim = static_cast<int>(d);
  Grads g;
  EMResult result;

  for (int round = 1; round <= cfg.max_rounds; ++round) {
    for (int s = 0; s < cfg.outer_model_steps; ++s) {
      const int n = static_cast<int>(std::min<size_t>(cfg.batch_size, ds.size()));
      batch.count = n;
      batch.x.resize(static_cast<size_t>(n) * d);
      batch.labels.resize(n);
      for (int i = 0; i < n; ++i) {
        const size_t idx = next_index();
        for (size_t j = 0; j < d; ++j)
          batch.x[static_cast<size_t>(i) * d + j] =
              clip01(ds.images[idx].values[j] + deltas[idx][j]);
        batch.labels[i] = ds.labels[idx];
      }
      loss_and_grads(model_cfg, params, batch, false, g);
      sgd_step(params, g.params, opt, cfg.lr, cfg.momentum, cfg.weight_decay);
    }

    deltas = inner_min_noise(params, model_cfg, ds, deltas, cfg);
    const double acc = noised_accuracy(params, model_cfg, ds, deltas);
    result.rounds = round;
    if (acc > best_acc) {
      best_acc = acc;
      best = deltas;
    }
    if (acc >= cfg.stop_train_acc) {
      result.converged = true;
      best = deltas;
      best_acc = acc;
      break;
    }
  }

  result.final_train_acc = best_acc;
  NoiseSet noise;
  noise.height = ds.height();
  noise.width = ds.width();
  noise.channels = ds.channels();
  noise.bound = static_cast<float>(cfg.bound);
  noise.deltas.resize(ds.size());
  for (size_t i = 0; i < ds.size(); ++i) {
    noise.deltas[i].resize(d);
    for (size_t j = 0; j < d; ++j) {
      float f = static_cast<float>(best[i][j]);
      // float rounding may overshoot the double-precision bound; nudge back
      if (std::fabs(static_cast<double>(f)) > cfg.bound)
        f = std::nextafterf(f, 0.0f);
      noise.deltas[i][j] = f;
    }
  }
  noise.validate();
  result.noise = std::move(noise);
  return result;
}

}  // namespace ule
