#include "ule/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "ule/common.hpp"
#include "ule/data_io.hpp"
#include "ule/parallel.hpp"
#include "ule/rng.hpp"

namespace ule {

namespace {

// Fixed 4-accumulator association: vectorizes without -ffast-math and gives
// the same bits on every run.
double dot(const double* a, const double* b, size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  double s = (s0 + s1) + (s2 + s3);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double* y, double alpha, const double* x, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

struct Layout {
  size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0, count = 0;
};

Layout layout_of(const ModelConfig& cfg) {
  const size_t d = cfg.input_dim();
  Layout l;
  if (cfg.arch == Arch::linear) {
    l.w1 = 0;
    l.b1 = static_cast<size_t>(cfg.num_classes) * d;
    l.count = l.b1 + cfg.num_classes;
  } else {
    const size_t h = cfg.hidden_width;
    l.w1 = 0;
    l.b1 = h * d;
    l.w2 = l.b1 + h;
    l.b2 = l.w2 + static_cast<size_t>(cfg.num_classes) * h;
    l.count = l.b2 + cfg.num_classes;
  }
  return l;
}

// Per-sample logits into `logits` (M) using `hidden` scratch (h, mlp only).
void forward_one(const ModelConfig& cfg, const Layout& l, const double* p,
                 const double* x, double* hidden, double* logits) {
  const size_t d = cfg.input_dim();
  const int m = cfg.num_classes;
  if (cfg.arch == Arch::linear) {
    for (int j = 0; j < m; ++j)
      logits[j] = p[l.b1 + j] + dot(p + l.w1 + j * d, x, d);
  } else {
    const int h = cfg.hidden_width;
    for (int j = 0; j < h; ++j) {
      const double z = p[l.b1 + j] + dot(p + l.w1 + j * d, x, d);
      hidden[j] = z > 0.0 ? z : 0.0;
    }
    for (int j = 0; j < m; ++j)
      logits[j] = p[l.b2 + j] + dot(p + l.w2 + static_cast<size_t>(j) * h, hidden, h);
  }
}

// loss_i = logsumexp(logits) - sum_m y_m * logits_m; writes softmax into
// `probs`.
double sample_loss(const double* logits, int m, const int* label,
                   const double* soft, double* probs) {
  double mx = logits[0];
  for (int j = 1; j < m; ++j) mx = std::max(mx, logits[j]);
  double z = 0.0;
  for (int j = 0; j < m; ++j) {
    probs[j] = std::exp(logits[j] - mx);
    z += probs[j];
  }
  const double lse = mx + std::log(z);
  for (int j = 0; j < m; ++j) probs[j] /= z;
  double dot_y = 0.0;
  if (soft) {
    for (int j = 0; j < m; ++j) dot_y += soft[j] * logits[j];
  } else {
    dot_y = logits[*label];
  }
  return lse - dot_y;
}

constexpr size_t kGradBlock = 16;

}  // namespace

int ModelConfig::param_count() const { return static_cast<int>(layout_of(*this).count); }

std::string ModelConfig::canonical() const {
  const int h = arch == Arch::mlp ? hidden_width : 0;
  return std::string("arch=") + (arch == Arch::linear ? "linear" : "mlp") +
         ";h=" + std::to_string(input_h) + ";w=" + std::to_string(input_w) +
         ";c=" + std::to_string(input_c) + ";hidden=" + std::to_string(h) +
         ";m=" + std::to_string(num_classes);
}

uint64_t ModelConfig::digest() const { return fnv1a64(canonical()); }

void ModelConfig::validate() const {
  if (input_h < 1 || input_w < 1 || input_c < 1)
    throw invariant_error("model input dims must be positive");
  if (num_classes < 1) throw invariant_error("model needs >= 1 class");
  if (arch == Arch::mlp && hidden_width < 1)
    throw invariant_error("mlp hidden width must be >= 1");
}

Params init_params(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  const Layout l = layout_of(cfg);
  Params params;
  params.v.assign(l.count, 0.0);
  Rng rng(derive_seed(seed, seed_stream::model_init));
  const size_t d = cfg.input_dim();
  auto fill = [&](size_t off, size_t rows, size_t cols) {
    const double a = std::sqrt(6.0 / static_cast<double>(cols + rows));
    for (size_t i = 0; i < rows * cols; ++i) params.v[off + i] = rng.uniform(-a, a);
  };
  if (cfg.arch == Arch::linear) {
    fill(l.w1, cfg.num_classes, d);
  } else {
    fill(l.w1, cfg.hidden_width, d);
    fill(l.w2, cfg.num_classes, cfg.hidden_width);
  }
  return params;
}

std::vector<double> forward(const ModelConfig& cfg, const Params& params,
                            const std::vector<double>& x, int batch) {
  cfg.validate();
  const Layout l = layout_of(cfg);
  if (params.v.size() != l.count)
    throw shape_error("params length " + std::to_string(params.v.size()) +
                      " does not match config (" + std::to_string(l.count) + ")");
  const size_t d = cfg.input_dim();
  if (x.size() != d * static_cast<size_t>(batch))
    throw shape_error("batch buffer length does not match config input dim");
  std::vector<double> logits(static_cast<size_t>(batch) * cfg.num_classes);
  std::vector<double> hidden(cfg.arch == Arch::mlp ? cfg.hidden_width : 0);
  for (int i = 0; i < batch; ++i)
    forward_one(cfg, l, params.v.data(), x.data() + static_cast<size_t>(i) * d,
                hidden.data(), logits.data() + static_cast<size_t>(i) * cfg.num_classes);
  return logits;
}

double loss_and_grads(const ModelConfig& cfg, const Params& params,
                      const Batch& batch, bool need_input_grads, Grads& out,
                      bool need_param_grads) {
  cfg.validate();
  const Layout l = layout_of(cfg);
  if (params.v.size() != l.count) throw shape_error("params length does not match config");
  const size_t d = cfg.input_dim();
  const int m = cfg.num_classes;
  const int b = batch.count;
  if (b < 1) throw invariant_error("batch must be nonempty");
  if (batch.dim != static_cast<int>(d) || batch.x.size() != d * static_cast<size_t>(b))
    throw shape_error("batch shape does not match config");
  const bool use_soft = !batch.soft.empty();
  if (use_soft) {
    if (batch.soft.size() != static_cast<size_t>(b) * m)
      throw shape_error("soft label buffer shape mismatch");
  } else if (batch.labels.size() != static_cast<size_t>(b)) {
    throw shape_error("label count does not match batch");
  }
  for (double v : batch.x)
    if (!std::isfinite(v)) throw numeric_error("NaN/Inf in batch inputs");

  out.params.assign(need_param_grads ? l.count : 0, 0.0);
  if (need_input_grads)
    out.inputs.assign(d * static_cast<size_t>(b), 0.0);
  else
    out.inputs.clear();

  const size_t nblocks = (static_cast<size_t>(b) + kGradBlock - 1) / kGradBlock;
  std::vector<std::vector<double>> part_grads(nblocks);
  std::vector<double> part_loss(nblocks, 0.0);

  parallel_blocks(b, kGradBlock, [&](size_t blk, size_t begin, size_t end) {
    std::vector<double>& g = part_grads[blk];
    g.assign(need_param_grads ? l.count : 0, 0.0);
    std::vector<double> hidden(cfg.arch == Arch::mlp ? cfg.hidden_width : 0);
    std::vector<double> logits(m), probs(m), dlogits(m);
    std::vector<double> dhidden(cfg.arch == Arch::mlp ? cfg.hidden_width : 0);
    const double* p = params.v.data();
    double loss_sum = 0.0;

    for (size_t i = begin; i < end; ++i) {
      const double* x = batch.x.data() + i * d;
      forward_one(cfg, l, p, x, hidden.data(), logits.data());
      const int* label = use_soft ? nullptr : &batch.labels[i];
      const double* soft = use_soft ? batch.soft.data() + i * m : nullptr;
      loss_sum += sample_loss(logits.data(), m, label, soft, probs.data());

      for (int j = 0; j < m; ++j) {
        const double y = soft ? soft[j] : (j == *label ? 1.0 : 0.0);
        dlogits[j] = (probs[j] - y) / static_cast<double>(b);
      }

      if (cfg.arch == Arch::linear) {
        if (need_param_grads)
          for (int j = 0; j < m; ++j) {
            axpy(g.data() + l.w1 + static_cast<size_t>(j) * d, dlogits[j], x, d);
            g[l.b1 + j] += dlogits[j];
          }
        if (need_input_grads) {
          double* dx = out.inputs.data() + i * d;
          for (int j = 0; j < m; ++j)
            axpy(dx, dlogits[j], p + l.w1 + static_cast<size_t>(j) * d, d);
        }
      } else {
        const int h = cfg.hidden_width;
        std::fill(dhidden.begin(), dhidden.end(), 0.0);
        for (int j = 0; j < m; ++j) {
          if (need_param_grads) {
            axpy(g.data() + l.w2 + static_cast<size_t>(j) * h, dlogits[j], hidden.data(), h);
            g[l.b2 + j] += dlogits[j];
          }
          axpy(dhidden.data(), dlogits[j], p + l.w2 + static_cast<size_t>(j) * h, h);
        }
        for (int j = 0; j < h; ++j)
          if (hidden[j] <= 0.0) dhidden[j] = 0.0;  // relu mask (hidden holds relu(z))
        if (need_param_grads)
          for (int j = 0; j < h; ++j) {
            if (dhidden[j] == 0.0) continue;
            axpy(g.data() + l.w1 + static_cast<size_t>(j) * d, dhidden[j], x, d);
            g[l.b1 + j] += dhidden[j];
          }
        if (need_input_grads) {
          double* dx = out.inputs.data() + i * d;
          for (int j = 0; j < h; ++j) {
            if (dhidden[j] == 0.0) continue;
            axpy(dx, dhidden[j], p + l.w1 + static_cast<size_t>(j) * d, d);
          }
        }
      }
    }
    part_loss[blk] = loss_sum;
  });

  double loss_sum = 0.0;
  for (size_t blk = 0; blk < nblocks; ++blk) {
    loss_sum += part_loss[blk];
    if (need_param_grads)
      axpy(out.params.data(), 1.0, part_grads[blk].data(), l.count);
  }
  const double loss = loss_sum / static_cast<double>(b);

  for (double v : out.params)
    if (!std::isfinite(v)) throw numeric_error("non-finite parameter gradient");
  for (double v : out.inputs)
    if (!std::isfinite(v)) throw numeric_error("non-finite input gradient");
  if (!std::isfinite(loss)) throw numeric_error("non-finite loss");
  return loss;
}

void sgd_step(Params& params, const std::vector<double>& grads, SgdState& state,
              double lr, double momentum, double weight_decay) {
  if (grads.size() != params.v.size())
    throw shape_error("gradient layout does not match params");
  if (state.velocity.empty()) state.velocity.assign(params.v.size(), 0.0);
  if (state.velocity.size() != params.v.size())
    throw shape_error("optimizer state layout does not match params");
  for (size_t i = 0; i < params.v.size(); ++i) {
    const double v = momentum * state.velocity[i] + grads[i] + weight_decay * params.v[i];
    state.velocity[i] = v;
    params.v[i] -= lr * v;
  }
}

double param_distance(const Params& a, const Params& b) {
  if (a.v.size() != b.v.size()) throw shape_error("param layouts differ");
  double s = 0.0;
  for (size_t i = 0; i < a.v.size(); ++i) {
    const double d = a.v[i] - b.v[i];
    s += d * d;
  }
  return std::sqrt(s);
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const Params& params) {
  cfg.validate();
  if (params.v.size() != static_cast<size_t>(cfg.param_count()))
    throw shape_error("params length does not match config");
  std::string out = "ULEP";
  auto u32 = [&out](uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); };
  auto u64 = [&out](uint64_t v) { out.append(reinterpret_cast<const char*>(&v), 8); };
  u32(cfg.arch == Arch::linear ? 0u : 1u);
  u32(cfg.input_h);
  u32(cfg.input_w);
  u32(cfg.input_c);
  u32(cfg.arch == Arch::mlp ? cfg.hidden_width : 0u);
  u32(cfg.num_classes);
  u64(cfg.digest());
  u64(params.v.size());
  out.append(reinterpret_cast<const char*>(params.v.data()), params.v.size() * 8);
  write_file_atomic(path, out);
}

std::pair<ModelConfig, Params> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || bytes.compare(0, 4, "ULEP") != 0)
    throw io_error("bad magic in " + path.string() + ": expected ULEP");
  auto u32 = [&bytes](size_t off) {
    uint32_t v;
    std::memcpy(&v, bytes.data() + off, 4);
    return v;
  };
  auto u64 = [&bytes](size_t off) {
    uint64_t v;
    std::memcpy(&v, bytes.data() + off, 8);
    return v;
  };
  ModelConfig cfg;
  cfg.arch = u32(4) == 0 ? Arch::linear : Arch::mlp;
  cfg.input_h = static_cast<int>(u32(8));
  cfg.input_w = static_cast<int>(u32(12));
  cfg.input_c = static_cast<int>(u32(16));
  cfg.hidden_width = static_cast<int>(u32(20));
  if (cfg.arch == Arch::linear) cfg.hidden_width = 128;
  cfg.num_classes = static_cast<int>(u32(24));
  const uint64_t digest = u64(28);
  const uint64_t count = u64(36);
  if (digest != cfg.digest())
    throw io_error("checkpoint digest mismatch in " + path.string());
  if (count != static_cast<uint64_t>(cfg.param_count()) ||
      bytes.size() != 44 + count * 8)
    throw io_error("checkpoint size does not match its config in " + path.string());
  Params params;
  params.v.resize(count);
  std::memcpy(params.v.data(), bytes.data() + 44, count * 8);
  for (double v : params.v)
    if (!std::isfinite(v)) throw numeric_error("non-finite value in checkpoint");
  return {cfg, params};
}

GradCheckReport gradcheck(int instances, uint64_t seed) {
  GradCheckReport report;
  report.instances = instances;
  constexpr double h = 1e-5;

  for (int inst = 0; inst < instances; ++inst) {
    Rng rng(derive_seed(seed, seed_stream::gradcheck, inst));
    ModelConfig cfg;
    cfg.arch = inst % 2 == 0 ? Arch::mlp : Arch::linear;
    cfg.input_h = 1 + static_cast<int>(rng.uniform_index(3));
    cfg.input_w = 1 + static_cast<int>(rng.uniform_index(3));
    cfg.input_c = rng.uniform_index(2) == 0 ? 1 : 3;
    cfg.hidden_width = 2 + static_cast<int>(rng.uniform_index(4));
    cfg.num_classes = 2 + static_cast<int>(rng.uniform_index(4));

    Batch batch;
    batch.count = 1 + static_cast<int>(rng.uniform_index(4));
    batch.dim = cfg.input_dim();
    batch.x.resize(static_cast<size_t>(batch.count) * batch.dim);
    for (double& v : batch.x) v = rng.uniform();
    if (inst % 3 == 0) {
      batch.soft.resize(static_cast<size_t>(batch.count) * cfg.num_classes);
      for (int i = 0; i < batch.count; ++i) {
        double z = 0.0;
        for (int j = 0; j < cfg.num_classes; ++j) {
          const double u = rng.uniform() + 1e-3;
          batch.soft[static_cast<size_t>(i) * cfg.num_classes + j] = u;
          z += u;
        }
        for (int j = 0; j < cfg.num_classes; ++j)
          batch.soft[static_cast<size_t>(i) * cfg.num_classes + j] /= z;
      }
    } else {
      batch.labels.resize(batch.count);
      for (int& y : batch.labels)
        y = static_cast<int>(rng.uniform_index(cfg.num_classes));
    }

    Params params = init_params(cfg, derive_seed(seed, seed_stream::gradcheck, 1000 + inst));
    for (double& v : params.v) v += 0.1 * rng.normal();

    Grads grads;
    loss_and_grads(cfg, params, batch, true, grads);

    auto rel = [](double a, double fd) {
      return std::fabs(a - fd) / std::max(std::fabs(a) + std::fabs(fd), 1e-3);
    };
    Grads scratch;
    for (size_t i = 0; i < params.v.size(); ++i) {
      Params p = params;
      p.v[i] += h;
      const double lp = loss_and_grads(cfg, p, batch, false, scratch);
      p.v[i] -= 2 * h;
      const double lm = loss_and_grads(cfg, p, batch, false, scratch);
      report.max_rel_param =
          std::max(report.max_rel_param, rel(grads.params[i], (lp - lm) / (2 * h)));
    }
    for (size_t i = 0; i < batch.x.size(); ++i) {
      Batch bx = batch;
      bx.x[i] += h;
      const double lp = loss_and_grads(cfg, params, bx, false, scratch);
      bx.x[i] -= 2 * h;
      const double lm = loss_and_grads(cfg, params, bx, false, scratch);
      report.max_rel_input =
          std::max(report.max_rel_input, rel(grads.inputs[i], (lp - lm) / (2 * h)));
    }
  }
  return report;
}

}  // namespace ule
