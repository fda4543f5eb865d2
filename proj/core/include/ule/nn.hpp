#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ule/image.hpp"

namespace ule {

enum class Arch { linear, mlp };

struct ModelConfig {
  Arch arch = Arch::mlp;
  int input_h = 0;
  int input_w = 0;
  int input_c = 0;
  int hidden_width = 128;  // mlp only
  int num_classes = 0;

  int input_dim() const { return input_h * input_w * input_c; }
  int param_count() const;
  std::string canonical() const;
  uint64_t digest() const;
  void validate() const;
};

// Flat 64-bit parameter vector. Layout (deterministic given the config):
//   linear: W (M x D, row-major), b (M)
//   mlp:    W1 (hidden x D), b1 (hidden), W2 (M x hidden), b2 (M)
struct Params {
  std::vector<double> v;
};

struct Grads {
  std::vector<double> params;
  std::vector<double> inputs;  // B x D, filled only when requested
};

// Flattened minibatch. If `soft` (B x M) is nonempty it supersedes `labels`;
// mixup fills it with probability vectors.
struct Batch {
  int count = 0;
  int dim = 0;
  std::vector<double> x;       // B x D, row-major
  std::vector<int> labels;     // hard labels
  std::vector<double> soft;    // optional B x M
};

// Xavier-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.
Params init_params(const ModelConfig& cfg, uint64_t seed);

// Logits for a flattened batch (returns B x M).
std::vector<double> forward(const ModelConfig& cfg, const Params& params,
                            const std::vector<double>& x, int batch);

// Mean softmax cross-entropy and its exact analytic gradients. Input
// gradients are produced only when requested; parameter gradients can be
// skipped for input-only passes (PGD, noise descent). Internally parallel
// over fixed-size sample blocks with an ordered block reduction, so the
// result is bit-identical to a serial run for any worker count.
double loss_and_grads(const ModelConfig& cfg, const Params& params,
                      const Batch& batch, bool need_input_grads, Grads& out,
                      bool need_param_grads = true);

struct SgdState {
  std::vector<double> velocity;
};

// v <- momentum*v + g + weight_decay*p;  p <- p - lr*v
void sgd_step(Params& params, const std::vector<double>& grads, SgdState& state,
              double lr, double momentum, double weight_decay);

// Euclidean norm of the flat difference (Frobenius norm over all matrices
// jointly).
double param_distance(const Params& a, const Params& b);

// Checkpoint ("ULEP"): magic, u32 arch/H/W/C/hidden/M, u64 config digest,
// u64 count, then count little-endian f64 values.
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const Params& params);
std::pair<ModelConfig, Params> load_checkpoint(const std::filesystem::path& path);

struct GradCheckReport {
  double max_rel_param = 0.0;
  double max_rel_input = 0.0;
  int instances = 0;
};

// Central finite differences (h = 1e-5) against the analytic gradients on
// random small instances, alternating architectures, parameters and inputs.
// Relative error uses max(|analytic|+|fd|, 1e-3) in the denominator.
GradCheckReport gradcheck(int instances, uint64_t seed);

}  // namespace ule
