#pragma once

#include <cstdint>
#include <vector>

#include "ule/image.hpp"
#include "ule/nn.hpp"

namespace ule {

enum class EMMode { sample_wise, class_wise };

struct EMConfig {
  double bound = 8.0 / 255.0;              // L-inf radius
  int inner_steps = 20;                    // sign-descent steps per noise pass
  double inner_step_size = (8.0 / 255.0) / 10.0;
  int outer_model_steps = 10;              // generator SGD steps per round
  double stop_train_acc = 0.99;            // on the noised training data
  int max_rounds = 100;
  EMMode mode = EMMode::sample_wise;
  uint64_t seed = 0;
  // Generator SGD schedule; not part of the noise contract, only of how the
  // generator model is fitted between noise passes.
  int batch_size = 64;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;

  void validate() const;
};

// One full pass of projected sign descent on the per-image noise:
//   delta <- clamp(delta - alpha * sign(grad), [-eps,eps] and [-x, 1-x])
// so both |delta| <= eps and x+delta in [0,1] hold exactly after every step.
// sign(0) = 0, so zero-gradient coordinates do not drift. In class-wise mode
// the gradient is averaged over the class and all members stay bitwise
// identical.
std::vector<std::vector<double>> inner_min_noise(
    const Params& params, const ModelConfig& model_cfg, const LabeledDataset& ds,
    const std::vector<std::vector<double>>& deltas, const EMConfig& cfg);

struct EMResult {
  NoiseSet noise;
  bool converged = false;    // stop_train_acc reached within max_rounds
  int rounds = 0;
  double final_train_acc = 0.0;  // on the noised data, at the returned noise
};

// Alternates generator SGD on clip(x+delta) with full noise passes until the
// noised training accuracy reaches cfg.stop_train_acc or max_rounds is
// exhausted (then the best-seen noise is returned with converged=false).
EMResult craft_em(const LabeledDataset& ds, const ModelConfig& model_cfg,
                  const EMConfig& cfg);

}  // namespace ule
