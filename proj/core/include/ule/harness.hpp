#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "ule/image.hpp"
#include "ule/nn.hpp"
#include "ule/rng.hpp"
#include "ule/shortcut.hpp"

namespace ule {

struct AugmentConfig {
  int crop_padding = 4;
  double flip_prob = 0.5;
  int cutout_size = 0;      // 0 = off; the conventional default when on is H/2
  double mixup_alpha = 0.0;  // 0 = off; the conventional default when on is 1.0

  void validate(int height, int width) const;
};

struct ATConfig {
  bool enabled = false;
  double epsilon = 8.0 / 255.0;
  double step_size = 2.0 / 255.0;
  int steps = 10;
  bool random_start = true;

  void validate() const;
};

struct TrainConfig {
  int epochs = 40;
  int batch_size = 64;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::vector<int> lr_milestones;  // 0-based epochs; lr *= lr_decay at epoch start
  double lr_decay = 0.1;
  uint64_t seed = 0;
  AugmentConfig augment;
  ATConfig at;

  void validate() const;
};

struct EpochRecord {
  double train_acc = 0.0;   // un-augmented pass over the training set
  double test_acc = 0.0;    // untouched test set
  double train_loss = 0.0;  // mean optimization loss over the epoch's batches
  double param_dist = 0.0;  // ||theta - theta0||_F
};

struct MetricsLog {
  std::vector<EpochRecord> epochs;

  // CSV: header epoch,train_acc,test_acc,train_loss,param_dist; 9 significant
  // digits per float.
  void write_csv(const std::filesystem::path& path) const;
  // JSON summary: final accuracies plus epoch_to_reach(0.9).
  void write_summary(const std::filesystem::path& path) const;
};

// Zero-pad by crop_padding, take a uniform random crop back to the original
// size, then flip horizontally with flip_prob.
Image augment_standard(const Image& img, Rng& rng, const AugmentConfig& cfg);

Image flip_horizontal(const Image& img);

// Zero out the intersection of a size x size square (uniform random center)
// with the image bounds.
Image cutout(const Image& img, Rng& rng, int size);

// One lambda ~ Beta(alpha, alpha) per batch; every sample blends with a
// random permutation partner. Converts the batch to soft labels.
void mixup_batch(Batch& batch, int num_classes, Rng& rng, double alpha);

// Deterministic half of mixup: blend with the given lambda and partners.
// lambda=1 and self-partners are exact identities.
void mixup_apply(Batch& batch, int num_classes, double lambda,
                 const std::vector<size_t>& partner);

// Loss-ascent PGD inside the epsilon box intersected with [0,1]; overwrites
// batch.x with the adversarial inputs.
void pgd_attack(const Params& params, const ModelConfig& cfg, Batch& batch,
                const ATConfig& at, Rng& rng);

struct TrainResult {
  Params params;
  Params initial;  // theta0 snapshot
  MetricsLog log;
};

// Full training loop: per epoch a seeded shuffle, then per batch
// crop/flip -> cutout -> mixup -> PGD (each if enabled) -> one SGD step.
// Deterministic given configs and seed.
TrainResult train(const LabeledDataset& train_set, const LabeledDataset& test_set,
                  const ModelConfig& model_cfg, const TrainConfig& cfg);

// Fraction of argmax(logits) == label; argmax ties break toward the smallest
// class index.
double evaluate(const Params& params, const ModelConfig& cfg, const LabeledDataset& ds);

// Re-pairs every image with the perturbation and label of a random donor
// (Table-style shuffle probe). Deterministic given seed.
LabeledDataset shuffle_probe(const LabeledDataset& clean, const NoiseSet& noise,
                             uint64_t seed);
LabeledDataset shuffle_probe(const LabeledDataset& clean, const ShortcutSpec& spec,
                             uint64_t seed);
// Explicit-permutation variants (perm[i] = donor index for output slot i).
LabeledDataset shuffle_probe_with_permutation(const LabeledDataset& clean,
                                              const NoiseSet& noise,
                                              const std::vector<size_t>& perm);
LabeledDataset shuffle_probe_with_permutation(const LabeledDataset& clean,
                                              const ShortcutSpec& spec,
                                              const std::vector<size_t>& perm);

// First epoch index whose train accuracy reaches the threshold.
std::optional<int> epoch_to_reach(const MetricsLog& log, double threshold);

}  // namespace ule
