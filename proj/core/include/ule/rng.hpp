#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace ule {

// All randomness flows through this wrapper. std::mt19937_64 is fully
// specified by the standard, and the variate transforms below are our own,
// so streams are bit-stable across platforms and compilers. std::*
// distributions are avoided on purpose: their sequences are
// implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0,1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

  // Uniform in [0,n), unbiased via rejection.
  size_t uniform_index(size_t n);

  // Standard normal via Box-Muller; the spare variate is cached.
  double normal();

  double beta(double a, double b);

  // Fisher-Yates. Used for epoch shuffles and mixup pairings.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  std::vector<size_t> permutation(size_t n) {
    std::vector<size_t> p(n);
    for (size_t i = 0; i < n; ++i) p[i] = i;
    shuffle(p);
    return p;
  }

 private:
  double gamma(double shape);

  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Decorrelated child seed for a named stream. splitmix64 finalizer over the
// (seed, stream, index) triple.
uint64_t derive_seed(uint64_t seed, uint64_t stream, uint64_t index = 0);

// Stream tags; one per independent consumer of a user-provided seed.
namespace seed_stream {
inline constexpr uint64_t synth_mean = 1;
inline constexpr uint64_t synth_noise = 2;
inline constexpr uint64_t model_init = 3;
inline constexpr uint64_t train_epoch = 4;
inline constexpr uint64_t em_model = 5;
inline constexpr uint64_t em_order = 6;
inline constexpr uint64_t shuffle_probe = 7;
inline constexpr uint64_t gradcheck = 8;
}  // namespace seed_stream

}  // namespace ule
