#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ule {

// Error taxonomy. The CLI maps these onto process exit codes
// (usage errors -> 2, io_error -> 3, everything else here -> 4).
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File-level problems: open/read/write failures, malformed or truncated
// files, bad magic bytes, corrupt records.
struct io_error : error {
  using error::error;
};

// Shape/layout mismatches between tensors, datasets, specs and models.
struct shape_error : error {
  using error::error;
};

// Out-of-bounds pixel positions or indices.
struct index_error : error {
  using error::error;
};

// Violated value-domain invariants (pixel range, noise bound, label range).
struct invariant_error : error {
  using error::error;
};

// NaN/Inf where finite values are required, or training divergence.
struct numeric_error : error {
  using error::error;
};

// A class with no examples where at least one is required.
struct empty_class_error : error {
  using error::error;
};

inline double clip01(double v) {
  return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
}

// Shortest fixed-precision decimal forms used by the file interfaces:
// 9 significant digits for metrics CSV, 17 for spec.json scores.
inline std::string fmt_g(double v, int sig_digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", sig_digits, v);
  return buf;
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace ule
