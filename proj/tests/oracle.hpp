// Test-only naive oracles, written independently of the library's search
// path: direct double loops, two explicit statistics passes, no shared
// kernels. Used to pin expected values and to cross-check the exhaustive
// search on random instances.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ule/image.hpp"
#include "ule/rng.hpp"

namespace oracle {

inline double pixel_distance(const ule::Image& img, int row, int col,
                             unsigned color_bits) {
  double d = 0.0;
  for (int j = 0; j < img.channels; ++j) {
    const double xi = (color_bits >> (img.channels - 1 - j)) & 1u ? 1.0 : 0.0;
    d += std::fabs(img.at(row, col, j) - xi);
  }
  return d;
}

inline double class_objective(const std::vector<ule::Image>& images, int row,
                              int col, unsigned color_bits) {
  double sum = 0.0;
  for (const auto& img : images) sum += pixel_distance(img, row, col, color_bits);
  const double mean = sum / static_cast<double>(images.size());
  double var_sum = 0.0;
  for (const auto& img : images) {
    const double dev = pixel_distance(img, row, col, color_bits) - mean;
    var_sum += dev * dev;
  }
  const double popvar = var_sum / static_cast<double>(images.size());
  return mean / (popvar + 1e-9);
}

struct BestCandidate {
  int row = 0;
  int col = 0;
  unsigned color_bits = 0;
  double score = -1.0;
};

// Exhaustive enumeration in (row, col, color) order; strict > implements the
// smallest-(row,col,color) tie-break.
inline BestCandidate search(const std::vector<ule::Image>& images) {
  const ule::Image& first = images.front();
  BestCandidate best;
  bool have = false;
  for (int r = 0; r < first.height; ++r)
    for (int c = 0; c < first.width; ++c)
      for (unsigned bits = 0; bits < (1u << first.channels); ++bits) {
        const double s = class_objective(images, r, c, bits);
        if (!have || s > best.score) {
          best = {r, c, bits, s};
          have = true;
        }
      }
  return best;
}

inline std::vector<ule::Image> random_images(ule::Rng& rng, int n, int h, int w,
                                             int c) {
  std::vector<ule::Image> images;
  for (int i = 0; i < n; ++i) {
    ule::Image img = ule::Image::zeros(h, w, c);
    for (double& v : img.values) v = rng.uniform();
    images.push_back(std::move(img));
  }
  return images;
}

}  // namespace oracle
