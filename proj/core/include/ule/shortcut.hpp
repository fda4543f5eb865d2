#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "ule/image.hpp"

namespace ule {

// Variance regularizer in the search objective. A zero-variance candidate
// (every image of the class identical at the pixel) is the ideal uniform
// shortcut, so it scores d/kVarEps rather than erroring out.
inline constexpr double kVarEps = 1e-9;

struct PixelPosition {
  int row = 0;
  int col = 0;
  bool operator==(const PixelPosition&) const = default;
};

// Each channel exactly 0 or 1. The integer form indexes the search space;
// channel 0 is the most significant bit.
struct CornerColor {
  std::vector<uint8_t> channels;

  static CornerColor from_index(unsigned index, int num_channels);
  unsigned to_index() const;
  bool operator==(const CornerColor&) const = default;
};

struct Candidate {
  PixelPosition pos;
  CornerColor color;
  double score = 0.0;
};

// Per-class winning candidates: one for the single-pixel search, n for the
// n-pixel extension. Within a class all positions are pairwise distinct.
struct ShortcutSpec {
  int height = 0;
  int width = 0;
  int channels = 0;
  int num_classes = 0;
  std::vector<std::vector<Candidate>> classes;

  void validate() const;
  void save_json(const std::filesystem::path& path) const;
  static ShortcutSpec load_json(const std::filesystem::path& path);
};

// Non-owning view of one class's images.
using ImageView = std::vector<const Image*>;

inline ImageView view_of(const std::vector<Image>& images) {
  ImageView v;
  v.reserve(images.size());
  for (const Image& img : images) v.push_back(&img);
  return v;
}

// Sum over channels of |pixel value - color|; in [0, C].
double pixel_distance(const Image& img, PixelPosition pos, const CornerColor& color);

// mean(d) / (popvar(d) + kVarEps) over the class's per-image distances.
// Population variance (divide by n), two-pass, accumulated in image order.
double class_objective(const ImageView& images, PixelPosition pos, const CornerColor& color);
double class_objective(const std::vector<Image>& images, PixelPosition pos,
                       const CornerColor& color);

inline size_t search_space_size(int height, int width, int channels) {
  return static_cast<size_t>(height) * width * (1u << channels);
}

// Exhaustive argmax over all H*W*2^C candidates. Ties break toward the
// smallest (row, col, color index). Bit-identical for any worker count.
Candidate search_class(const ImageView& images);
Candidate search_class(const std::vector<Image>& images);

// Top-n distinct positions from one score table: each position keeps its
// best color (ties -> smaller color index), positions rank by that score
// (ties -> smaller row, col). n == 1 reduces to search_class.
std::vector<Candidate> search_multi(const ImageView& images, int n);
std::vector<Candidate> search_multi(const std::vector<Image>& images, int n);

// Copy of the image with the selected pixel overwritten by the color.
Image apply_shortcut(const Image& img, PixelPosition pos, const CornerColor& color);

// Searches every class and perturbs all of its images at the winning pixel.
std::pair<LabeledDataset, ShortcutSpec> craft_ops(const LabeledDataset& ds);

// n-pixel variant; pixels_per_class == 1 matches craft_ops.
std::pair<LabeledDataset, ShortcutSpec> craft_multi(const LabeledDataset& ds,
                                                    int pixels_per_class);

// clip(x + delta), then the class's shortcut pixels on top.
LabeledDataset compose(const LabeledDataset& clean, const NoiseSet& noise,
                       const ShortcutSpec& spec);

}  // namespace ule
