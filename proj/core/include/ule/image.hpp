#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ule {

// Pixel values live in [0,1]; 8-bit quantization happens only at file
// boundaries. Storage is channel-planar, row-major within each channel:
// values[(ch*H + r)*W + c].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> values;

  static Image zeros(int h, int w, int c) {
    Image img;
    img.height = h;
    img.width = w;
    img.channels = c;
    img.values.assign(static_cast<size_t>(h) * w * c, 0.0);
    return img;
  }

  size_t index(int r, int c, int ch) const {
    return (static_cast<size_t>(ch) * height + r) * width + c;
  }
  double at(int r, int c, int ch) const { return values[index(r, c, ch)]; }
  double& at(int r, int c, int ch) { return values[index(r, c, ch)]; }

  size_t pixel_count() const { return static_cast<size_t>(height) * width; }
  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }

  // Throws invariant_error on range or length violations.
  void validate() const;
};

struct LabeledDataset {
  std::vector<Image> images;
  std::vector<int> labels;
  int num_classes = 0;
  std::string name;

  size_t size() const { return images.size(); }
  int height() const { return images.empty() ? 0 : images[0].height; }
  int width() const { return images.empty() ? 0 : images[0].width; }
  int channels() const { return images.empty() ? 0 : images[0].channels; }

  // images/labels aligned, identical shapes, labels < num_classes, values
  // in range. Called by every constructor-like path in the library.
  void validate() const;

  std::vector<std::vector<size_t>> indices_by_class() const;
};

// Per-image additive noise, L-inf bounded. Values are 32-bit floats because
// that is the sidecar file's precision; keeping them as floats in memory
// makes the file round trip the identity.
struct NoiseSet {
  int height = 0;
  int width = 0;
  int channels = 0;
  float bound = 8.0f / 255.0f;
  std::vector<std::vector<float>> deltas;

  size_t size() const { return deltas.size(); }
  size_t values_per_image() const {
    return static_cast<size_t>(height) * width * channels;
  }

  void validate() const;
};

}  // namespace ule
