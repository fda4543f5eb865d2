#include "ule/image.hpp"

#include <cmath>

#include "ule/common.hpp"

namespace ule {

void Image::validate() const {
  if (height <= 0 || width <= 0 || (channels != 1 && channels != 3))
    throw invariant_error("image shape must be HxWx{1|3}, got " +
                          std::to_string(height) + "x" + std::to_string(width) +
                          "x" + std::to_string(channels));
  if (values.size() != static_cast<size_t>(height) * width * channels)
    throw invariant_error("image buffer length " + std::to_string(values.size()) +
                          " does not match shape");
  for (double v : values)
    if (!(v >= 0.0 && v <= 1.0))
      throw invariant_error("pixel value " + std::to_string(v) + " outside [0,1]");
}

void LabeledDataset::validate() const {
  if (images.size() != labels.size())
    throw invariant_error("dataset has " + std::to_string(images.size()) +
                          " images but " + std::to_string(labels.size()) + " labels");
  if (num_classes < 1) throw invariant_error("dataset num_classes must be >= 1");
  for (size_t i = 0; i < images.size(); ++i) {
    images[i].validate();
    if (!images[i].same_shape(images[0]))
      throw invariant_error("image " + std::to_string(i) + " shape differs from image 0");
    if (labels[i] < 0 || labels[i] >= num_classes)
      throw invariant_error("label " + std::to_string(labels[i]) + " at index " +
                            std::to_string(i) + " outside [0," +
                            std::to_string(num_classes) + ")");
  }
}

std::vector<std::vector<size_t>> LabeledDataset::indices_by_class() const {
  std::vector<std::vector<size_t>> by_class(num_classes);
  for (size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  return by_class;
}

void NoiseSet::validate() const {
  if (height <= 0 || width <= 0 || channels <= 0)
    if (!deltas.empty())
      throw invariant_error("noise set with images must carry a positive shape");
  if (!(bound >= 0.0f && bound <= 1.0f))
    throw invariant_error("noise bound outside [0,1]");
  const size_t per = values_per_image();
  for (size_t i = 0; i < deltas.size(); ++i) {
    if (deltas[i].size() != per)
      throw invariant_error("delta " + std::to_string(i) + " length mismatch");
    for (float v : deltas[i]) {
      if (!(std::fabs(v) <= bound))
        throw invariant_error("delta value " + std::to_string(v) +
                              " exceeds bound " + std::to_string(bound));
    }
  }
}

}  // namespace ule
