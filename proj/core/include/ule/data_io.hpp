#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ule/image.hpp"

namespace ule {

// CIFAR-10 binary batches: 3073-byte records, 1 label byte in [0,9] then
// 1024 R + 1024 G + 1024 B bytes, row-major. Bit-exact on round trip.
LabeledDataset load_cifar10(const std::vector<std::filesystem::path>& paths);
void save_cifar10(const LabeledDataset& ds, const std::filesystem::path& path);

// Self-describing container for non-CIFAR shapes ("ULED"): magic, then
// u32 N,H,W,C,M little-endian, then N u32 labels, then N*H*W*C pixel bytes
// (image-major, channel-planar, row-major), value = round(v*255).
void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path);
LabeledDataset load_dataset(const std::filesystem::path& path);

// Loads either format, telling them apart by the leading magic ('U' is not a
// valid CIFAR label byte). Multiple files concatenate in argument order.
// *was_cifar (optional) reports which format was seen.
LabeledDataset load_any(const std::vector<std::filesystem::path>& paths,
                        bool* was_cifar = nullptr);

// Gaussian class blobs around smooth, horizontally symmetric per-class mean
// patterns. Pure function of its arguments; labels are balanced and grouped
// by class. `separation` is the RMS per-pixel contrast of a class mean
// around 0.5 before clipping.
LabeledDataset make_synthetic(int num_classes, int n_per_class, int height,
                              int width, int channels, double separation,
                              double noise_std, uint64_t seed);

// Splits into (first `per_class` images of every class, the rest). Class
// means depend on the generator seed, so a train/test pair from the same
// distribution comes from one make_synthetic call split this way.
std::pair<LabeledDataset, LabeledDataset> split_by_class(const LabeledDataset& ds,
                                                         int per_class);

// Noise sidecar ("ULEN"): magic, u32 N,H,W,C little-endian, f32 bound, then
// N*H*W*C f32 values image-major, channel-planar, row-major.
void save_noise(const NoiseSet& noise, const std::filesystem::path& path);
NoiseSet load_noise(const std::filesystem::path& path);

// Writes via a temp file in the same directory, then renames, so an existing
// output is never left half-overwritten.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& bytes);

}  // namespace ule
