#include "ule/data_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "ule/common.hpp"
#include "ule/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts unsupported");

namespace ule {

namespace {

constexpr int kCifarDim = 32;
constexpr size_t kCifarPixels = 1024;
constexpr size_t kCifarRecord = 1 + 3 * kCifarPixels;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (!in.good() && !in.eof()) throw io_error("read failed on " + path.string());
  return bytes;
}

uint8_t quantize(double v) {
  const long q = std::lround(v * 255.0);
  return static_cast<uint8_t>(q < 0 ? 0 : (q > 255 ? 255 : q));
}

void append_u32(std::string& out, uint32_t v) {
  out.append(reinterpret_cast<const char*>(&v), 4);
}

void append_f32(std::string& out, float v) {
  out.append(reinterpret_cast<const char*>(&v), 4);
}

uint32_t read_u32(const std::string& bytes, size_t off) {
  uint32_t v;
  std::memcpy(&v, bytes.data() + off, 4);
  return v;
}

float read_f32(const std::string& bytes, size_t off) {
  float v;
  std::memcpy(&v, bytes.data() + off, 4);
  return v;
}

void parse_cifar_bytes(const std::string& bytes,
                       const std::filesystem::path& path, LabeledDataset& ds) {
  if (bytes.size() % kCifarRecord != 0)
    throw io_error("malformed CIFAR-10 file " + path.string() + ": size " +
                   std::to_string(bytes.size()) + " is not a multiple of " +
                   std::to_string(kCifarRecord));
  const size_t n = bytes.size() / kCifarRecord;
  for (size_t i = 0; i < n; ++i) {
    const auto* rec = reinterpret_cast<const uint8_t*>(bytes.data()) + i * kCifarRecord;
    if (rec[0] > 9)
      throw io_error("corrupt record " + std::to_string(i) + " in " + path.string() +
                     ": label byte " + std::to_string(rec[0]) + " > 9");
    Image img = Image::zeros(kCifarDim, kCifarDim, 3);
    for (size_t j = 0; j < 3 * kCifarPixels; ++j)
      img.values[j] = rec[1 + j] / 255.0;
    ds.images.push_back(std::move(img));
    ds.labels.push_back(rec[0]);
  }
}

}  // namespace

LabeledDataset load_cifar10(const std::vector<std::filesystem::path>& paths) {
  LabeledDataset ds;
  ds.num_classes = 10;
  ds.name = "cifar10";
  for (const auto& p : paths) parse_cifar_bytes(read_file(p), p, ds);
  ds.validate();
  return ds;
}

void save_cifar10(const LabeledDataset& ds, const std::filesystem::path& path) {
  if (ds.num_classes > 256)
    throw shape_error("CIFAR-10 format stores labels as one byte; num_classes " +
                      std::to_string(ds.num_classes) + " > 256");
  std::string out;
  out.reserve(ds.size() * kCifarRecord);
  for (size_t i = 0; i < ds.size(); ++i) {
    const Image& img = ds.images[i];
    if (img.height != kCifarDim || img.width != kCifarDim || img.channels != 3)
      throw shape_error("CIFAR-10 format requires 32x32x3 images, got " +
                        std::to_string(img.height) + "x" + std::to_string(img.width) +
                        "x" + std::to_string(img.channels));
    out.push_back(static_cast<char>(ds.labels[i]));
    for (double v : img.values) out.push_back(static_cast<char>(quantize(v)));
  }
  write_file_atomic(path, out);
}

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path) {
  ds.validate();
  std::string out = "ULED";
  append_u32(out, static_cast<uint32_t>(ds.size()));
  append_u32(out, static_cast<uint32_t>(ds.height()));
  append_u32(out, static_cast<uint32_t>(ds.width()));
  append_u32(out, static_cast<uint32_t>(ds.channels()));
  append_u32(out, static_cast<uint32_t>(ds.num_classes));
  for (int label : ds.labels) append_u32(out, static_cast<uint32_t>(label));
  for (const Image& img : ds.images)
    for (double v : img.values) out.push_back(static_cast<char>(quantize(v)));
  write_file_atomic(path, out);
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 24 || bytes.compare(0, 4, "ULED") != 0)
    throw io_error("bad magic in " + path.string() + ": expected ULED");
  const uint32_t n = read_u32(bytes, 4);
  const uint32_t h = read_u32(bytes, 8);
  const uint32_t w = read_u32(bytes, 12);
  const uint32_t c = read_u32(bytes, 16);
  const uint32_t m = read_u32(bytes, 20);
  const size_t per = static_cast<size_t>(h) * w * c;
  const size_t want = 24 + 4ull * n + per * n;
  if (bytes.size() != want)
    throw io_error("malformed ULED file " + path.string() + ": size " +
                   std::to_string(bytes.size()) + ", header implies " +
                   std::to_string(want));
  LabeledDataset ds;
  ds.num_classes = static_cast<int>(m);
  ds.name = path.stem().string();
  ds.images.reserve(n);
  ds.labels.reserve(n);
  size_t off = 24;
  for (uint32_t i = 0; i < n; ++i, off += 4)
    ds.labels.push_back(static_cast<int>(read_u32(bytes, off)));
  for (uint32_t i = 0; i < n; ++i) {
    Image img = Image::zeros(h, w, c);
    const auto* src = reinterpret_cast<const uint8_t*>(bytes.data()) + off;
    for (size_t j = 0; j < per; ++j) img.values[j] = src[j] / 255.0;
    off += per;
    ds.images.push_back(std::move(img));
  }
  ds.validate();
  return ds;
}

LabeledDataset load_any(const std::vector<std::filesystem::path>& paths,
                        bool* was_cifar) {
  if (paths.empty()) throw io_error("no input dataset files given");
  bool all_cifar = true;
  LabeledDataset ds;
  bool first = true;
  for (const auto& p : paths) {
    std::ifstream probe(p, std::ios::binary);
    if (!probe) throw io_error("cannot open " + p.string());
    char magic[4] = {0, 0, 0, 0};
    probe.read(magic, 4);
    probe.close();
    const bool is_uled = std::memcmp(magic, "ULED", 4) == 0;
    LabeledDataset part = is_uled ? load_dataset(p) : load_cifar10({p});
    all_cifar = all_cifar && !is_uled;
    if (first) {
      ds = std::move(part);
      first = false;
    } else {
      if (part.num_classes != ds.num_classes || part.height() != ds.height() ||
          part.width() != ds.width() || part.channels() != ds.channels())
        throw shape_error("dataset file " + p.string() +
                          " is shape-incompatible with earlier inputs");
      for (size_t i = 0; i < part.size(); ++i) {
        ds.images.push_back(std::move(part.images[i]));
        ds.labels.push_back(part.labels[i]);
      }
    }
  }
  if (was_cifar) *was_cifar = all_cifar;
  return ds;
}

namespace {

// cos(pi*f*(2u+1-N)/(2N)); even around the image center, so class means are
// invariant under horizontal flips.
double sym_basis(int u, int f, int n) {
  return std::cos(M_PI * f * (2.0 * u + 1.0 - n) / (2.0 * n));
}

}  // namespace

LabeledDataset make_synthetic(int num_classes, int n_per_class, int height,
                              int width, int channels, double separation,
                              double noise_std, uint64_t seed) {
  if (num_classes < 2) throw invariant_error("make_synthetic needs >= 2 classes");
  if (n_per_class < 2) throw invariant_error("make_synthetic needs >= 2 images per class");
  if (separation < 0.0 || noise_std < 0.0)
    throw invariant_error("separation and noise_std must be nonnegative");

  LabeledDataset ds;
  ds.num_classes = num_classes;
  ds.name = "synthetic";
  ds.images.reserve(static_cast<size_t>(num_classes) * n_per_class);
  ds.labels.reserve(static_cast<size_t>(num_classes) * n_per_class);

  const size_t per = static_cast<size_t>(height) * width * channels;
  constexpr int kComponents = 3;
  constexpr int kMaxFreq = 2;  // low frequencies only, so small crops keep the pattern

  for (int k = 0; k < num_classes; ++k) {
    Rng mean_rng(derive_seed(seed, seed_stream::synth_mean, k));
    std::vector<double> mean(per, 0.0);
    for (int ch = 0; ch < channels; ++ch) {
      double fr[kComponents], fc[kComponents], wt[kComponents];
      for (int t = 0; t < kComponents; ++t) {
        fr[t] = static_cast<double>(mean_rng.uniform_index(kMaxFreq + 1));
        fc[t] = static_cast<double>(mean_rng.uniform_index(kMaxFreq + 1));
        wt[t] = mean_rng.normal();
      }
      for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) {
          double p = 0.0;
          for (int t = 0; t < kComponents; ++t)
            p += wt[t] * sym_basis(r, static_cast<int>(fr[t]), height) *
                 sym_basis(c, static_cast<int>(fc[t]), width);
          mean[(static_cast<size_t>(ch) * height + r) * width + c] = p;
        }
    }
    double sq = 0.0;
    for (double v : mean) sq += v * v;
    const double rms = std::sqrt(sq / per);
    const double scale = rms > 1e-12 ? separation / rms : 0.0;

    Rng noise_rng(derive_seed(seed, seed_stream::synth_noise, k));
    for (int i = 0; i < n_per_class; ++i) {
      Image img;
      img.height = height;
      img.width = width;
      img.channels = channels;
      img.values.resize(per);
      for (size_t j = 0; j < per; ++j) {
        const double n = noise_std > 0.0 ? noise_std * noise_rng.normal() : 0.0;
        img.values[j] = clip01(0.5 + scale * mean[j] + n);
      }
      ds.images.push_back(std::move(img));
      ds.labels.push_back(k);
    }
  }
  ds.validate();
  return ds;
}

std::pair<LabeledDataset, LabeledDataset> split_by_class(const LabeledDataset& ds,
                                                         int per_class) {
  ds.validate();
  LabeledDataset first, rest;
  first.num_classes = rest.num_classes = ds.num_classes;
  first.name = ds.name + "-a";
  rest.name = ds.name + "-b";
  std::vector<int> taken(ds.num_classes, 0);
  for (size_t i = 0; i < ds.size(); ++i) {
    LabeledDataset& dst = taken[ds.labels[i]]++ < per_class ? first : rest;
    dst.images.push_back(ds.images[i]);
    dst.labels.push_back(ds.labels[i]);
  }
  return {std::move(first), std::move(rest)};
}

void save_noise(const NoiseSet& noise, const std::filesystem::path& path) {
  noise.validate();
  std::string out = "ULEN";
  append_u32(out, static_cast<uint32_t>(noise.size()));
  append_u32(out, static_cast<uint32_t>(noise.height));
  append_u32(out, static_cast<uint32_t>(noise.width));
  append_u32(out, static_cast<uint32_t>(noise.channels));
  append_f32(out, noise.bound);
  for (const auto& d : noise.deltas)
    for (float v : d) append_f32(out, v);
  write_file_atomic(path, out);
}

NoiseSet load_noise(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 24 || bytes.compare(0, 4, "ULEN") != 0)
    throw io_error("bad magic in " + path.string() + ": expected ULEN");
  NoiseSet noise;
  const uint32_t n = read_u32(bytes, 4);
  noise.height = static_cast<int>(read_u32(bytes, 8));
  noise.width = static_cast<int>(read_u32(bytes, 12));
  noise.channels = static_cast<int>(read_u32(bytes, 16));
  noise.bound = read_f32(bytes, 20);
  const size_t per = noise.values_per_image();
  if (bytes.size() != 24 + 4ull * per * n)
    throw io_error("malformed ULEN file " + path.string() +
                   ": payload does not match header shape");
  noise.deltas.resize(n);
  size_t off = 24;
  for (uint32_t i = 0; i < n; ++i) {
    noise.deltas[i].resize(per);
    for (size_t j = 0; j < per; ++j, off += 4) {
      const float v = read_f32(bytes, off);
      if (!(std::fabs(v) <= noise.bound))
        throw io_error("noise value " + std::to_string(v) + " in " + path.string() +
                       " exceeds declared bound " + std::to_string(noise.bound));
      noise.deltas[i][j] = v;
    }
  }
  return noise;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out.good()) throw io_error("write failed on " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw io_error("rename to " + path.string() + " failed: " + ec.message());
  }
}

}  // namespace ule
