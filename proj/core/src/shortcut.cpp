#include "ule/shortcut.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>

#include <json.hpp>

#include "ule/common.hpp"
#include "ule/data_io.hpp"
#include "ule/parallel.hpp"

namespace ule {

CornerColor CornerColor::from_index(unsigned index, int num_channels) {
  CornerColor c;
  c.channels.resize(num_channels);
  for (int j = 0; j < num_channels; ++j)
    c.channels[j] = (index >> (num_channels - 1 - j)) & 1u;
  return c;
}

unsigned CornerColor::to_index() const {
  unsigned idx = 0;
  for (uint8_t b : channels) idx = (idx << 1) | (b ? 1u : 0u);
  return idx;
}

namespace {

void check_pos(const Image& img, PixelPosition pos) {
  if (pos.row < 0 || pos.row >= img.height || pos.col < 0 || pos.col >= img.width)
    throw index_error("pixel position (" + std::to_string(pos.row) + "," +
                      std::to_string(pos.col) + ") outside " +
                      std::to_string(img.height) + "x" + std::to_string(img.width));
}

// Shared scoring kernel. `vals` holds the class's pixel values at one
// position, image-major then channel (n*C doubles); `dist` is an n-sized
// scratch. Every public scoring path funnels through here so parallel and
// serial runs, and the table-based search, agree bitwise.
double score_from_values(const double* vals, size_t n, int channels,
                         unsigned color_index, double* dist) {
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (int j = 0; j < channels; ++j) {
      const double xi = (color_index >> (channels - 1 - j)) & 1u ? 1.0 : 0.0;
      d += std::fabs(vals[i * channels + j] - xi);
    }
    dist[i] = d;
    sum += d;
  }
  const double mean = sum / static_cast<double>(n);
  double var_sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dev = dist[i] - mean;
    var_sum += dev * dev;
  }
  const double popvar = var_sum / static_cast<double>(n);
  return mean / (popvar + kVarEps);
}

void gather_position(const ImageView& images, PixelPosition pos,
                     std::vector<double>& vals) {
  const int channels = images[0]->channels;
  vals.resize(images.size() * channels);
  for (size_t i = 0; i < images.size(); ++i)
    for (int j = 0; j < channels; ++j)
      vals[i * channels + j] = images[i]->at(pos.row, pos.col, j);
}

void check_class(const ImageView& images) {
  if (images.empty()) throw empty_class_error("class has no images");
  for (const Image* img : images)
    if (!img->same_shape(*images[0]))
      throw shape_error("class images are not identically shaped");
}

// Scores for all positions and colors of one class: table[p * 2^C + color],
// positions row-major. Parallel over position blocks; each block writes a
// disjoint slice, so the table is identical for any worker count.
std::vector<double> score_table(const ImageView& images) {
  const Image& first = *images[0];
  const int channels = first.channels;
  const unsigned ncolors = 1u << channels;
  const size_t npos = first.pixel_count();
  std::vector<double> table(npos * ncolors);

  parallel_blocks(npos, 16, [&](size_t, size_t begin, size_t end) {
    std::vector<double> vals;
    std::vector<double> dist(images.size());
    for (size_t p = begin; p < end; ++p) {
      const PixelPosition pos{static_cast<int>(p / first.width),
                              static_cast<int>(p % first.width)};
      gather_position(images, pos, vals);
      for (unsigned c = 0; c < ncolors; ++c)
        table[p * ncolors + c] =
            score_from_values(vals.data(), images.size(), channels, c, dist.data());
    }
  });
  return table;
}

Candidate best_of_table(const std::vector<double>& table, int height, int width,
                        int channels) {
  const unsigned ncolors = 1u << channels;
  size_t best = 0;
  for (size_t i = 1; i < table.size(); ++i)
    if (table[i] > table[best]) best = i;  // strict: first index wins ties
  Candidate cand;
  const size_t p = best / ncolors;
  cand.pos = {static_cast<int>(p / width), static_cast<int>(p % width)};
  cand.color = CornerColor::from_index(static_cast<unsigned>(best % ncolors), channels);
  cand.score = table[best];
  return cand;
}

}  // namespace

double pixel_distance(const Image& img, PixelPosition pos, const CornerColor& color) {
  check_pos(img, pos);
  if (static_cast<int>(color.channels.size()) != img.channels)
    throw shape_error("corner color has " + std::to_string(color.channels.size()) +
                      " channels, image has " + std::to_string(img.channels));
  double d = 0.0;
  for (int j = 0; j < img.channels; ++j)
    d += std::fabs(img.at(pos.row, pos.col, j) - (color.channels[j] ? 1.0 : 0.0));
  return d;
}

double class_objective(const ImageView& images, PixelPosition pos,
                       const CornerColor& color) {
  check_class(images);
  check_pos(*images[0], pos);
  if (static_cast<int>(color.channels.size()) != images[0]->channels)
    throw shape_error("corner color channel count mismatch");
  std::vector<double> vals;
  gather_position(images, pos, vals);
  std::vector<double> dist(images.size());
  return score_from_values(vals.data(), images.size(), images[0]->channels,
                           color.to_index(), dist.data());
}

double class_objective(const std::vector<Image>& images, PixelPosition pos,
                       const CornerColor& color) {
  return class_objective(view_of(images), pos, color);
}

Candidate search_class(const ImageView& images) {
  check_class(images);
  const Image& first = *images[0];
  return best_of_table(score_table(images), first.height, first.width, first.channels);
}

Candidate search_class(const std::vector<Image>& images) {
  return search_class(view_of(images));
}

std::vector<Candidate> search_multi(const ImageView& images, int n) {
  check_class(images);
  const Image& first = *images[0];
  if (n < 1) throw invariant_error("search_multi needs n >= 1");
  if (static_cast<size_t>(n) > first.pixel_count())
    throw shape_error("search_multi: n = " + std::to_string(n) + " exceeds " +
                      std::to_string(first.pixel_count()) + " pixel positions");

  const std::vector<double> table = score_table(images);
  const unsigned ncolors = 1u << first.channels;
  const size_t npos = first.pixel_count();

  struct PosBest {
    size_t pos;
    unsigned color;
    double score;
  };
  std::vector<PosBest> best(npos);
  for (size_t p = 0; p < npos; ++p) {
    unsigned bc = 0;
    for (unsigned c = 1; c < ncolors; ++c)
      if (table[p * ncolors + c] > table[p * ncolors + bc]) bc = c;
    best[p] = {p, bc, table[p * ncolors + bc]};
  }
  std::sort(best.begin(), best.end(), [](const PosBest& a, const PosBest& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.pos < b.pos;
  });

  std::vector<Candidate> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Candidate cand;
    cand.pos = {static_cast<int>(best[i].pos / first.width),
                static_cast<int>(best[i].pos % first.width)};
    cand.color = CornerColor::from_index(best[i].color, first.channels);
    cand.score = best[i].score;
    out.push_back(std::move(cand));
  }
  return out;
}

std::vector<Candidate> search_multi(const std::vector<Image>& images, int n) {
  return search_multi(view_of(images), n);
}

Image apply_shortcut(const Image& img, PixelPosition pos, const CornerColor& color) {
  check_pos(img, pos);
  if (static_cast<int>(color.channels.size()) != img.channels)
    throw shape_error("corner color channel count mismatch");
  Image out = img;
  for (int j = 0; j < img.channels; ++j)
    out.at(pos.row, pos.col, j) = color.channels[j] ? 1.0 : 0.0;
  return out;
}

namespace {

std::pair<LabeledDataset, ShortcutSpec> craft_impl(const LabeledDataset& ds,
                                                   int pixels_per_class) {
  ds.validate();
  const auto by_class = ds.indices_by_class();
  for (int k = 0; k < ds.num_classes; ++k)
    if (by_class[k].empty())
      throw empty_class_error("class " + std::to_string(k) + " has no images");

  ShortcutSpec spec;
  spec.height = ds.height();
  spec.width = ds.width();
  spec.channels = ds.channels();
  spec.num_classes = ds.num_classes;
  spec.classes.resize(ds.num_classes);

  for (int k = 0; k < ds.num_classes; ++k) {
    ImageView view;
    view.reserve(by_class[k].size());
    for (size_t i : by_class[k]) view.push_back(&ds.images[i]);
    spec.classes[k] = pixels_per_class == 1
                          ? std::vector<Candidate>{search_class(view)}
                          : search_multi(view, pixels_per_class);
  }

  LabeledDataset out = ds;
  out.name = ds.name.empty() ? "ops" : ds.name + "-ops";
  parallel_blocks(out.size(), 256, [&](size_t, size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i)
      for (const Candidate& cand : spec.classes[out.labels[i]])
        out.images[i] = apply_shortcut(out.images[i], cand.pos, cand.color);
  });
  return {std::move(out), std::move(spec)};
}

}  // namespace

std::pair<LabeledDataset, ShortcutSpec> craft_ops(const LabeledDataset& ds) {
  return craft_impl(ds, 1);
}

std::pair<LabeledDataset, ShortcutSpec> craft_multi(const LabeledDataset& ds,
                                                    int pixels_per_class) {
  return craft_impl(ds, pixels_per_class);
}

LabeledDataset compose(const LabeledDataset& clean, const NoiseSet& noise,
                       const ShortcutSpec& spec) {
  clean.validate();
  spec.validate();
  if (noise.size() != clean.size())
    throw shape_error("noise set has " + std::to_string(noise.size()) +
                      " deltas for " + std::to_string(clean.size()) + " images");
  if (noise.height != clean.height() || noise.width != clean.width() ||
      noise.channels != clean.channels())
    throw shape_error("noise shape does not match dataset");
  if (spec.height != clean.height() || spec.width != clean.width() ||
      spec.channels != clean.channels() || spec.num_classes != clean.num_classes)
    throw shape_error("shortcut spec does not match dataset");

  LabeledDataset out = clean;
  out.name = clean.name.empty() ? "composed" : clean.name + "-composed";
  parallel_blocks(out.size(), 256, [&](size_t, size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
      Image& img = out.images[i];
      const auto& delta = noise.deltas[i];
      for (size_t j = 0; j < img.values.size(); ++j)
        img.values[j] = clip01(img.values[j] + delta[j]);
      for (const Candidate& cand : spec.classes[out.labels[i]])
        img = apply_shortcut(img, cand.pos, cand.color);
    }
  });
  return out;
}

void ShortcutSpec::validate() const {
  if (static_cast<int>(classes.size()) != num_classes)
    throw invariant_error("spec covers " + std::to_string(classes.size()) +
                          " classes, expected " + std::to_string(num_classes));
  for (int k = 0; k < num_classes; ++k) {
    const auto& pixels = classes[k];
    for (size_t a = 0; a < pixels.size(); ++a) {
      const Candidate& cand = pixels[a];
      if (cand.pos.row < 0 || cand.pos.row >= height || cand.pos.col < 0 ||
          cand.pos.col >= width)
        throw index_error("spec class " + std::to_string(k) + " pixel out of bounds");
      if (static_cast<int>(cand.color.channels.size()) != channels)
        throw invariant_error("spec class " + std::to_string(k) + " color length mismatch");
      if (!(cand.score >= 0.0))
        throw invariant_error("spec class " + std::to_string(k) + " has negative score");
      for (size_t b = a + 1; b < pixels.size(); ++b)
        if (pixels[b].pos == cand.pos)
          throw invariant_error("spec class " + std::to_string(k) +
                                " repeats a pixel position");
    }
  }
}

void ShortcutSpec::save_json(const std::filesystem::path& path) const {
  validate();
  // Hand-rolled writer: the interface pins scores to 17 significant digits.
  std::string out;
  out += "{\"H\":" + std::to_string(height) + ",\"W\":" + std::to_string(width) +
         ",\"C\":" + std::to_string(channels) + ",\"M\":" + std::to_string(num_classes) +
         ",\"classes\":[";
  for (int k = 0; k < num_classes; ++k) {
    if (k) out += ",";
    out += "{\"label\":" + std::to_string(k) + ",\"pixels\":[";
    for (size_t i = 0; i < classes[k].size(); ++i) {
      const Candidate& cand = classes[k][i];
      if (i) out += ",";
      out += "{\"row\":" + std::to_string(cand.pos.row) +
             ",\"col\":" + std::to_string(cand.pos.col) + ",\"color\":[";
      for (size_t j = 0; j < cand.color.channels.size(); ++j) {
        if (j) out += ",";
        out += cand.color.channels[j] ? "1" : "0";
      }
      out += "],\"score\":" + fmt_g(cand.score, 17) + "}";
    }
    out += "]}";
  }
  out += "]}\n";
  write_file_atomic(path, out);
}

ShortcutSpec ShortcutSpec::load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw io_error("malformed spec JSON " + path.string() + ": " + e.what());
  }
  ShortcutSpec spec;
  try {
    spec.height = j.at("H").get<int>();
    spec.width = j.at("W").get<int>();
    spec.channels = j.at("C").get<int>();
    spec.num_classes = j.at("M").get<int>();
    spec.classes.resize(spec.num_classes);
    for (const auto& cls : j.at("classes")) {
      const int label = cls.at("label").get<int>();
      if (label < 0 || label >= spec.num_classes)
        throw io_error("spec label " + std::to_string(label) + " out of range");
      for (const auto& px : cls.at("pixels")) {
        Candidate cand;
        cand.pos.row = px.at("row").get<int>();
        cand.pos.col = px.at("col").get<int>();
        for (const auto& b : px.at("color"))
          cand.color.channels.push_back(b.get<int>() ? 1 : 0);
        cand.score = px.at("score").get<double>();
        spec.classes[label].push_back(std::move(cand));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw io_error("malformed spec JSON " + path.string() + ": " + e.what());
  }
  spec.validate();
  return spec;
}

}  // namespace ule
