#include "et/data.hpp"

#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "et/error.hpp"
#include "et/random.hpp"

namespace et {

std::string_view to_string(Domain d) { return d == Domain::source ? "source" : "target"; }

Domain parse_domain(std::string_view name) {
  if (name == "source") return Domain::source;
  if (name == "target") return Domain::target;
  throw Error("unknown domain '" + std::string(name) + "'");
}

void LabeledDataset::validate() const {
  if (samples.size() != labels.size()) throw Error("dataset: samples and labels differ in length");
  const std::size_t d = dim();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].size() != d) throw Error("dataset: sample " + std::to_string(i) + " has wrong dimension");
    if (labels[i] >= class_count)
      throw Error("dataset: label of sample " + std::to_string(i) + " out of range");
  }
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  LabeledDataset out;
  out.class_count = class_count;
  out.samples.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    out.samples.push_back(samples.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

std::vector<Vector> blob_centroids(std::size_t class_count, std::size_t dim, double separation) {
  std::vector<Vector> centroids(class_count, Vector(dim, 0.0));
  if (class_count < 2) return centroids;
  if (class_count == 2 || dim == 1) {
    const double offset = 0.5 * static_cast<double>(class_count - 1);
    for (std::size_t k = 0; k < class_count; ++k)
      centroids[k][0] = (static_cast<double>(k) - offset) * separation;
    return centroids;
  }
  const double k_count = static_cast<double>(class_count);
  const double radius = separation / (2.0 * std::sin(std::numbers::pi / k_count));
  for (std::size_t k = 0; k < class_count; ++k) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / k_count;
    centroids[k][0] = radius * std::cos(angle);
    centroids[k][1] = radius * std::sin(angle);
  }
  return centroids;
}

LabeledDataset gen_blobs(std::size_t class_count, std::size_t per_class, std::size_t dim,
                         double separation, std::uint64_t seed) {
  if (class_count == 0 || per_class == 0 || dim == 0)
    throw Error("gen_blobs: counts and dimension must be positive");
  const auto centroids = blob_centroids(class_count, dim, separation);
  Rng rng(seed);
  LabeledDataset d;
  d.class_count = class_count;
  d.samples.reserve(class_count * per_class);
  for (std::size_t k = 0; k < class_count; ++k) {
    for (std::size_t n = 0; n < per_class; ++n) {
      Vector x(dim);
      for (std::size_t i = 0; i < dim; ++i) x[i] = centroids[k][i] + rng.normal();
      d.samples.push_back(std::move(x));
      d.labels.push_back(k);
    }
  }
  return d;
}

LabeledDataset shift_domain(const LabeledDataset& d, const ShiftSpec& shift, std::uint64_t seed) {
  const std::size_t dim = d.dim();
  if (!shift.translation.empty() && shift.translation.size() != dim)
    throw Error("shift_domain: translation dimension mismatch");
  if (shift.rotation_deg != 0.0 && dim < 2)
    throw Error("shift_domain: rotation needs at least two dimensions");
  if (shift.noise_sigma < 0.0) throw Error("shift_domain: noise sigma must be non-negative");

  const double theta = shift.rotation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Rng rng(seed);
  LabeledDataset out = d;
  for (auto& x : out.samples) {
    if (shift.rotation_deg != 0.0) {
      const double x0 = x[0];
      const double x1 = x[1];
      x[0] = c * x0 - s * x1;
      x[1] = s * x0 + c * x1;
    }
    for (std::size_t i = 0; i < shift.translation.size(); ++i) x[i] += shift.translation[i];
    if (shift.noise_sigma > 0.0)
      for (double& v : x) v += shift.noise_sigma * rng.normal();
  }
  return out;
}

DatasetSplits split_dataset(const LabeledDataset& d, const SplitFractions& fractions,
                            std::uint64_t seed) {
  if (fractions.train < 0 || fractions.validation < 0 || fractions.test < 0 ||
      std::abs(fractions.train + fractions.validation + fractions.test - 1.0) > 1e-9)
    throw Error("split_dataset: fractions must be non-negative and sum to 1");
  const std::size_t n = d.size();
  const auto n_train = static_cast<std::size_t>(std::llround(fractions.train * static_cast<double>(n)));
  const auto n_val = std::min(
      n - n_train, static_cast<std::size_t>(std::llround(fractions.validation * static_cast<double>(n))));
  Rng rng(seed);
  const auto order = rng.permutation(n);
  const std::span<const std::size_t> all(order);
  return {d.subset(all.subspan(0, n_train)), d.subset(all.subspan(n_train, n_val)),
          d.subset(all.subspan(n_train + n_val))};
}

MixedTestSet make_mixed_test(const LabeledDataset& source_pool, const LabeledDataset& target_pool,
                             std::size_t n, double rho, std::uint64_t seed) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw Error("make_mixed_test: contamination must lie in [0, 1]");
  const auto n_source = static_cast<std::size_t>(std::llround(rho * static_cast<double>(n)));
  const std::size_t n_target = n - n_source;
  if (n_source > source_pool.size())
    throw Error("make_mixed_test: insufficient held-out source samples (need " +
                std::to_string(n_source) + ", have " + std::to_string(source_pool.size()) + ")");
  if (n_target > target_pool.size())
    throw Error("make_mixed_test: insufficient held-out target samples (need " +
                std::to_string(n_target) + ", have " + std::to_string(target_pool.size()) + ")");

  Rng rng(seed);
  auto src_rng = rng.substream("source");
  auto tgt_rng = rng.substream("target");
  auto order_rng = rng.substream("order");
  const auto src_order = src_rng.permutation(source_pool.size());
  const auto tgt_order = tgt_rng.permutation(target_pool.size());

  struct Pick {
    Domain origin;
    std::size_t index;
  };
  std::vector<Pick> picks;
  picks.reserve(n);
  for (std::size_t i = 0; i < n_source; ++i) picks.push_back({Domain::source, src_order[i]});
  for (std::size_t i = 0; i < n_target; ++i) picks.push_back({Domain::target, tgt_order[i]});
  order_rng.shuffle(picks);

  MixedTestSet mixed;
  mixed.data.class_count = std::max(source_pool.class_count, target_pool.class_count);
  mixed.contamination = n == 0 ? 0.0 : static_cast<double>(n_source) / static_cast<double>(n);
  for (const auto& p : picks) {
    const auto& pool = p.origin == Domain::source ? source_pool : target_pool;
    mixed.data.samples.push_back(pool.samples[p.index]);
    mixed.data.labels.push_back(pool.labels[p.index]);
    mixed.origin.push_back(p.origin);
  }
  return mixed;
}

namespace {

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (offset + 4 > bytes.size())
    throw Error(path.string() + ": truncated header at byte " + std::to_string(offset));
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                              static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b.data(), 4);
}

}  // namespace

LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        std::size_t class_count) {
  const auto img = read_bytes(images);
  const auto lab = read_bytes(labels);

  if (const auto magic = read_be32(img, 0, images); magic != 0x00000803)
    throw Error(images.string() + ": bad magic at byte 0 (expected 0x00000803)");
  if (const auto magic = read_be32(lab, 0, labels); magic != 0x00000801)
    throw Error(labels.string() + ": bad magic at byte 0 (expected 0x00000801)");

  const std::size_t count = read_be32(img, 4, images);
  const std::size_t rows = read_be32(img, 8, images);
  const std::size_t cols = read_be32(img, 12, images);
  const std::size_t label_count = read_be32(lab, 4, labels);
  if (label_count != count)
    throw Error(labels.string() + ": label count " + std::to_string(label_count) +
                " does not match image count " + std::to_string(count));

  const std::size_t pixels = rows * cols;
  const std::size_t image_end = 16 + count * pixels;
  if (img.size() < image_end)
    throw Error(images.string() + ": truncated payload at byte " + std::to_string(img.size()) +
                " (expected " + std::to_string(image_end) + " bytes)");
  if (lab.size() < 8 + count)
    throw Error(labels.string() + ": truncated payload at byte " + std::to_string(lab.size()) +
                " (expected " + std::to_string(8 + count) + " bytes)");

  LabeledDataset d;
  d.samples.reserve(count);
  std::size_t max_label = 0;
  for (std::size_t n = 0; n < count; ++n) {
    Vector x(pixels);
    for (std::size_t p = 0; p < pixels; ++p) x[p] = static_cast<double>(img[16 + n * pixels + p]) / 255.0;
    d.samples.push_back(std::move(x));
    const std::size_t label = lab[8 + n];
    max_label = std::max(max_label, label);
    if (class_count != 0 && label >= class_count)
      throw Error(labels.string() + ": label " + std::to_string(label) + " at byte " +
                  std::to_string(8 + n) + " out of range");
    d.labels.push_back(label);
  }
  d.class_count = class_count != 0 ? class_count : (count == 0 ? 0 : max_label + 1);
  return d;
}

void write_idx(const LabeledDataset& d, std::size_t width, std::size_t height,
               const std::filesystem::path& images, const std::filesystem::path& labels) {
  d.validate();
  if (!d.empty() && d.dim() != width * height) throw Error("write_idx: sample size is not width*height");
  std::ofstream img(images, std::ios::binary);
  std::ofstream lab(labels, std::ios::binary);
  if (!img) throw Error("cannot open '" + images.string() + "' for writing");
  if (!lab) throw Error("cannot open '" + labels.string() + "' for writing");
  write_be32(img, 0x00000803);
  write_be32(img, static_cast<std::uint32_t>(d.size()));
  write_be32(img, static_cast<std::uint32_t>(height));
  write_be32(img, static_cast<std::uint32_t>(width));
  write_be32(lab, 0x00000801);
  write_be32(lab, static_cast<std::uint32_t>(d.size()));
  for (std::size_t n = 0; n < d.size(); ++n) {
    for (double v : d.samples[n]) {
      const double clamped = std::clamp(v, 0.0, 1.0);
      img.put(static_cast<char>(static_cast<unsigned char>(std::lround(clamped * 255.0))));
    }
    if (d.labels[n] > 255) throw Error("write_idx: label does not fit in a byte");
    lab.put(static_cast<char>(static_cast<unsigned char>(d.labels[n])));
  }
  if (!img || !lab) throw Error("write_idx: write failed");
}

LabeledDataset parse_csv(std::istream& in, const CsvOptions& options) {
  LabeledDataset d;
  std::string line;
  std::size_t row = 0;
  std::size_t max_label = 0;
  bool header_pending = options.has_header;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    std::size_t column = 0;
    while (std::getline(ss, cell, ',')) {
      ++column;
      const auto first = cell.find_first_not_of(" \t");
      const auto last = cell.find_last_not_of(" \t");
      const std::string trimmed = first == std::string::npos ? "" : cell.substr(first, last - first + 1);
      char* end = nullptr;
      const double v = std::strtod(trimmed.c_str(), &end);
      if (trimmed.empty() || end != trimmed.c_str() + trimmed.size() || !std::isfinite(v))
        throw Error("csv row " + std::to_string(row) + ", column " + std::to_string(column) +
                    ": non-numeric cell '" + trimmed + "'");
      cells.push_back(v);
    }
    if (cells.size() < 2) throw Error("csv row " + std::to_string(row) + ": need features and a label");
    const double raw_label = cells.back();
    cells.pop_back();
    if (raw_label < 0 || raw_label != std::floor(raw_label))
      throw Error("csv row " + std::to_string(row) + ": label must be a non-negative integer");
    const auto label = static_cast<std::size_t>(raw_label);
    if (options.class_count != 0 && label >= options.class_count)
      throw Error("csv row " + std::to_string(row) + ": label " + std::to_string(label) +
                  " >= class count " + std::to_string(options.class_count));
    if (!d.samples.empty() && cells.size() != d.dim())
      throw Error("csv row " + std::to_string(row) + ": inconsistent column count");
    max_label = std::max(max_label, label);
    d.samples.push_back(std::move(cells));
    d.labels.push_back(label);
  }
  if (d.samples.empty()) throw Error("no rows");
  d.class_count = options.class_count != 0 ? options.class_count : max_label + 1;
  return d;
}

LabeledDataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  try {
    return parse_csv(in, options);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_csv(std::ostream& out, const LabeledDataset& d, bool header) {
  if (header) {
    for (std::size_t i = 0; i < d.dim(); ++i) out << 'x' << i << ',';
    out << "label\n";
  }
  char buf[40];
  for (std::size_t n = 0; n < d.size(); ++n) {
    for (double v : d.samples[n]) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << buf << ',';
    }
    out << d.labels[n] << '\n';
  }
}

}  // namespace et
