#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "et/linalg.hpp"

namespace et {

enum class Domain { source, target };

std::string_view to_string(Domain d);
Domain parse_domain(std::string_view name);

struct LabeledDataset {
  std::vector<Vector> samples;
  std::vector<std::size_t> labels;
  std::size_t class_count = 0;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  std::size_t dim() const noexcept { return samples.empty() ? 0 : samples.front().size(); }
  /// Throws unless lengths align, dims agree and every label < class_count.
  void validate() const;
  LabeledDataset subset(std::span<const std::size_t> indices) const;

  bool operator==(const LabeledDataset&) const = default;
};

/// Isotropic unit-variance Gaussian clusters. Centroids sit on a line (two
/// classes or one dimension) or on a circle in the first two dimensions, with
/// adjacent centroids `separation` apart.
LabeledDataset gen_blobs(std::size_t class_count, std::size_t per_class, std::size_t dim,
                         double separation, std::uint64_t seed);

std::vector<Vector> blob_centroids(std::size_t class_count, std::size_t dim, double separation);

struct ShiftSpec {
  double rotation_deg = 0.0;  // applied in the plane of the first two dims
  Vector translation;         // empty means no translation
  double noise_sigma = 0.0;

  bool operator==(const ShiftSpec&) const = default;
};

/// Rotate, translate, then add isotropic Gaussian noise. Labels are kept.
LabeledDataset shift_domain(const LabeledDataset& d, const ShiftSpec& shift, std::uint64_t seed);

struct DomainPair {
  LabeledDataset source;
  LabeledDataset target;
  std::string shift_description;
};

struct SplitFractions {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;
};

struct DatasetSplits {
  LabeledDataset train;
  LabeledDataset validation;
  LabeledDataset test;
};

DatasetSplits split_dataset(const LabeledDataset& d, const SplitFractions& fractions,
                            std::uint64_t seed);

struct MixedTestSet {
  LabeledDataset data;
  std::vector<Domain> origin;
  double contamination = 0.0;  // fraction of source-origin samples

  std::size_t size() const noexcept { return data.size(); }
};

/// round(rho * n) samples drawn without replacement from `source_pool`, the
/// rest from `target_pool`, shuffled together with origin tags.
MixedTestSet make_mixed_test(const LabeledDataset& source_pool, const LabeledDataset& target_pool,
                             std::size_t n, double rho, std::uint64_t seed);

/// Standard IDX digit files: big-endian magic 0x00000803 images and
/// 0x00000801 labels. Pixels are scaled to [0, 1].
LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        std::size_t class_count = 0);
/// Writes pixels as round(value * 255) clamped to [0, 255]. Samples must be width*height long.
void write_idx(const LabeledDataset& d, std::size_t width, std::size_t height,
               const std::filesystem::path& images, const std::filesystem::path& labels);

struct CsvOptions {
  bool has_header = false;
  std::size_t class_count = 0;  // 0: infer as max label + 1
};

/// Comma-separated, label column last.
LabeledDataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {});
LabeledDataset parse_csv(std::istream& in, const CsvOptions& options = {});
void write_csv(std::ostream& out, const LabeledDataset& d, bool header = true);

}  // namespace et
