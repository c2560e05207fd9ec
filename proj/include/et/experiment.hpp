#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "et/data.hpp"
#include "et/etc_training.hpp"
#include "et/features.hpp"
#include "et/metrics.hpp"
#include "et/probe.hpp"

namespace et {

enum class Ablation { only_source_head, only_target_head, full };

std::string_view to_string(Ablation a);
Ablation parse_ablation(std::string_view name);
inline constexpr std::array<Ablation, 3> kAllAblations{Ablation::only_source_head,
                                                       Ablation::only_target_head, Ablation::full};

enum class DataKind { blobs, digits, files };

std::string_view to_string(DataKind k);
DataKind parse_data_kind(std::string_view name);

struct DataSpec {
  DataKind kind = DataKind::blobs;

  // blobs
  std::size_t classes = 4;
  std::size_t per_class = 850;
  std::size_t dim = 8;
  double separation = 4.0;
  /// A translation shorter than dim is zero-padded. The default moves
  /// the classes within their plane (axis 0) and off it (axis 2).
  ShiftSpec shift{0.0, {5.0, 0.0, 5.0}, 0.0};

  // digits
  std::size_t digit_side = 8;
  std::size_t digit_per_class = 300;
  double digit_rotation = 30.0;
  double digit_noise = 0.1;

  // files: CSV (label last) or IDX image/label pairs
  std::string format = "csv";
  std::string source_path;
  std::string target_path;
  std::string source_labels_path;  // idx only
  std::string target_labels_path;  // idx only
  bool csv_header = false;

  SplitFractions splits{};
};

struct ExperimentConfig {
  DataSpec data;
  BackboneConfig backbone{{64, 64, 64}, Activation::relu,
                          TrainConfig{1e-3, 30, 32, 0, OptimizerKind::adam, 0.9, 0.999, 1e-8}};
  EtcTrainConfig etc;
  ProbeOptions probe;
  /// lambda_s values for the routing sweep; lambda_t stays at probe.lambda_t.
  std::vector<double> lambda_grid{0.5, 1.0, 1.5, 2.0, 3.0, 4.0};
  double rho = 0.5;
  std::size_t test_size = 1000;
  std::size_t validation_size = 300;
  std::vector<std::uint64_t> seeds{1};
  std::vector<std::size_t> layers;  // empty: every injectable layer
  std::string pseudo_label_file;
  std::string output_dir = "out";
  bool parallel_cells = true;
};

/// Flat "key = value" text with dotted section keys; '#' starts a comment.
std::map<std::string, std::string> parse_key_values(std::istream& in);
ExperimentConfig config_from_key_values(const std::map<std::string, std::string>& values);
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(std::string_view text);
std::map<std::string, std::string> to_key_values(const ExperimentConfig& config);
void write_config(std::ostream& out, const ExperimentConfig& config);

/// Source and target domains for one seed, already split.
struct PreparedData {
  DatasetSplits source;
  DatasetSplits target;
  std::size_t class_count = 0;
  std::string description;
};

PreparedData prepare_data(const DataSpec& spec, std::uint64_t seed);

/// Everything shared by the cells of one seed.
struct SeedContext {
  std::uint64_t seed = 0;
  PreparedData data;
  Backbone backbone;
  MixedTestSet validation;
  MixedTestSet test;
};

SeedContext prepare_seed(const ExperimentConfig& config, std::uint64_t seed);

struct Evaluation {
  Metrics metrics;
  std::vector<std::size_t> predictions;
  std::vector<Route> routes;
  std::vector<Domain> branches;
};

/// Classifies activations under one ablation. Memberships are always taken
/// from the probe; the branch is forced for the head-only modes.
Evaluation evaluate_ablation(const EtcModels& models, const ProbeParams& probe,
                             std::span<const Vector> activations,
                             std::span<const std::size_t> labels, std::span<const Domain> origins,
                             std::size_t class_count, Ablation mode);

struct CellResult {
  std::size_t layer = 0;
  TrainedCell cell;
  ProbeParams probe;
  double pseudo_label_accuracy = 0.0;
  std::vector<Evaluation> validation;  // indexed like kAllAblations
  std::vector<Evaluation> test;
  std::vector<Vector> test_activations;
};

CellResult run_cell(const ExperimentConfig& config, const SeedContext& context, std::size_t layer);

struct RunRecord {
  std::uint64_t seed = 0;
  std::size_t layer = 0;
  Ablation ablation = Ablation::full;
  bool selected = false;
  double validation_macro_f1 = 0.0;
  Metrics test;
  std::vector<std::size_t> predictions;
  std::vector<Domain> branches;

  bool operator==(const RunRecord&) const = default;
};

struct CellRecord {
  std::uint64_t seed = 0;
  std::size_t layer = 0;
  double pseudo_label_accuracy = 0.0;
  std::vector<double> discriminator_history;

  bool operator==(const CellRecord&) const = default;
};

struct LambdaPoint {
  double lambda = 0.0;
  double macro_f1 = 0.0;
  double routing_accuracy = 0.0;

  bool operator==(const LambdaPoint&) const = default;
};

struct SeedRecord {
  std::uint64_t seed = 0;
  std::size_t best_layer = 0;
  double backbone_validation_accuracy = 0.0;
  std::vector<std::size_t> test_labels;
  std::vector<Domain> test_origins;
  std::vector<LambdaPoint> lambda_sweep;

  bool operator==(const SeedRecord&) const = default;
};

struct ExperimentReport {
  std::size_t class_count = 0;
  double contamination = 0.0;
  std::vector<SeedRecord> seeds;
  std::vector<CellRecord> cells;
  std::vector<RunRecord> runs;

  bool operator==(const ExperimentReport&) const = default;
};

/// Trains a cell at every injectable layer (or config.layers), selects the
/// layer with the best full-mode validation macro-F1 (ties: smallest index)
/// and evaluates every ablation on the mixed test set.
ExperimentReport run_sweep(const ExperimentConfig& config);

/// Same pipeline at one fixed layer, restricted to the given modes.
ExperimentReport run_ablation(const ExperimentConfig& config, std::size_t layer,
                              std::span<const Ablation> modes);

/// Report files: report.json, metrics.csv, plots/layer_sweep_<mode>.dat,
/// plots/lambda_sweep.dat.
void emit_report(const ExperimentReport& report, const std::filesystem::path& dir);
std::string report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(std::string_view text);
ExperimentReport load_report(const std::filesystem::path& dir);
void write_metrics_csv(std::ostream& out, const ExperimentReport& report);

}  // namespace et
