#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "et/data.hpp"
#include "et/nn.hpp"

namespace et {

struct BackboneConfig {
  std::vector<std::size_t> hidden{64, 64, 64};
  Activation activation = Activation::relu;
  TrainConfig train{};
};

/// Source classifier whose hidden layers are the injection points.
/// `net` holds n_layers hidden layers followed by a softmax output layer.
struct Backbone {
  Network net;
  std::size_t n_layers = 0;
  double validation_accuracy = 0.0;

  bool operator==(const Backbone&) const = default;
};

Backbone train_backbone(const LabeledDataset& train, const LabeledDataset& validation,
                        const BackboneConfig& config);

/// Activations after one backbone layer for a whole domain.
struct ActivationSet {
  std::vector<Vector> activations;
  std::optional<std::vector<std::size_t>> labels;
  Domain domain = Domain::source;
  std::size_t layer_index = 0;

  std::size_t size() const noexcept { return activations.size(); }
  std::size_t dim() const noexcept { return activations.empty() ? 0 : activations.front().size(); }
};

/// Post-activation values of hidden layer `layer_index` (1-based) for each
/// sample, in dataset order. Labels are carried through when `keep_labels`.
ActivationSet extract_activations(const Backbone& backbone, const LabeledDataset& dataset,
                                  std::size_t layer_index, Domain domain, bool keep_labels = true);

std::vector<Vector> extract_activations(const Backbone& backbone, std::span<const Vector> samples,
                                        std::size_t layer_index);

namespace serial {
/// Single-threaded reference for extract_activations.
std::vector<Vector> extract_activations(const Backbone& backbone, std::span<const Vector> samples,
                                        std::size_t layer_index);
}  // namespace serial

/// One row per sample, label column last (empty when unlabeled).
void write_activations_csv(std::ostream& out, const ActivationSet& set);

void write_backbone(std::ostream& out, const Backbone& backbone);
Backbone read_backbone(std::istream& in);
void save_backbone(const std::filesystem::path& path, const Backbone& backbone);
Backbone load_backbone(const std::filesystem::path& path);

}  // namespace et
