#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "et/features.hpp"
#include "et/nn.hpp"

namespace et {

/// What the discriminator contributes to a critique: its last hidden layer
/// activations followed by the sigmoid score, or the score alone.
enum class CritiqueMode { hidden_and_score, score_only };

std::string_view to_string(CritiqueMode m);
CritiqueMode parse_critique_mode(std::string_view name);

struct EtcArchitecture {
  std::vector<std::size_t> encoder_hidden{32, 32};
  std::size_t embedding_dim = 16;
  std::vector<std::size_t> discriminator_hidden{64, 16};
  Activation discriminator_activation = Activation::tanh;
  std::vector<std::size_t> dense_hidden{32};
  CritiqueMode critique_mode = CritiqueMode::hidden_and_score;
};

/// The five trained networks of one transfer cell at one injection layer.
struct EtcModels {
  Network e_source;
  Network e_target;
  Network discriminator;
  Network d_source;
  Network d_target;
  std::size_t layer_index = 0;
  CritiqueMode critique_mode = CritiqueMode::hidden_and_score;

  /// Length of one discriminator response; a critique is twice this.
  std::size_t response_dim() const;
  std::size_t class_count() const { return d_source.output_dim(); }
  /// Checks the shape contract between the five networks.
  void validate() const;

  bool operator==(const EtcModels&) const = default;
};

Network make_encoder(std::size_t input_dim, const EtcArchitecture& arch, Rng& rng);
Network make_discriminator(const EtcArchitecture& arch, Rng& rng);
Network make_dense_head(std::size_t class_count, const EtcArchitecture& arch, Rng& rng);

struct SourceBranch {
  Network encoder;
  Network dense;
};

/// Trains E_s followed by D_s jointly on cross-entropy and splits the result.
SourceBranch train_source_branch(const ActivationSet& x_s, std::size_t class_count,
                                 const EtcArchitecture& arch, const TrainConfig& config);

struct AdversarialConfig {
  /// Optimizer settings for C; its epochs and batch_size are not used.
  TrainConfig discriminator{1e-3, 0, 64, 0, OptimizerKind::adam, 0.5, 0.999, 1e-8};
  /// generator.epochs is the number of alternating rounds over the target set.
  TrainConfig generator{1e-4, 30, 64, 0, OptimizerKind::adam, 0.5, 0.999, 1e-8};
  /// Discriminator-only epochs before the alternating phase.
  std::size_t warmup_epochs = 2;
  std::uint64_t seed = 0;
};

/// Held-out pairs on which discriminator accuracy is tracked per epoch.
struct AdversarialMonitor {
  const ActivationSet* source = nullptr;
  const ActivationSet* target = nullptr;
};

struct AdversarialResult {
  Network e_target;
  Network discriminator;
  /// Held-out discriminator accuracy before training and after every epoch
  /// (warm-up epochs first). Empty without a monitor.
  std::vector<double> monitor_accuracy;
};

/// Alternating GAN updates: one discriminator step (source embeddings real,
/// target embeddings fake, binary cross-entropy) then one generator step on
/// E_t with the non-saturating loss. E_t starts as a copy of E_s; E_s is not
/// modified.
AdversarialResult train_adversarial(const Network& e_source, const ActivationSet& x_s,
                                    const ActivationSet& x_t, const EtcArchitecture& arch,
                                    const AdversarialConfig& config,
                                    const AdversarialMonitor& monitor = {});

/// Fraction of held-out samples the discriminator classifies correctly
/// (E_s(x_s) as real, E_t(x_t) as fake, threshold 0.5).
double discriminator_accuracy(const Network& discriminator, const Network& e_source,
                              const Network& e_target, const ActivationSet& x_s,
                              const ActivationSet& x_t);

Vector embedding_centroid(const Network& encoder, const ActivationSet& x);

struct PseudoLabels {
  enum class Origin { file, self_generated };

  std::vector<std::size_t> labels;
  Origin origin = Origin::self_generated;
};

/// argmax D_s(E_t(x)) for every target sample.
PseudoLabels generate_pseudo_labels(const Network& e_target, const Network& d_source,
                                    const ActivationSet& x_t);

/// One integer class index per line; the line count must equal expected_count.
PseudoLabels load_pseudo_labels(const std::filesystem::path& path, std::size_t expected_count,
                                std::size_t class_count);
PseudoLabels parse_pseudo_labels(std::istream& in, std::size_t expected_count,
                                 std::size_t class_count);

/// D_t trained on (E_t(x), pseudo label) pairs. E_t is not modified.
Network train_target_dense(const Network& e_target, const ActivationSet& x_t,
                           const PseudoLabels& pseudo, std::size_t class_count,
                           const EtcArchitecture& arch, const TrainConfig& config);

struct EtcTrainConfig {
  EtcArchitecture arch;
  TrainConfig source_branch{1e-3, 30, 32, 0, OptimizerKind::adam, 0.9, 0.999, 1e-8};
  AdversarialConfig adversarial;
  TrainConfig target_dense{1e-3, 30, 32, 0, OptimizerKind::adam, 0.9, 0.999, 1e-8};
};

struct TrainedCell {
  EtcModels models;
  PseudoLabels pseudo;
  std::vector<double> adversarial_history;
};

/// Full cell training at the layer carried by x_s. Uses `external_labels`
/// for the target head when given, otherwise self-generated pseudo-labels.
TrainedCell train_etc(const ActivationSet& x_s, const ActivationSet& x_t, std::size_t class_count,
                      const EtcTrainConfig& config,
                      const std::optional<PseudoLabels>& external_labels = std::nullopt,
                      const AdversarialMonitor& monitor = {});

void write_etc_models(std::ostream& out, const EtcModels& models);
EtcModels read_etc_models(std::istream& in);
void save_etc_models(const std::filesystem::path& path, const EtcModels& models);
EtcModels load_etc_models(const std::filesystem::path& path);

}  // namespace et
