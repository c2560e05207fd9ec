#include "et/features.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include "et/checkpoint.hpp"
#include "et/error.hpp"
#include "et/kernels.hpp"

namespace et {

Backbone train_backbone(const LabeledDataset& train, const LabeledDataset& validation,
                        const BackboneConfig& config) {
  if (train.empty()) throw Error("train_backbone: empty training set");
  train.validate();
  if (config.hidden.empty()) throw Error("train_backbone: need at least one hidden layer");

  std::vector<std::size_t> dims{train.dim()};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(train.class_count);
  Rng init(mix_seed(config.train.seed, "backbone-init"));
  auto net = Network::mlp(dims, config.activation, Activation::softmax, init);
  net = train_supervised(std::move(net), train.samples, train.labels, config.train);

  Backbone backbone{std::move(net), config.hidden.size(), 0.0};
  if (!validation.empty()) {
    validation.validate();
    backbone.validation_accuracy = accuracy(backbone.net, validation.samples, validation.labels);
  }
  return backbone;
}

namespace {

Network truncated(const Backbone& backbone, std::size_t layer_index) {
  if (layer_index < 1 || layer_index > backbone.n_layers)
    throw Error("extract_activations: layer index " + std::to_string(layer_index) +
                " out of range [1, " + std::to_string(backbone.n_layers) + "]");
  return backbone.net.prefix(layer_index);
}

}  // namespace

std::vector<Vector> extract_activations(const Backbone& backbone, std::span<const Vector> samples,
                                        std::size_t layer_index) {
  return forward_batch(truncated(backbone, layer_index), samples);
}

namespace serial {

std::vector<Vector> extract_activations(const Backbone& backbone, std::span<const Vector> samples,
                                        std::size_t layer_index) {
  const auto head = truncated(backbone, layer_index);
  std::vector<Vector> out;
  out.reserve(samples.size());
  for (const auto& x : samples) out.push_back(forward(head, x));
  return out;
}

}  // namespace serial

ActivationSet extract_activations(const Backbone& backbone, const LabeledDataset& dataset,
                                  std::size_t layer_index, Domain domain, bool keep_labels) {
  ActivationSet set;
  set.activations = extract_activations(backbone, dataset.samples, layer_index);
  if (keep_labels) {
    if (dataset.labels.size() != dataset.samples.size())
      throw Error("extract_activations: labels misaligned");
    set.labels = dataset.labels;
  }
  set.domain = domain;
  set.layer_index = layer_index;
  return set;
}

void write_activations_csv(std::ostream& out, const ActivationSet& set) {
  for (std::size_t i = 0; i < set.dim(); ++i) out << "a" << i << ',';
  out << "label\n";
  char buf[40];
  for (std::size_t n = 0; n < set.size(); ++n) {
    for (double v : set.activations[n]) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << buf << ',';
    }
    if (set.labels) out << (*set.labels)[n];
    out << '\n';
  }
}

void write_backbone(std::ostream& out, const Backbone& backbone) {
  out << "backbone " << kCheckpointVersion << '\n';
  out << "injectable " << backbone.n_layers << '\n';
  out << "validation_accuracy " << format_exact(backbone.validation_accuracy) << '\n';
  write_network(out, backbone.net);
}

Backbone read_backbone(std::istream& in) {
  TokenReader reader(in);
  reader.expect("backbone");
  if (reader.next_u64() != kCheckpointVersion) throw Error("checkpoint: unsupported backbone version");
  Backbone b;
  reader.expect("injectable");
  b.n_layers = reader.next_size();
  reader.expect("validation_accuracy");
  b.validation_accuracy = reader.next_real();
  b.net = read_network(reader);
  if (b.n_layers == 0 || b.n_layers >= b.net.layer_count())
    throw Error("checkpoint: backbone layer count inconsistent with network");
  return b;
}

void save_backbone(const std::filesystem::path& path, const Backbone& backbone) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_backbone(out, backbone);
}

Backbone load_backbone(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return read_backbone(in);
}

}  // namespace et
