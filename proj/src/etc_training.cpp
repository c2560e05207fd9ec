#include "et/etc_training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "et/checkpoint.hpp"
#include "et/error.hpp"

namespace et {

std::string_view to_string(CritiqueMode m) {
  return m == CritiqueMode::hidden_and_score ? "hidden_and_score" : "score_only";
}

CritiqueMode parse_critique_mode(std::string_view name) {
  if (name == "hidden_and_score") return CritiqueMode::hidden_and_score;
  if (name == "score_only") return CritiqueMode::score_only;
  throw Error("unknown critique mode '" + std::string(name) + "'");
}

std::size_t EtcModels::response_dim() const {
  if (critique_mode == CritiqueMode::score_only || discriminator.layer_count() < 2) return 1;
  return discriminator.layers()[discriminator.layer_count() - 2].spec.output_dim + 1;
}

void EtcModels::validate() const {
  for (const Network* n : {&e_source, &e_target, &discriminator, &d_source, &d_target})
    if (n->empty()) throw Error("etc models: missing network");
  if (e_source.input_dim() != e_target.input_dim() || e_source.output_dim() != e_target.output_dim())
    throw Error("etc models: source and target encoders differ in shape");
  const std::size_t embedding = e_source.output_dim();
  if (discriminator.input_dim() != embedding || discriminator.output_dim() != 1 ||
      discriminator.layers().back().spec.activation != Activation::sigmoid)
    throw Error("etc models: discriminator must map the embedding to one sigmoid score");
  if (d_source.input_dim() != embedding || d_target.input_dim() != embedding)
    throw Error("etc models: dense heads must read the embedding");
  if (d_source.output_dim() != d_target.output_dim())
    throw Error("etc models: dense heads differ in class count");
}

namespace {

std::vector<std::size_t> chain(std::size_t in, const std::vector<std::size_t>& hidden,
                               std::size_t out) {
  std::vector<std::size_t> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}

void require_same_dim(const ActivationSet& a, const ActivationSet& b) {
  if (a.dim() != b.dim())
    throw Error("activation dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                std::to_string(b.dim()) + ")");
}

}  // namespace

Network make_encoder(std::size_t input_dim, const EtcArchitecture& arch, Rng& rng) {
  return Network::mlp(chain(input_dim, arch.encoder_hidden, arch.embedding_dim), Activation::relu,
                      Activation::linear, rng);
}

Network make_discriminator(const EtcArchitecture& arch, Rng& rng) {
  return Network::mlp(chain(arch.embedding_dim, arch.discriminator_hidden, 1), arch.discriminator_activation,
                      Activation::sigmoid, rng);
}

Network make_dense_head(std::size_t class_count, const EtcArchitecture& arch, Rng& rng) {
  return Network::mlp(chain(arch.embedding_dim, arch.dense_hidden, class_count), Activation::relu,
                      Activation::softmax, rng);
}

SourceBranch train_source_branch(const ActivationSet& x_s, std::size_t class_count,
                                 const EtcArchitecture& arch, const TrainConfig& config) {
  if (!x_s.labels) throw Error("train_source_branch: source activations carry no labels");
  if (x_s.domain != Domain::source) throw Error("train_source_branch: activations are not from the source domain");
  if (x_s.size() == 0) throw Error("train_source_branch: empty source set");
  Rng rng(mix_seed(config.seed, "source-branch-init"));
  auto encoder = make_encoder(x_s.dim(), arch, rng);
  auto dense = make_dense_head(class_count, arch, rng);
  const std::size_t split = encoder.layer_count();
  auto joint = train_supervised(Network::concat(encoder, dense), x_s.activations, *x_s.labels, config);
  return {joint.prefix(split), joint.suffix(split)};
}

double discriminator_accuracy(const Network& discriminator, const Network& e_source,
                              const Network& e_target, const ActivationSet& x_s,
                              const ActivationSet& x_t) {
  const std::size_t total = x_s.size() + x_t.size();
  if (total == 0) return 0.0;
  const auto real = forward_batch(discriminator, forward_batch(e_source, x_s.activations));
  const auto fake = forward_batch(discriminator, forward_batch(e_target, x_t.activations));
  std::size_t hits = 0;
  for (const auto& p : real) hits += p[0] >= 0.5;
  for (const auto& p : fake) hits += p[0] < 0.5;
  return static_cast<double>(hits) / static_cast<double>(total);
}

Vector embedding_centroid(const Network& encoder, const ActivationSet& x) {
  return empirical_mean(forward_batch(encoder, x.activations));
}

AdversarialResult train_adversarial(const Network& e_source, const ActivationSet& x_s,
                                    const ActivationSet& x_t, const EtcArchitecture& arch,
                                    const AdversarialConfig& config,
                                    const AdversarialMonitor& monitor) {
  require_same_dim(x_s, x_t);
  if (x_s.dim() != e_source.input_dim())
    throw Error("train_adversarial: activation dimension does not match the source encoder");
  if (x_s.size() == 0 || x_t.size() == 0) throw Error("train_adversarial: empty domain");
  if (config.generator.batch_size == 0) throw Error("train_adversarial: batch size must be positive");

  Rng rng(config.seed);
  auto init_rng = rng.substream("discriminator-init");
  auto order_rng = rng.substream("order");
  AdversarialResult result{e_source, make_discriminator(arch, init_rng), {}};
  Network& e_target = result.e_target;
  Network& disc = result.discriminator;
  if (disc.input_dim() != e_source.output_dim())
    throw Error("train_adversarial: discriminator input does not match embedding dimension");

  const bool monitored = monitor.source && monitor.target;
  auto record = [&] {
    if (monitored)
      result.monitor_accuracy.push_back(
          discriminator_accuracy(disc, e_source, e_target, *monitor.source, *monitor.target));
  };
  record();

  auto disc_state = OptimizerState::for_network(disc);
  auto gen_state = OptimizerState::for_network(e_target);
  const std::size_t batch = std::min(config.generator.batch_size, x_t.size());
  std::vector<Vector> d_inputs;
  std::vector<std::size_t> d_targets;

  auto discriminator_step = [&](std::span<const std::size_t> src, std::span<const std::size_t> tgt) {
    d_inputs.clear();
    d_targets.clear();
    for (std::size_t i : src) {
      d_inputs.push_back(forward(e_source, x_s.activations[i]));
      d_targets.push_back(1);
    }
    for (std::size_t i : tgt) {
      d_inputs.push_back(forward(e_target, x_t.activations[i]));
      d_targets.push_back(0);
    }
    const auto lg = loss_and_gradients(disc, d_inputs, d_targets, Loss::binary_cross_entropy);
    optimizer_step(disc, lg.gradients, config.discriminator, disc_state);
  };

  // Non-saturating generator loss: -log C(E_t(x)), gradients flow through
  // the frozen discriminator into E_t only.
  auto generator_step = [&](std::span<const std::size_t> tgt) {
    auto grads = Gradients::zeros_like(e_target);
    for (std::size_t i : tgt) {
      const auto enc = forward_trace(e_target, x_t.activations[i]);
      const auto crit = forward_trace(disc, enc.output());
      Vector delta{crit.output()[0] - 1.0};
      const auto grad_embedding = backward_from_preactivation(disc, crit, std::move(delta), nullptr);
      backward(e_target, enc, grad_embedding, &grads);
    }
    grads.scale(1.0 / static_cast<double>(tgt.size()));
    optimizer_step(e_target, grads, config.generator, gen_state);
  };

  const std::size_t total_epochs = config.warmup_epochs + config.generator.epochs;
  for (std::size_t epoch = 0; epoch < total_epochs; ++epoch) {
    const bool warmup = epoch < config.warmup_epochs;
    const auto tgt_order = order_rng.permutation(x_t.size());
    const auto src_order = order_rng.permutation(x_s.size());
    std::vector<std::size_t> src_batch;
    std::size_t src_cursor = 0;
    for (std::size_t start = 0; start < tgt_order.size(); start += batch) {
      const std::size_t end = std::min(tgt_order.size(), start + batch);
      const std::span<const std::size_t> tgt_batch(tgt_order.data() + start, end - start);
      src_batch.clear();
      for (std::size_t k = 0; k < tgt_batch.size(); ++k) {
        src_batch.push_back(src_order[src_cursor]);
        src_cursor = (src_cursor + 1) % src_order.size();
      }
      discriminator_step(src_batch, tgt_batch);
      if (!warmup) generator_step(tgt_batch);
    }
    record();
  }
  return result;
}

PseudoLabels generate_pseudo_labels(const Network& e_target, const Network& d_source,
                                    const ActivationSet& x_t) {
  if (x_t.dim() != e_target.input_dim() && x_t.size() > 0)
    throw Error("generate_pseudo_labels: activation dimension mismatch");
  PseudoLabels pseudo;
  pseudo.origin = PseudoLabels::Origin::self_generated;
  pseudo.labels = predict(d_source, forward_batch(e_target, x_t.activations));
  return pseudo;
}

PseudoLabels parse_pseudo_labels(std::istream& in, std::size_t expected_count,
                                 std::size_t class_count) {
  PseudoLabels pseudo;
  pseudo.origin = PseudoLabels::Origin::file;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t");
    const std::string token = line.substr(first, last - first + 1);
    std::size_t consumed = 0;
    unsigned long long value = 0;
    try {
      if (token[0] == '-') throw std::invalid_argument("negative");
      value = std::stoull(token, &consumed);
    } catch (const std::exception&) {
      consumed = 0;
    }
    if (consumed != token.size())
      throw Error("pseudo-labels row " + std::to_string(row) + ": not a class index '" + token + "'");
    if (value >= class_count)
      throw Error("pseudo-labels row " + std::to_string(row) + ": label " + std::to_string(value) +
                  " out of range (class count " + std::to_string(class_count) + ")");
    pseudo.labels.push_back(static_cast<std::size_t>(value));
  }
  if (pseudo.labels.size() != expected_count)
    throw Error("pseudo-labels: expected " + std::to_string(expected_count) + " labels, found " +
                std::to_string(pseudo.labels.size()));
  return pseudo;
}

PseudoLabels load_pseudo_labels(const std::filesystem::path& path, std::size_t expected_count,
                                std::size_t class_count) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return parse_pseudo_labels(in, expected_count, class_count);
}

Network train_target_dense(const Network& e_target, const ActivationSet& x_t,
                           const PseudoLabels& pseudo, std::size_t class_count,
                           const EtcArchitecture& arch, const TrainConfig& config) {
  if (pseudo.labels.size() != x_t.size())
    throw Error("train_target_dense: pseudo-labels misaligned with target samples (" +
                std::to_string(pseudo.labels.size()) + " vs " + std::to_string(x_t.size()) + ")");
  Rng rng(mix_seed(config.seed, "target-dense-init"));
  auto head = make_dense_head(class_count, arch, rng);
  if (x_t.size() == 0 || config.epochs == 0) return head;
  const auto embeddings = forward_batch(e_target, x_t.activations);
  return train_supervised(std::move(head), embeddings, pseudo.labels, config);
}

TrainedCell train_etc(const ActivationSet& x_s, const ActivationSet& x_t, std::size_t class_count,
                      const EtcTrainConfig& config, const std::optional<PseudoLabels>& external_labels,
                      const AdversarialMonitor& monitor) {
  require_same_dim(x_s, x_t);
  auto source = train_source_branch(x_s, class_count, config.arch, config.source_branch);
  auto adversarial = train_adversarial(source.encoder, x_s, x_t, config.arch, config.adversarial, monitor);
  auto pseudo = external_labels ? *external_labels
                                : generate_pseudo_labels(adversarial.e_target, source.dense, x_t);
  auto d_target = train_target_dense(adversarial.e_target, x_t, pseudo, class_count, config.arch,
                                     config.target_dense);
  TrainedCell cell;
  cell.models = {std::move(source.encoder), std::move(adversarial.e_target),
                 std::move(adversarial.discriminator), std::move(source.dense),
                 std::move(d_target), x_s.layer_index, config.arch.critique_mode};
  cell.models.validate();
  cell.pseudo = std::move(pseudo);
  cell.adversarial_history = std::move(adversarial.monitor_accuracy);
  return cell;
}

void write_etc_models(std::ostream& out, const EtcModels& models) {
  out << "etc " << kCheckpointVersion << '\n';
  out << "layer_index " << models.layer_index << '\n';
  out << "critique_mode " << to_string(models.critique_mode) << '\n';
  for (const Network* n : {&models.e_source, &models.e_target, &models.discriminator,
                           &models.d_source, &models.d_target})
    write_network(out, *n);
}

EtcModels read_etc_models(std::istream& in) {
  TokenReader reader(in);
  reader.expect("etc");
  if (reader.next_u64() != kCheckpointVersion) throw Error("checkpoint: unsupported etc version");
  EtcModels m;
  reader.expect("layer_index");
  m.layer_index = reader.next_size();
  reader.expect("critique_mode");
  m.critique_mode = parse_critique_mode(reader.next());
  for (Network* n : {&m.e_source, &m.e_target, &m.discriminator, &m.d_source, &m.d_target})
    *n = read_network(reader);
  m.validate();
  return m;
}

void save_etc_models(const std::filesystem::path& path, const EtcModels& models) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_etc_models(out, models);
}

EtcModels load_etc_models(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return read_etc_models(in);
}

}  // namespace et
