#include "et/experiment.hpp"

#include <algorithm>
#include <optional>

#include "et/digits.hpp"
#include "et/error.hpp"
#include "et/kernels.hpp"

namespace et {

std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::only_source_head: return "only_source_head";
    case Ablation::only_target_head: return "only_target_head";
    case Ablation::full: return "full";
  }
  return "full";
}

Ablation parse_ablation(std::string_view name) {
  for (auto a : kAllAblations)
    if (to_string(a) == name) return a;
  throw Error("unknown ablation '" + std::string(name) + "'");
}

std::string_view to_string(DataKind k) {
  switch (k) {
    case DataKind::blobs: return "blobs";
    case DataKind::digits: return "digits";
    case DataKind::files: return "files";
  }
  return "blobs";
}

DataKind parse_data_kind(std::string_view name) {
  for (auto k : {DataKind::blobs, DataKind::digits, DataKind::files})
    if (to_string(k) == name) return k;
  throw Error("unknown data kind '" + std::string(name) + "'");
}

namespace {

std::size_t ablation_index(Ablation a) {
  return static_cast<std::size_t>(std::find(kAllAblations.begin(), kAllAblations.end(), a) -
                                  kAllAblations.begin());
}

LabeledDataset load_domain(const DataSpec& spec, const std::string& path, const std::string& labels) {
  if (path.empty()) throw Error("data.source and data.target are required for file data");
  if (spec.format == "csv") return load_csv(path, {spec.csv_header, 0});
  if (spec.format == "idx") {
    if (labels.empty()) throw Error("idx data needs data.source_labels and data.target_labels");
    return load_idx(path, labels);
  }
  throw Error("unknown data.format '" + spec.format + "'");
}

template <class Fn>
auto stage(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace

PreparedData prepare_data(const DataSpec& spec, std::uint64_t seed) {
  LabeledDataset source;
  LabeledDataset target;
  std::string description;
  switch (spec.kind) {
    case DataKind::blobs: {
      source = gen_blobs(spec.classes, spec.per_class, spec.dim, spec.separation,
                         mix_seed(seed, "blobs-source"));
      ShiftSpec shift = spec.shift;
      if (shift.translation.size() < spec.dim) shift.translation.resize(spec.dim, 0.0);
      target = shift_domain(gen_blobs(spec.classes, spec.per_class, spec.dim, spec.separation,
                                      mix_seed(seed, "blobs-target")),
                            shift, mix_seed(seed, "shift"));
      description = "blobs: rotation " + std::to_string(shift.rotation_deg) + " deg, noise " +
                    std::to_string(shift.noise_sigma);
      break;
    }
    case DataKind::digits: {
      source = gen_digits(spec.digit_per_class, spec.digit_side, mix_seed(seed, "digits-source"));
      target = rotate_images(gen_digits(spec.digit_per_class, spec.digit_side,
                                        mix_seed(seed, "digits-target")),
                             spec.digit_side, spec.digit_rotation, spec.digit_noise,
                             mix_seed(seed, "rotate"));
      description = "digits: rotation " + std::to_string(spec.digit_rotation) + " deg, noise " +
                    std::to_string(spec.digit_noise);
      break;
    }
    case DataKind::files: {
      source = load_domain(spec, spec.source_path, spec.source_labels_path);
      target = load_domain(spec, spec.target_path, spec.target_labels_path);
      description = "files: " + spec.source_path + " -> " + spec.target_path;
      break;
    }
  }
  if (source.dim() != target.dim()) throw Error("source and target samples differ in dimension");
  PreparedData data;
  data.class_count = std::max(source.class_count, target.class_count);
  source.class_count = target.class_count = data.class_count;
  data.source = split_dataset(source, spec.splits, mix_seed(seed, "split-source"));
  data.target = split_dataset(target, spec.splits, mix_seed(seed, "split-target"));
  data.description = std::move(description);
  return data;
}

SeedContext prepare_seed(const ExperimentConfig& config, std::uint64_t seed) {
  SeedContext ctx;
  ctx.seed = seed;
  ctx.data = stage("data", [&] { return prepare_data(config.data, seed); });
  ctx.backbone = stage("backbone", [&] {
    BackboneConfig bc = config.backbone;
    bc.train.seed = mix_seed(seed, "backbone");
    return train_backbone(ctx.data.source.train, ctx.data.source.validation, bc);
  });
  stage("mixed-sets", [&] {
    ctx.validation = make_mixed_test(ctx.data.source.validation, ctx.data.target.validation,
                                     config.validation_size, config.rho,
                                     mix_seed(seed, "mixed-validation"));
    ctx.test = make_mixed_test(ctx.data.source.test, ctx.data.target.test, config.test_size,
                               config.rho, mix_seed(seed, "mixed-test"));
    return 0;
  });
  return ctx;
}

Evaluation evaluate_ablation(const EtcModels& models, const ProbeParams& probe,
                             std::span<const Vector> activations,
                             std::span<const std::size_t> labels, std::span<const Domain> origins,
                             std::size_t class_count, Ablation mode) {
  const std::size_t n = activations.size();
  if (labels.size() != n || origins.size() != n) throw Error("evaluate: length mismatch");
  Evaluation ev;
  ev.predictions.resize(n);
  ev.routes.resize(n);
  ev.branches.resize(n);
  for (const auto& x : activations)
    if (x.size() != models.e_source.input_dim()) throw Error("evaluate: activation dimension mismatch");
  kernels::parallel::for_each_index(n, [&](std::size_t i) {
    ev.routes[i] = route(probe, critique(models, activations[i]));
    Domain branch = ev.routes[i].branch;
    if (mode == Ablation::only_source_head) branch = Domain::source;
    if (mode == Ablation::only_target_head) branch = Domain::target;
    ev.branches[i] = branch;
    const bool src = branch == Domain::source;
    ev.predictions[i] = argmax(forward(src ? models.d_source : models.d_target,
                                       forward(src ? models.e_source : models.e_target, activations[i])));
  });
  std::vector<Membership> memberships(n);
  for (std::size_t i = 0; i < n; ++i) memberships[i] = ev.routes[i].membership;
  ev.metrics = compute_metrics(ev.predictions, labels, class_count, ev.branches, origins, memberships);
  return ev;
}

CellResult run_cell(const ExperimentConfig& config, const SeedContext& ctx, std::size_t layer) {
  const std::string tag = "seed " + std::to_string(ctx.seed) + ", layer " + std::to_string(layer);
  const auto& backbone = ctx.backbone;
  CellResult result;
  result.layer = layer;

  ActivationSet x_s, x_t, v_s, v_t;
  stage("features (" + tag + ")", [&] {
    x_s = extract_activations(backbone, ctx.data.source.train, layer, Domain::source);
    x_t = extract_activations(backbone, ctx.data.target.train, layer, Domain::target);
    v_s = extract_activations(backbone, ctx.data.source.validation, layer, Domain::source);
    v_t = extract_activations(backbone, ctx.data.target.validation, layer, Domain::target);
    return 0;
  });

  result.cell = stage("etc-training (" + tag + ")", [&] {
    EtcTrainConfig ec = config.etc;
    const std::string key = "etc/" + std::to_string(layer);
    ec.source_branch.seed = mix_seed(ctx.seed, key + "/source");
    ec.adversarial.seed = mix_seed(ctx.seed, key + "/adversarial");
    ec.target_dense.seed = mix_seed(ctx.seed, key + "/target");
    std::optional<PseudoLabels> external;
    if (!config.pseudo_label_file.empty())
      external = load_pseudo_labels(config.pseudo_label_file, x_t.size(), ctx.data.class_count);
    return train_etc(x_s, x_t, ctx.data.class_count, ec, external, {&v_s, &v_t});
  });

  result.probe = stage("probe (" + tag + ")", [&] {
    return fit_probe(result.cell.models, x_s, x_t, config.probe);
  });

  std::size_t agree = 0;
  for (std::size_t i = 0; i < x_t.size(); ++i) agree += result.cell.pseudo.labels[i] == (*x_t.labels)[i];
  result.pseudo_label_accuracy = x_t.size() ? static_cast<double>(agree) / static_cast<double>(x_t.size()) : 0.0;

  stage("evaluation (" + tag + ")", [&] {
    const auto val_acts = extract_activations(backbone, ctx.validation.data.samples, layer);
    result.test_activations = extract_activations(backbone, ctx.test.data.samples, layer);
    for (auto mode : kAllAblations) {
      result.validation.push_back(evaluate_ablation(result.cell.models, result.probe, val_acts,
                                                    ctx.validation.data.labels, ctx.validation.origin,
                                                    ctx.data.class_count, mode));
      result.test.push_back(evaluate_ablation(result.cell.models, result.probe,
                                              result.test_activations, ctx.test.data.labels,
                                              ctx.test.origin, ctx.data.class_count, mode));
    }
    return 0;
  });
  return result;
}

namespace {

template <class Fn>
void run_indexed(std::size_t n, bool parallel, Fn&& fn) {
  if (parallel) {
    kernels::parallel::for_each_index(n, fn);
  } else {
    for (std::size_t i = 0; i < n; ++i) fn(i);
  }
}

ExperimentReport run_experiment(const ExperimentConfig& config, const std::vector<std::size_t>& layers,
                                std::span<const Ablation> modes) {
  if (config.seeds.empty()) throw StageError("config", "at least one seed is required");
  ExperimentReport report;
  report.contamination = config.rho;

  std::vector<SeedContext> contexts(config.seeds.size());
  run_indexed(contexts.size(), config.parallel_cells,
              [&](std::size_t s) { contexts[s] = prepare_seed(config, config.seeds[s]); });

  struct CellKey {
    std::size_t seed_index;
    std::size_t layer;
  };
  std::vector<CellKey> keys;
  for (std::size_t s = 0; s < contexts.size(); ++s) {
    const std::size_t n = contexts[s].backbone.n_layers;
    std::vector<std::size_t> run_layers = layers;
    if (run_layers.empty())
      for (std::size_t i = 1; i <= n; ++i) run_layers.push_back(i);
    for (std::size_t layer : run_layers) {
      if (layer < 1 || layer > n)
        throw StageError("config", "layer " + std::to_string(layer) + " outside [1, " +
                                       std::to_string(n) + "]");
      keys.push_back({s, layer});
    }
  }

  std::vector<CellResult> cells(keys.size());
  run_indexed(keys.size(), config.parallel_cells, [&](std::size_t k) {
    cells[k] = run_cell(config, contexts[keys[k].seed_index], keys[k].layer);
  });

  const std::size_t full = ablation_index(Ablation::full);
  for (std::size_t s = 0; s < contexts.size(); ++s) {
    const auto& ctx = contexts[s];
    report.class_count = ctx.data.class_count;
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < keys.size(); ++k) {
      if (keys[k].seed_index != s) continue;
      const double f1 = cells[k].validation[full].metrics.macro_f1;
      if (!best || f1 > cells[*best].validation[full].metrics.macro_f1 ||
          (f1 == cells[*best].validation[full].metrics.macro_f1 && keys[k].layer < keys[*best].layer))
        best = k;
    }

    SeedRecord record;
    record.seed = ctx.seed;
    record.best_layer = keys[*best].layer;
    record.backbone_validation_accuracy = ctx.backbone.validation_accuracy;
    record.test_labels = ctx.test.data.labels;
    record.test_origins = ctx.test.origin;
    const auto& winner = cells[*best];
    // lambda_t stays fixed: with equal lambdas the route reduces to the
    // smaller z and does not depend on lambda at all.
    for (double lambda : config.lambda_grid) {
      const auto ev = evaluate_ablation(winner.cell.models,
                                        with_lambdas(winner.probe, lambda, winner.probe.lambda_t),
                                        winner.test_activations, ctx.test.data.labels, ctx.test.origin,
                                        ctx.data.class_count, Ablation::full);
      record.lambda_sweep.push_back({lambda, ev.metrics.macro_f1, ev.metrics.routing_accuracy});
    }
    report.seeds.push_back(std::move(record));

    for (std::size_t k = 0; k < keys.size(); ++k) {
      if (keys[k].seed_index != s) continue;
      const auto& cell = cells[k];
      report.cells.push_back({ctx.seed, cell.layer, cell.pseudo_label_accuracy,
                              cell.cell.adversarial_history});
      for (Ablation mode : modes) {
        const auto idx = ablation_index(mode);
        RunRecord run;
        run.seed = ctx.seed;
        run.layer = cell.layer;
        run.ablation = mode;
        run.selected = k == *best;
        run.validation_macro_f1 = cell.validation[idx].metrics.macro_f1;
        run.test = cell.test[idx].metrics;
        run.predictions = cell.test[idx].predictions;
        run.branches = cell.test[idx].branches;
        report.runs.push_back(std::move(run));
      }
    }
  }
  return report;
}

}  // namespace

ExperimentReport run_sweep(const ExperimentConfig& config) {
  return run_experiment(config, config.layers, kAllAblations);
}

ExperimentReport run_ablation(const ExperimentConfig& config, std::size_t layer,
                              std::span<const Ablation> modes) {
  return run_experiment(config, {layer}, modes);
}

}  // namespace et
