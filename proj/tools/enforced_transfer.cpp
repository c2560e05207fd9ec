// enforced-transfer: train, sweep, ablate and route with transfer cells.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "et/checkpoint.hpp"
#include "et/digits.hpp"
#include "et/error.hpp"
#include "et/experiment.hpp"

namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

et::ExperimentConfig resolve_config(const GlobalOptions& g) {
  et::ExperimentConfig config =
      g.config_path.empty() ? et::ExperimentConfig{} : et::load_config(g.config_path);
  if (g.seed) config.seeds = {*g.seed};
  if (!g.out.empty()) config.output_dir = g.out;
  return config;
}

void write_dataset(const fs::path& path, const et::LabeledDataset& d) {
  std::ofstream out(path);
  if (!out) throw et::Error("cannot open '" + path.string() + "' for writing");
  et::write_csv(out, d);
}

void print_summary(const et::ExperimentReport& report) {
  for (const auto& s : report.seeds) std::cout << "seed " << s.seed << ": best layer " << s.best_layer << '\n';
  for (const auto& r : report.runs) {
    std::printf("seed %llu layer %zu %-17s acc %.4f macro-F1 %.4f routing %.4f%s\n",
                static_cast<unsigned long long>(r.seed), r.layer, std::string(et::to_string(r.ablation)).c_str(),
                r.test.accuracy, r.test.macro_f1, r.test.routing_accuracy, r.selected ? "  *" : "");
  }
}

void write_effective_config(const et::ExperimentConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / "config.txt");
  et::write_config(out, config);
}

int cmd_gen_data(const GlobalOptions& g) {
  const auto config = resolve_config(g);
  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  const auto seed = config.seeds.front();
  const auto data = et::prepare_data(config.data, seed);
  const std::pair<const char*, const et::DatasetSplits*> domains[] = {{"source", &data.source},
                                                                      {"target", &data.target}};
  for (const auto& [name, splits] : domains) {
    const std::string n(name);
    write_dataset(dir / (n + "_train.csv"), splits->train);
    write_dataset(dir / (n + "_validation.csv"), splits->validation);
    write_dataset(dir / (n + "_test.csv"), splits->test);
    if (config.data.kind == et::DataKind::digits) {
      const auto side = config.data.digit_side;
      et::write_idx(splits->train, side, side, dir / (n + "_train-images.idx3-ubyte"),
                    dir / (n + "_train-labels.idx1-ubyte"));
    }
  }
  const auto mixed = et::make_mixed_test(data.source.test, data.target.test, config.test_size, config.rho,
                                         et::mix_seed(seed, "mixed-test"));
  write_dataset(dir / "mixed_test.csv", mixed.data);
  std::ofstream origin(dir / "mixed_test_origin.txt");
  for (auto o : mixed.origin) origin << et::to_string(o) << '\n';
  write_effective_config(config, dir);
  std::cout << data.description << "\nwrote datasets to " << dir << '\n';
  return 0;
}

int cmd_train(const GlobalOptions& g, std::size_t layer) {
  const auto config = resolve_config(g);
  const fs::path dir = config.output_dir;
  const auto ctx = et::prepare_seed(config, config.seeds.front());
  const auto cell = et::run_cell(config, ctx, layer);
  fs::create_directories(dir);
  et::save_backbone(dir / "backbone.model", ctx.backbone);
  et::save_etc_models(dir / "etc.model", cell.cell.models);
  et::save_probe(dir / "probe.model", cell.probe);
  write_effective_config(config, dir);
  std::printf("backbone validation accuracy %.4f\n", ctx.backbone.validation_accuracy);
  std::printf("pseudo-label agreement %.4f\n", cell.pseudo_label_accuracy);
  for (std::size_t i = 0; i < et::kAllAblations.size(); ++i) {
    const auto& m = cell.test[i].metrics;
    std::printf("%-17s acc %.4f macro-F1 %.4f routing %.4f\n",
                std::string(et::to_string(et::kAllAblations[i])).c_str(), m.accuracy, m.macro_f1,
                m.routing_accuracy);
  }
  std::cout << "saved models to " << dir << '\n';
  return 0;
}

int cmd_sweep(const GlobalOptions& g) {
  const auto config = resolve_config(g);
  const auto report = et::run_sweep(config);
  try {
    et::emit_report(report, config.output_dir);
    write_effective_config(config, config.output_dir);
  } catch (const std::exception& e) {
    throw et::StageError("report", e.what());
  }
  print_summary(report);
  return 0;
}

int cmd_ablate(const GlobalOptions& g, std::size_t layer, const std::string& mode) {
  const auto config = resolve_config(g);
  std::vector<et::Ablation> modes;
  if (mode == "all") {
    modes.assign(et::kAllAblations.begin(), et::kAllAblations.end());
  } else {
    modes.push_back(et::parse_ablation(mode));
  }
  const auto report = et::run_ablation(config, layer, modes);
  try {
    et::emit_report(report, config.output_dir);
    write_effective_config(config, config.output_dir);
  } catch (const std::exception& e) {
    throw et::StageError("report", e.what());
  }
  print_summary(report);
  return 0;
}

int cmd_route(const GlobalOptions& g, const std::string& model_dir, const std::string& input,
              bool header) {
  const fs::path dir = model_dir;
  const auto backbone = et::load_backbone(dir / "backbone.model");
  const auto models = et::load_etc_models(dir / "etc.model");
  const auto probe = et::load_probe(dir / "probe.model");
  const auto data = et::load_csv(input, {header, 0});
  const auto acts = et::extract_activations(backbone, data.samples, models.layer_index);
  const auto results = et::classify_batch(models, probe, acts);

  std::ofstream file;
  if (!g.out.empty()) {
    file.open(g.out);
    if (!file) throw et::Error("cannot open '" + g.out + "' for writing");
  }
  std::ostream& out = g.out.empty() ? std::cout : file;
  out << "index,label,branch,in_source,in_target,m_source,m_target,tie_broken\n";
  std::size_t correct = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    char buf[64];
    out << i << ',' << r.label << ',' << et::to_string(r.route.branch) << ',' << r.route.membership.in_source
        << ',' << r.route.membership.in_target << ',';
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", r.route.m_source, r.route.m_target);
    out << buf << ',' << r.route.tie_broken << '\n';
    correct += r.label == data.labels[i];
  }
  std::cerr << "accuracy against label column: "
            << (results.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(results.size()))
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Enforced transfer domain adaptation"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "Experiment config (key = value)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Override the seed list with one root seed");
  app.add_option("--out", g.out, "Output directory (output file for route)");

  auto* gen = app.add_subcommand("gen-data", "Write the source/target splits and a mixed test set");
  std::size_t layer = 1;
  auto* train = app.add_subcommand("train", "Train backbone, one cell and its probe; save models");
  train->add_option("--layer", layer, "Injection layer (1-based)");
  auto* sweep = app.add_subcommand("sweep", "Train a cell per layer, select on validation, emit a report");
  auto* ablate = app.add_subcommand("ablate", "Evaluate head-only and routed modes at one layer");
  std::string mode = "all";
  ablate->add_option("--layer", layer, "Injection layer (1-based)");
  ablate->add_option("--mode", mode, "only_source_head | only_target_head | full | all");
  auto* route = app.add_subcommand("route", "Classify a CSV of samples with saved models");
  std::string model_dir, input;
  bool header = false;
  route->add_option("--model-dir", model_dir, "Directory written by 'train'")->required();
  route->add_option("--input", input, "CSV samples, label column last")->required()->check(CLI::ExistingFile);
  route->add_flag("--header", header, "Input CSV has a header row");

  for (auto* sub : {gen, train, sweep, ablate, route}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return cmd_gen_data(g);
    if (*train) return cmd_train(g, layer);
    if (*sweep) return cmd_sweep(g);
    if (*ablate) return cmd_ablate(g, layer, mode);
    if (*route) return cmd_route(g, model_dir, input, header);
  } catch (const et::StageError& e) {
    std::cerr << "error in stage " << e.stage() << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
