#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "et/error.hpp"
#include "et/experiment.hpp"

namespace et {
namespace {

using nlohmann::json;

json domains_to_json(const std::vector<Domain>& ds) {
  json arr = json::array();
  for (auto d : ds) arr.push_back(std::string(to_string(d)));
  return arr;
}

std::vector<Domain> domains_from_json(const json& arr) {
  std::vector<Domain> out;
  for (const auto& d : arr) out.push_back(parse_domain(d.get<std::string>()));
  return out;
}

json metrics_to_json(const Metrics& m) {
  const auto& c = m.confusion.counts;
  return {{"count", m.count},
          {"accuracy", m.accuracy},
          {"macro_f1", m.macro_f1},
          {"routing_accuracy", m.routing_accuracy},
          {"routing_confusion", {{"source", {{"source", c[0][0]}, {"target", c[0][1]}}},
                                 {"target", {{"source", c[1][0]}, {"target", c[1][1]}}}}},
          {"membership", {{"source_only", m.membership.source_only},
                          {"target_only", m.membership.target_only},
                          {"both", m.membership.both},
                          {"neither", m.membership.neither}}}};
}

Metrics metrics_from_json(const json& j) {
  Metrics m;
  m.count = j.at("count").get<std::size_t>();
  m.accuracy = j.at("accuracy").get<double>();
  m.macro_f1 = j.at("macro_f1").get<double>();
  m.routing_accuracy = j.at("routing_accuracy").get<double>();
  const auto& c = j.at("routing_confusion");
  m.confusion.counts[0][0] = c.at("source").at("source").get<std::size_t>();
  m.confusion.counts[0][1] = c.at("source").at("target").get<std::size_t>();
  m.confusion.counts[1][0] = c.at("target").at("source").get<std::size_t>();
  m.confusion.counts[1][1] = c.at("target").at("target").get<std::size_t>();
  const auto& mem = j.at("membership");
  m.membership = {mem.at("source_only").get<std::size_t>(), mem.at("target_only").get<std::size_t>(),
                  mem.at("both").get<std::size_t>(), mem.at("neither").get<std::size_t>()};
  return m;
}

std::string real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error("write failed: '" + path.string() + "'");
}

}  // namespace

std::string report_to_json(const ExperimentReport& report) {
  json j;
  j["format"] = "enforced-transfer-report";
  j["version"] = 1;
  j["class_count"] = report.class_count;
  j["contamination"] = report.contamination;
  j["seeds"] = json::array();
  for (const auto& s : report.seeds) {
    json lambdas = json::array();
    for (const auto& p : s.lambda_sweep)
      lambdas.push_back({{"lambda", p.lambda}, {"macro_f1", p.macro_f1}, {"routing_accuracy", p.routing_accuracy}});
    j["seeds"].push_back({{"seed", s.seed},
                          {"best_layer", s.best_layer},
                          {"backbone_validation_accuracy", s.backbone_validation_accuracy},
                          {"test_labels", s.test_labels},
                          {"test_origins", domains_to_json(s.test_origins)},
                          {"lambda_sweep", lambdas}});
  }
  j["cells"] = json::array();
  for (const auto& c : report.cells)
    j["cells"].push_back({{"seed", c.seed},
                          {"layer", c.layer},
                          {"pseudo_label_accuracy", c.pseudo_label_accuracy},
                          {"discriminator_history", c.discriminator_history}});
  j["runs"] = json::array();
  for (const auto& r : report.runs)
    j["runs"].push_back({{"seed", r.seed},
                         {"layer", r.layer},
                         {"ablation", std::string(to_string(r.ablation))},
                         {"selected", r.selected},
                         {"validation_macro_f1", r.validation_macro_f1},
                         {"test", metrics_to_json(r.test)},
                         {"predictions", r.predictions},
                         {"branches", domains_to_json(r.branches)}});
  return j.dump(1);
}

ExperimentReport report_from_json(std::string_view text) {
  try {
    const auto j = json::parse(text);
    if (j.at("format").get<std::string>() != "enforced-transfer-report" || j.at("version").get<int>() != 1)
      throw Error("unsupported report format");
    ExperimentReport report;
    report.class_count = j.at("class_count").get<std::size_t>();
    report.contamination = j.at("contamination").get<double>();
    for (const auto& s : j.at("seeds")) {
      SeedRecord rec;
      rec.seed = s.at("seed").get<std::uint64_t>();
      rec.best_layer = s.at("best_layer").get<std::size_t>();
      rec.backbone_validation_accuracy = s.at("backbone_validation_accuracy").get<double>();
      rec.test_labels = s.at("test_labels").get<std::vector<std::size_t>>();
      rec.test_origins = domains_from_json(s.at("test_origins"));
      for (const auto& p : s.at("lambda_sweep"))
        rec.lambda_sweep.push_back({p.at("lambda").get<double>(), p.at("macro_f1").get<double>(),
                                    p.at("routing_accuracy").get<double>()});
      report.seeds.push_back(std::move(rec));
    }
    for (const auto& c : j.at("cells"))
      report.cells.push_back({c.at("seed").get<std::uint64_t>(), c.at("layer").get<std::size_t>(),
                              c.at("pseudo_label_accuracy").get<double>(),
                              c.at("discriminator_history").get<std::vector<double>>()});
    for (const auto& r : j.at("runs")) {
      RunRecord run;
      run.seed = r.at("seed").get<std::uint64_t>();
      run.layer = r.at("layer").get<std::size_t>();
      run.ablation = parse_ablation(r.at("ablation").get<std::string>());
      run.selected = r.at("selected").get<bool>();
      run.validation_macro_f1 = r.at("validation_macro_f1").get<double>();
      run.test = metrics_from_json(r.at("test"));
      run.predictions = r.at("predictions").get<std::vector<std::size_t>>();
      run.branches = domains_from_json(r.at("branches"));
      report.runs.push_back(std::move(run));
    }
    return report;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed report: ") + e.what());
  }
}

void write_metrics_csv(std::ostream& out, const ExperimentReport& report) {
  out << "seed,layer,ablation,selected,count,accuracy,macro_f1,routing_accuracy,validation_macro_f1,"
         "source_to_source,source_to_target,target_to_source,target_to_target,"
         "member_source_only,member_target_only,member_both,member_neither\n";
  for (const auto& r : report.runs) {
    const auto& m = r.test;
    const auto& c = m.confusion.counts;
    out << r.seed << ',' << r.layer << ',' << to_string(r.ablation) << ',' << (r.selected ? 1 : 0) << ','
        << m.count << ',' << real(m.accuracy) << ',' << real(m.macro_f1) << ',' << real(m.routing_accuracy)
        << ',' << real(r.validation_macro_f1) << ',' << c[0][0] << ',' << c[0][1] << ',' << c[1][0] << ','
        << c[1][1] << ',' << m.membership.source_only << ',' << m.membership.target_only << ','
        << m.membership.both << ',' << m.membership.neither << '\n';
  }
}

void emit_report(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "plots", ec);
  if (ec) throw Error("cannot create '" + (dir / "plots").string() + "': " + ec.message());

  {
    const auto path = dir / "report.json";
    auto out = open_for_write(path);
    out << report_to_json(report) << '\n';
    finish(out, path);
  }
  {
    const auto path = dir / "metrics.csv";
    auto out = open_for_write(path);
    write_metrics_csv(out, report);
    finish(out, path);
  }
  for (auto mode : kAllAblations) {
    // Mean test macro-F1 per layer across seeds.
    std::map<std::size_t, std::pair<double, std::size_t>> by_layer;
    for (const auto& r : report.runs) {
      if (r.ablation != mode) continue;
      auto& slot = by_layer[r.layer];
      slot.first += r.test.macro_f1;
      ++slot.second;
    }
    const auto path = dir / "plots" / ("layer_sweep_" + std::string(to_string(mode)) + ".dat");
    auto out = open_for_write(path);
    out << "# layer macro_f1\n";
    for (const auto& [layer, acc] : by_layer)
      out << layer << ' ' << real(acc.first / static_cast<double>(acc.second)) << '\n';
    finish(out, path);
  }
  {
    std::map<double, std::pair<double, std::size_t>> by_lambda;
    for (const auto& s : report.seeds)
      for (const auto& p : s.lambda_sweep) {
        auto& slot = by_lambda[p.lambda];
        slot.first += p.macro_f1;
        ++slot.second;
      }
    const auto path = dir / "plots" / "lambda_sweep.dat";
    auto out = open_for_write(path);
    out << "# lambda_s macro_f1\n";
    for (const auto& [lambda, acc] : by_lambda)
      out << real(lambda) << ' ' << real(acc.first / static_cast<double>(acc.second)) << '\n';
    finish(out, path);
  }
}

ExperimentReport load_report(const std::filesystem::path& dir) {
  const auto path = dir / "report.json";
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return report_from_json(buffer.str());
}

}  // namespace et
