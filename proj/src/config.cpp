#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>

#include "et/error.hpp"
#include "et/experiment.hpp"

namespace et {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto t = trim(item);
    if (!t.empty()) items.push_back(std::move(t));
  }
  return items;
}

double to_real(const std::string& key, const std::string& value) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size() || errno == ERANGE)
    throw Error("config key '" + key + "': expected a number, got '" + value + "'");
  return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  char* end = nullptr;
  errno = 0;
  const auto v = std::strtoull(value.c_str(), &end, 10);
  if (value.empty() || value[0] == '-' || end != value.c_str() + value.size() || errno == ERANGE)
    throw Error("config key '" + key + "': expected a non-negative integer, got '" + value + "'");
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw Error("config key '" + key + "': expected true/false, got '" + value + "'");
}

std::string real_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
std::string join(const std::vector<T>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += real_text(items[i]);
    } else {
      out += std::to_string(items[i]);
    }
  }
  return out;
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class Access>
Field real_field(Access access) {
  return {[access](ExperimentConfig& c, const std::string& k, const std::string& v) {
            access(c) = to_real(k, v);
          },
          [access](const ExperimentConfig& c) {
            return real_text(access(c));
          }};
}

template <class Access>
Field size_field(Access access) {
  return {[access](ExperimentConfig& c, const std::string& k, const std::string& v) {
            access(c) = static_cast<std::remove_cvref_t<decltype(access(c))>>(to_u64(k, v));
          },
          [access](const ExperimentConfig& c) {
            return std::to_string(access(c));
          }};
}

template <class Access>
Field string_field(Access access) {
  return {[access](ExperimentConfig& c, const std::string&, const std::string& v) { access(c) = v; },
          [access](const ExperimentConfig& c) { return access(c); }};
}

template <class Access>
Field bool_field(Access access) {
  return {[access](ExperimentConfig& c, const std::string& k, const std::string& v) {
            access(c) = to_bool(k, v);
          },
          [access](const ExperimentConfig& c) {
            return std::string(access(c) ? "true" : "false");
          }};
}

template <class Access>
Field size_list_field(Access access) {
  return {[access](ExperimentConfig& c, const std::string& k, const std::string& v) {
            auto& out = access(c);
            out.clear();
            for (const auto& item : split_list(v))
              out.push_back(static_cast<typename std::remove_cvref_t<decltype(out)>::value_type>(
                  to_u64(k, item)));
          },
          [access](const ExperimentConfig& c) { return join(access(c)); }};
}

template <class Access>
Field real_list_field(Access access) {
  return {[access](ExperimentConfig& c, const std::string& k, const std::string& v) {
            auto& out = access(c);
            out.clear();
            for (const auto& item : split_list(v)) out.push_back(to_real(k, item));
          },
          [access](const ExperimentConfig& c) { return join(access(c)); }};
}

template <class Access>
void add_train_fields(std::map<std::string, Field>& fields, const std::string& prefix, Access access,
                      bool with_epochs = true) {
  fields[prefix + ".lr"] = real_field([access](auto& c) -> auto& { return access(c).learning_rate; });
  if (with_epochs) {
    fields[prefix + ".epochs"] = size_field([access](auto& c) -> auto& { return access(c).epochs; });
    fields[prefix + ".batch_size"] =
        size_field([access](auto& c) -> auto& { return access(c).batch_size; });
  }
  fields[prefix + ".beta1"] = real_field([access](auto& c) -> auto& { return access(c).beta1; });
  fields[prefix + ".beta2"] = real_field([access](auto& c) -> auto& { return access(c).beta2; });
  fields[prefix + ".optimizer"] = {
      [access](ExperimentConfig& c, const std::string&, const std::string& v) {
        access(c).optimizer = parse_optimizer(v);
      },
      [access](const ExperimentConfig& c) {
        return std::string(to_string(access(c).optimizer));
      }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> f;
    using C = ExperimentConfig;
    f["data.kind"] = {[](C& c, const std::string&, const std::string& v) { c.data.kind = parse_data_kind(v); },
                      [](const C& c) { return std::string(to_string(c.data.kind)); }};
    f["data.classes"] = size_field([](auto& c) -> auto& { return c.data.classes; });
    f["data.per_class"] = size_field([](auto& c) -> auto& { return c.data.per_class; });
    f["data.dim"] = size_field([](auto& c) -> auto& { return c.data.dim; });
    f["data.separation"] = real_field([](auto& c) -> auto& { return c.data.separation; });
    f["data.shift.rotation"] = real_field([](auto& c) -> auto& { return c.data.shift.rotation_deg; });
    f["data.shift.translation"] = real_list_field([](auto& c) -> auto& { return c.data.shift.translation; });
    f["data.shift.noise"] = real_field([](auto& c) -> auto& { return c.data.shift.noise_sigma; });
    f["data.digits.side"] = size_field([](auto& c) -> auto& { return c.data.digit_side; });
    f["data.digits.per_class"] = size_field([](auto& c) -> auto& { return c.data.digit_per_class; });
    f["data.digits.rotation"] = real_field([](auto& c) -> auto& { return c.data.digit_rotation; });
    f["data.digits.noise"] = real_field([](auto& c) -> auto& { return c.data.digit_noise; });
    f["data.format"] = string_field([](auto& c) -> auto& { return c.data.format; });
    f["data.source"] = string_field([](auto& c) -> auto& { return c.data.source_path; });
    f["data.target"] = string_field([](auto& c) -> auto& { return c.data.target_path; });
    f["data.source_labels"] = string_field([](auto& c) -> auto& { return c.data.source_labels_path; });
    f["data.target_labels"] = string_field([](auto& c) -> auto& { return c.data.target_labels_path; });
    f["data.csv_header"] = bool_field([](auto& c) -> auto& { return c.data.csv_header; });
    f["data.split.train"] = real_field([](auto& c) -> auto& { return c.data.splits.train; });
    f["data.split.validation"] = real_field([](auto& c) -> auto& { return c.data.splits.validation; });
    f["data.split.test"] = real_field([](auto& c) -> auto& { return c.data.splits.test; });

    f["backbone.hidden"] = size_list_field([](auto& c) -> auto& { return c.backbone.hidden; });
    f["backbone.activation"] = {
        [](C& c, const std::string&, const std::string& v) { c.backbone.activation = parse_activation(v); },
        [](const C& c) { return std::string(to_string(c.backbone.activation)); }};
    add_train_fields(f, "backbone", [](auto& c) -> auto& { return c.backbone.train; });

    f["etc.encoder_hidden"] = size_list_field([](auto& c) -> auto& { return c.etc.arch.encoder_hidden; });
    f["etc.embedding_dim"] = size_field([](auto& c) -> auto& { return c.etc.arch.embedding_dim; });
    f["etc.discriminator_hidden"] =
        size_list_field([](auto& c) -> auto& { return c.etc.arch.discriminator_hidden; });
    f["etc.discriminator_activation"] = {
        [](C& c, const std::string&, const std::string& v) {
          c.etc.arch.discriminator_activation = parse_activation(v);
        },
        [](const C& c) { return std::string(to_string(c.etc.arch.discriminator_activation)); }};
    f["etc.dense_hidden"] = size_list_field([](auto& c) -> auto& { return c.etc.arch.dense_hidden; });
    f["etc.critique_mode"] = {
        [](C& c, const std::string&, const std::string& v) { c.etc.arch.critique_mode = parse_critique_mode(v); },
        [](const C& c) { return std::string(to_string(c.etc.arch.critique_mode)); }};
    add_train_fields(f, "etc.source", [](auto& c) -> auto& { return c.etc.source_branch; });
    add_train_fields(f, "etc.target", [](auto& c) -> auto& { return c.etc.target_dense; });
    add_train_fields(f, "etc.adversarial", [](auto& c) -> auto& { return c.etc.adversarial.generator; });
    add_train_fields(f, "etc.discriminator", [](auto& c) -> auto& { return c.etc.adversarial.discriminator; },
                     false);
    f["etc.adversarial.warmup_epochs"] =
        size_field([](auto& c) -> auto& { return c.etc.adversarial.warmup_epochs; });

    f["probe.lambda_s"] = real_field([](auto& c) -> auto& { return c.probe.lambda_s; });
    f["probe.lambda_t"] = real_field([](auto& c) -> auto& { return c.probe.lambda_t; });
    f["probe.ridge"] = real_field([](auto& c) -> auto& { return c.probe.ridge; });
    f["probe.lambda_grid"] = real_list_field([](auto& c) -> auto& { return c.lambda_grid; });

    f["experiment.rho"] = real_field([](auto& c) -> auto& { return c.rho; });
    f["experiment.test_size"] = size_field([](auto& c) -> auto& { return c.test_size; });
    f["experiment.validation_size"] = size_field([](auto& c) -> auto& { return c.validation_size; });
    f["experiment.seeds"] = size_list_field([](auto& c) -> auto& { return c.seeds; });
    f["experiment.layers"] = size_list_field([](auto& c) -> auto& { return c.layers; });
    f["experiment.pseudo_labels"] = string_field([](auto& c) -> auto& { return c.pseudo_label_file; });
    f["experiment.parallel"] = bool_field([](auto& c) -> auto& { return c.parallel_cells; });
    f["out"] = string_field([](auto& c) -> auto& { return c.output_dir; });
    return f;
  }();
  return table;
}

void check(const ExperimentConfig& c) {
  if (c.seeds.empty()) throw Error("config: at least one seed is required");
  if (c.lambda_grid.empty()) throw Error("config: lambda grid must be non-empty");
  for (double l : c.lambda_grid)
    if (!(l > 0.0)) throw Error("config: lambda grid values must be positive");
  if (!(c.probe.lambda_s > 0.0) || !(c.probe.lambda_t > 0.0)) throw Error("config: lambdas must be positive");
  if (!(c.rho >= 0.0 && c.rho <= 1.0)) throw Error("config: experiment.rho must lie in [0, 1]");
  if (c.backbone.hidden.empty()) throw Error("config: backbone.hidden must list at least one layer");
}

}  // namespace

std::map<std::string, std::string> parse_key_values(std::istream& in) {
  std::map<std::string, std::string> values;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto text = trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw Error("config line " + std::to_string(row) + ": expected 'key = value'");
    auto key = trim(std::string_view(text).substr(0, eq));
    auto value = trim(std::string_view(text).substr(eq + 1));
    if (key.empty()) throw Error("config line " + std::to_string(row) + ": empty key");
    if (values.count(key)) throw Error("config line " + std::to_string(row) + ": duplicate key '" + key + "'");
    values.emplace(std::move(key), std::move(value));
  }
  return values;
}

ExperimentConfig config_from_key_values(const std::map<std::string, std::string>& values) {
  ExperimentConfig config;
  for (const auto& [key, value] : values) {
    const auto it = fields().find(key);
    if (it == fields().end()) throw Error("config: unknown key '" + key + "'");
    it->second.set(config, key, value);
  }
  check(config);
  return config;
}

ExperimentConfig parse_config(std::string_view text) {
  std::istringstream in{std::string(text)};
  return config_from_key_values(parse_key_values(in));
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path.string() + "'");
  try {
    return config_from_key_values(parse_key_values(in));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::map<std::string, std::string> to_key_values(const ExperimentConfig& config) {
  std::map<std::string, std::string> out;
  for (const auto& [key, field] : fields()) out[key] = field.get(config);
  return out;
}

void write_config(std::ostream& out, const ExperimentConfig& config) {
  for (const auto& [key, value] : to_key_values(config)) out << key << " = " << value << '\n';
}

}  // namespace et
