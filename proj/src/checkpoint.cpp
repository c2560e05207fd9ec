#include "et/checkpoint.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>

#include "et/error.hpp"

namespace et {

std::string format_exact(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", value);
  return buf;
}

double parse_exact(std::string_view token) {
  const std::string text(token);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE)
    throw Error("checkpoint: malformed real '" + text + "'");
  return v;
}

std::string TokenReader::next() {
  std::string token;
  if (!(in_ >> token)) throw Error("checkpoint: unexpected end of input");
  return token;
}

void TokenReader::expect(std::string_view keyword) {
  const auto token = next();
  if (token != keyword)
    throw Error("checkpoint: expected '" + std::string(keyword) + "', found '" + token + "'");
}

std::uint64_t TokenReader::next_u64() {
  const auto token = next();
  char* end = nullptr;
  errno = 0;
  const auto v = std::strtoull(token.c_str(), &end, 10);
  if (token.empty() || token[0] == '-' || end != token.c_str() + token.size() || errno == ERANGE)
    throw Error("checkpoint: malformed integer '" + token + "'");
  return v;
}

std::size_t TokenReader::next_size() { return static_cast<std::size_t>(next_u64()); }

double TokenReader::next_real() { return parse_exact(next()); }

Vector TokenReader::next_vector(std::size_t n) {
  Vector v(n);
  for (double& x : v) x = next_real();
  return v;
}

void write_vector(std::ostream& out, std::string_view tag, std::span<const double> values) {
  out << tag << ' ' << values.size();
  for (double v : values) out << ' ' << format_exact(v);
  out << '\n';
}

Vector read_vector(TokenReader& in, std::string_view tag) {
  in.expect(tag);
  return in.next_vector(in.next_size());
}

void write_matrix(std::ostream& out, std::string_view tag, const Matrix& m) {
  out << tag << ' ' << m.rows() << ' ' << m.cols();
  for (double v : m.values()) out << ' ' << format_exact(v);
  out << '\n';
}

Matrix read_matrix(TokenReader& in, std::string_view tag) {
  in.expect(tag);
  const auto rows = in.next_size();
  const auto cols = in.next_size();
  return Matrix(rows, cols, in.next_vector(rows * cols));
}

void write_network(std::ostream& out, const Network& net) {
  out << "network " << kCheckpointVersion << '\n';
  out << "layers " << net.layer_count() << '\n';
  for (const auto& layer : net.layers()) {
    out << "layer " << layer.spec.input_dim << ' ' << layer.spec.output_dim << ' '
        << to_string(layer.spec.activation) << '\n';
    write_matrix(out, "weights", layer.weights);
    write_vector(out, "bias", layer.bias);
  }
  out << "end\n";
}

Network read_network(TokenReader& in) {
  in.expect("network");
  const auto version = in.next_u64();
  if (version != kCheckpointVersion)
    throw Error("checkpoint: unsupported network version " + std::to_string(version));
  in.expect("layers");
  const auto count = in.next_size();
  std::vector<LayerSpec> specs;
  std::vector<std::pair<Matrix, Vector>> params;
  for (std::size_t k = 0; k < count; ++k) {
    in.expect("layer");
    LayerSpec spec;
    spec.input_dim = in.next_size();
    spec.output_dim = in.next_size();
    spec.activation = parse_activation(in.next());
    auto w = read_matrix(in, "weights");
    auto b = read_vector(in, "bias");
    if (w.rows() != spec.output_dim || w.cols() != spec.input_dim || b.size() != spec.output_dim)
      throw Error("checkpoint: layer " + std::to_string(k) + " parameter shape mismatch");
    specs.push_back(spec);
    params.emplace_back(std::move(w), std::move(b));
  }
  in.expect("end");
  Network net(std::move(specs));
  for (std::size_t k = 0; k < count; ++k) {
    net.layers()[k].weights = std::move(params[k].first);
    net.layers()[k].bias = std::move(params[k].second);
  }
  return net;
}

void save_network(const std::filesystem::path& path, const Network& net) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_network(out, net);
  if (!out) throw Error("write failed: '" + path.string() + "'");
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  TokenReader reader(in);
  return read_network(reader);
}

}  // namespace et
