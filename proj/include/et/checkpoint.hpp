#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "et/linalg.hpp"
#include "et/nn.hpp"

namespace et {

// Versioned text checkpoints. Reals are written as hexadecimal floating
// point, so save/load round-trips are value-exact.

inline constexpr int kCheckpointVersion = 1;

std::string format_exact(double value);
double parse_exact(std::string_view token);

/// Whitespace-token reader with expectation helpers for the checkpoint grammar.
class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  std::string next();
  void expect(std::string_view keyword);
  std::size_t next_size();
  std::uint64_t next_u64();
  double next_real();
  Vector next_vector(std::size_t n);

 private:
  std::istream& in_;
};

void write_vector(std::ostream& out, std::string_view tag, std::span<const double> values);
void write_matrix(std::ostream& out, std::string_view tag, const Matrix& m);
Matrix read_matrix(TokenReader& in, std::string_view tag);
Vector read_vector(TokenReader& in, std::string_view tag);

void write_network(std::ostream& out, const Network& net);
Network read_network(TokenReader& in);

void save_network(const std::filesystem::path& path, const Network& net);
Network load_network(const std::filesystem::path& path);

}  // namespace et
