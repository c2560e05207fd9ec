#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "et/data.hpp"
#include "et/etc_training.hpp"
#include "et/linalg.hpp"

namespace et {

/// The discriminator's response to one embedding under the given mode.
Vector discriminator_response(const Network& discriminator, CritiqueMode mode,
                              std::span<const double> embedding);

/// C(E_s(x)) followed by C(E_t(x)).
Vector critique(const EtcModels& models, std::span<const double> x);
std::vector<Vector> critique_batch(const EtcModels& models, std::span<const Vector> xs);

/// Fitted routing statistics.
struct ProbeParams {
  GaussianStats source_stats;
  GaussianStats target_stats;
  ScalarStats source_m_stats;  // distances of source critiques to source_stats
  ScalarStats target_m_stats;  // distances of target critiques to target_stats
  double lambda_s = 2.0;
  double lambda_t = 2.0;

  std::size_t dim() const noexcept { return source_stats.dim(); }
  bool operator==(const ProbeParams&) const = default;
};

struct ProbeOptions {
  double lambda_s = 2.0;
  double lambda_t = 2.0;
  double ridge = kDefaultRidge;
};

ProbeParams fit_probe(const EtcModels& models, const ActivationSet& x_s, const ActivationSet& x_t,
                      const ProbeOptions& options = {});
ProbeParams fit_probe_from_critiques(std::span<const Vector> source_critiques,
                                     std::span<const Vector> target_critiques,
                                     const ProbeOptions& options = {});

ProbeParams with_lambdas(ProbeParams probe, double lambda_s, double lambda_t);

struct Membership {
  bool in_source = false;
  bool in_target = false;

  bool operator==(const Membership&) const = default;
};

/// Closed band test mu - lambda*sigma <= m <= mu + lambda*sigma.
bool within_band(double distance, const ScalarStats& stats, double lambda);

Membership membership(const ProbeParams& probe, std::span<const double> critique);

struct Route {
  Domain branch = Domain::source;
  Membership membership;
  double m_source = 0.0;
  double m_target = 0.0;
  bool tie_broken = false;

  bool operator==(const Route&) const = default;
};

/// Source-only membership routes to the source head, target-only to the
/// target head. Otherwise the smaller z = |M - mu| / sigma wins, with the
/// source head taking exact ties.
Route route(const ProbeParams& probe, std::span<const double> critique);

struct Classification {
  std::size_t label = 0;
  Route route;
};

Classification classify(const EtcModels& models, const ProbeParams& probe, std::span<const double> x);
std::vector<Classification> classify_batch(const EtcModels& models, const ProbeParams& probe,
                                           std::span<const Vector> xs);

void write_probe(std::ostream& out, const ProbeParams& probe);
ProbeParams read_probe(std::istream& in);
void save_probe(const std::filesystem::path& path, const ProbeParams& probe);
ProbeParams load_probe(const std::filesystem::path& path);

}  // namespace et
