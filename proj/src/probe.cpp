#include "et/probe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "et/checkpoint.hpp"
#include "et/error.hpp"
#include "et/kernels.hpp"

namespace et {

Vector discriminator_response(const Network& discriminator, CritiqueMode mode,
                              std::span<const double> embedding) {
  const auto trace = forward_trace(discriminator, embedding);
  if (mode == CritiqueMode::score_only || discriminator.layer_count() < 2) return trace.output();
  Vector response = trace.post[trace.post.size() - 2];
  response.push_back(trace.output()[0]);
  return response;
}

Vector critique(const EtcModels& models, std::span<const double> x) {
  if (x.size() != models.e_source.input_dim())
    throw Error("critique: activation dimension mismatch");
  Vector c = discriminator_response(models.discriminator, models.critique_mode,
                                    forward(models.e_source, x));
  const Vector t = discriminator_response(models.discriminator, models.critique_mode,
                                          forward(models.e_target, x));
  c.insert(c.end(), t.begin(), t.end());
  return c;
}

std::vector<Vector> critique_batch(const EtcModels& models, std::span<const Vector> xs) {
  for (const auto& x : xs)
    if (x.size() != models.e_source.input_dim()) throw Error("critique: activation dimension mismatch");
  std::vector<Vector> out(xs.size());
  kernels::parallel::for_each_index(xs.size(), [&](std::size_t i) { out[i] = critique(models, xs[i]); });
  return out;
}

ProbeParams fit_probe_from_critiques(std::span<const Vector> source_critiques,
                                     std::span<const Vector> target_critiques,
                                     const ProbeOptions& options) {
  if (source_critiques.size() < 2 || target_critiques.size() < 2)
    throw Error("fit_probe: need at least 2 samples per domain");
  if (!(options.lambda_s > 0.0) || !(options.lambda_t > 0.0))
    throw Error("fit_probe: lambdas must be positive");
  if (source_critiques.front().size() != target_critiques.front().size())
    throw Error("fit_probe: critique dimension mismatch");
  ProbeParams p;
  p.source_stats = fit_gaussian(source_critiques, options.ridge);
  p.target_stats = fit_gaussian(target_critiques, options.ridge);
  const auto m_s = mahalanobis_batch(source_critiques, p.source_stats);
  const auto m_t = mahalanobis_batch(target_critiques, p.target_stats);
  p.source_m_stats = scalar_stats(m_s);
  p.target_m_stats = scalar_stats(m_t);
  p.lambda_s = options.lambda_s;
  p.lambda_t = options.lambda_t;
  return p;
}

ProbeParams fit_probe(const EtcModels& models, const ActivationSet& x_s, const ActivationSet& x_t,
                      const ProbeOptions& options) {
  if (x_s.size() < 2 || x_t.size() < 2) throw Error("fit_probe: need at least 2 samples per domain");
  return fit_probe_from_critiques(critique_batch(models, x_s.activations),
                                  critique_batch(models, x_t.activations), options);
}

ProbeParams with_lambdas(ProbeParams probe, double lambda_s, double lambda_t) {
  if (!(lambda_s > 0.0) || !(lambda_t > 0.0)) throw Error("probe: lambdas must be positive");
  probe.lambda_s = lambda_s;
  probe.lambda_t = lambda_t;
  return probe;
}

bool within_band(double distance, const ScalarStats& stats, double lambda) {
  return stats.mu - lambda * stats.sigma <= distance && distance <= stats.mu + lambda * stats.sigma;
}

namespace {

struct Distances {
  double source;
  double target;
};

Distances distances(const ProbeParams& probe, std::span<const double> c) {
  if (c.size() != probe.dim()) throw Error("probe: critique dimension mismatch");
  return {mahalanobis(c, probe.source_stats), mahalanobis(c, probe.target_stats)};
}

Membership membership_of(const ProbeParams& probe, Distances m) {
  return {within_band(m.source, probe.source_m_stats, probe.lambda_s),
          within_band(m.target, probe.target_m_stats, probe.lambda_t)};
}

double z_score(double distance, const ScalarStats& stats) {
  return std::abs(distance - stats.mu) / std::max(stats.sigma, 1e-12);
}

}  // namespace

Membership membership(const ProbeParams& probe, std::span<const double> critique) {
  return membership_of(probe, distances(probe, critique));
}

Route route(const ProbeParams& probe, std::span<const double> critique) {
  const auto m = distances(probe, critique);
  Route r;
  r.membership = membership_of(probe, m);
  r.m_source = m.source;
  r.m_target = m.target;
  if (r.membership.in_source != r.membership.in_target) {
    r.branch = r.membership.in_source ? Domain::source : Domain::target;
    return r;
  }
  r.tie_broken = true;
  r.branch = z_score(m.source, probe.source_m_stats) <= z_score(m.target, probe.target_m_stats)
                 ? Domain::source
                 : Domain::target;
  return r;
}

Classification classify(const EtcModels& models, const ProbeParams& probe, std::span<const double> x) {
  Classification out;
  out.route = route(probe, critique(models, x));
  const bool source = out.route.branch == Domain::source;
  const auto& encoder = source ? models.e_source : models.e_target;
  const auto& head = source ? models.d_source : models.d_target;
  out.label = argmax(forward(head, forward(encoder, x)));
  return out;
}

std::vector<Classification> classify_batch(const EtcModels& models, const ProbeParams& probe,
                                           std::span<const Vector> xs) {
  for (const auto& x : xs)
    if (x.size() != models.e_source.input_dim()) throw Error("classify: activation dimension mismatch");
  std::vector<Classification> out(xs.size());
  kernels::parallel::for_each_index(xs.size(),
                                    [&](std::size_t i) { out[i] = classify(models, probe, xs[i]); });
  return out;
}

namespace {

void write_gaussian(std::ostream& out, std::string_view tag, const GaussianStats& g) {
  out << tag << '\n';
  write_vector(out, "mean", g.mean);
  write_matrix(out, "covariance", g.covariance);
  write_matrix(out, "precision", g.precision);
}

GaussianStats read_gaussian(TokenReader& in, std::string_view tag) {
  in.expect(tag);
  GaussianStats g;
  g.mean = read_vector(in, "mean");
  g.covariance = read_matrix(in, "covariance");
  g.precision = read_matrix(in, "precision");
  if (g.covariance.rows() != g.dim() || !g.covariance.square() || g.precision.rows() != g.dim() ||
      !g.precision.square())
    throw Error("checkpoint: gaussian statistics shape mismatch");
  return g;
}

}  // namespace

void write_probe(std::ostream& out, const ProbeParams& probe) {
  out << "probe " << kCheckpointVersion << '\n';
  write_gaussian(out, "source_stats", probe.source_stats);
  write_gaussian(out, "target_stats", probe.target_stats);
  out << "source_m " << format_exact(probe.source_m_stats.mu) << ' '
      << format_exact(probe.source_m_stats.sigma) << '\n';
  out << "target_m " << format_exact(probe.target_m_stats.mu) << ' '
      << format_exact(probe.target_m_stats.sigma) << '\n';
  out << "lambdas " << format_exact(probe.lambda_s) << ' ' << format_exact(probe.lambda_t) << '\n';
  out << "end\n";
}

ProbeParams read_probe(std::istream& in) {
  TokenReader reader(in);
  reader.expect("probe");
  if (reader.next_u64() != kCheckpointVersion) throw Error("checkpoint: unsupported probe version");
  ProbeParams p;
  p.source_stats = read_gaussian(reader, "source_stats");
  p.target_stats = read_gaussian(reader, "target_stats");
  if (p.source_stats.dim() != p.target_stats.dim())
    throw Error("checkpoint: probe statistics differ in dimension");
  reader.expect("source_m");
  p.source_m_stats = {reader.next_real(), reader.next_real()};
  reader.expect("target_m");
  p.target_m_stats = {reader.next_real(), reader.next_real()};
  reader.expect("lambdas");
  p.lambda_s = reader.next_real();
  p.lambda_t = reader.next_real();
  reader.expect("end");
  return p;
}

void save_probe(const std::filesystem::path& path, const ProbeParams& probe) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_probe(out, probe);
}

ProbeParams load_probe(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return read_probe(in);
}

}  // namespace et
