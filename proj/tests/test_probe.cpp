#include <doctest.h>

#include <cmath>
#include <sstream>

#include "et/error.hpp"
#include "et/probe.hpp"
#include "support.hpp"

using namespace et;

namespace {

EtcModels random_models(std::size_t input_dim, std::size_t classes, const EtcArchitecture& arch, Rng& rng) {
  EtcModels m;
  m.e_source = make_encoder(input_dim, arch, rng);
  m.e_target = make_encoder(input_dim, arch, rng);
  m.discriminator = make_discriminator(arch, rng);
  m.d_source = make_dense_head(classes, arch, rng);
  m.d_target = make_dense_head(classes, arch, rng);
  m.layer_index = 1;
  m.critique_mode = arch.critique_mode;
  for (auto* n : {&m.e_source, &m.e_target, &m.discriminator})
    for (auto& l : n->layers())
      for (auto& b : l.bias) b = rng.uniform(-0.3, 0.3);
  return m;
}

ActivationSet random_set(std::size_t n, std::size_t d, double offset, Domain domain, Rng& rng) {
  ActivationSet s;
  s.domain = domain;
  s.layer_index = 1;
  for (std::size_t i = 0; i < n; ++i) {
    Vector x(d);
    for (auto& v : x) v = rng.normal() + offset;
    s.activations.push_back(std::move(x));
  }
  return s;
}

/// Probe whose two Gaussians are both N(0, I) in `dim` dimensions, so that
/// M_s(c) = M_t(c) = |c|^2.
ProbeParams unit_probe(std::size_t dim, ScalarStats s, ScalarStats t, double ls, double lt) {
  const GaussianStats g{Vector(dim, 0.0), Matrix::identity(dim), Matrix::identity(dim)};
  return {g, g, s, t, ls, lt};
}

Vector along_first_axis(std::size_t dim, double squared_norm) {
  Vector c(dim, 0.0);
  c[0] = std::sqrt(squared_norm);
  return c;
}

}  // namespace

TEST_CASE("critique: shape, half order and composition oracle") {
  Rng rng(1);
  const EtcArchitecture arch;
  const auto m = random_models(6, 3, arch, rng);
  const Vector x{0.1, -0.4, 1.0, 0.3, -2.0, 0.7};
  const auto c = critique(m, x);
  CHECK(c.size() == 2 * (arch.discriminator_hidden.back() + 1));
  CHECK(c.size() == 2 * m.response_dim());

  // Manual composition: hidden activations then score, E_s half first.
  const auto trace_s = forward_trace(m.discriminator, forward(m.e_source, x));
  const auto trace_t = forward_trace(m.discriminator, forward(m.e_target, x));
  Vector expected = trace_s.post[trace_s.post.size() - 2];
  expected.push_back(trace_s.output()[0]);
  const Vector target_half_hidden = trace_t.post[trace_t.post.size() - 2];
  expected.insert(expected.end(), target_half_hidden.begin(), target_half_hidden.end());
  expected.push_back(trace_t.output()[0]);
  CHECK(c == expected);

  CHECK_THROWS_AS(critique(m, Vector{1.0, 2.0}), Error);
}

TEST_CASE("critique: identical encoders give identical halves, score-only mode has dimension 2") {
  Rng rng(2);
  EtcArchitecture arch;
  auto m = random_models(4, 2, arch, rng);
  m.e_target = m.e_source;
  const auto c = critique(m, Vector{1, 2, 3, 4});
  const std::size_t h = c.size() / 2;
  for (std::size_t i = 0; i < h; ++i) CHECK(c[i] == c[h + i]);

  m.critique_mode = CritiqueMode::score_only;
  const auto s = critique(m, Vector{1, 2, 3, 4});
  CHECK(s.size() == 2);
  CHECK(s[0] == forward(m.discriminator, forward(m.e_source, Vector{1, 2, 3, 4}))[0]);
}

TEST_CASE("critique_batch equals per-sample critique") {
  Rng rng(3);
  const auto m = random_models(5, 3, EtcArchitecture{}, rng);
  const auto xs = random_set(40, 5, 0.0, Domain::source, rng);
  const auto batch = critique_batch(m, xs.activations);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(batch[i] == critique(m, xs.activations[i]));
}

TEST_CASE("fit_probe: symmetric inputs give identical stats, two samples give the midpoint") {
  Rng rng(4);
  auto m = random_models(4, 2, EtcArchitecture{}, rng);
  m.e_target = m.e_source;
  const auto xs = random_set(50, 4, 0.0, Domain::source, rng);
  const auto p = fit_probe(m, xs, xs);
  CHECK(p.source_stats == p.target_stats);
  CHECK(p.source_m_stats == p.target_m_stats);

  const std::vector<Vector> two{{1.0, 4.0}, {3.0, -2.0}};
  const std::vector<Vector> other{{0.0, 0.0}, {1.0, 1.0}};
  const auto q = fit_probe_from_critiques(two, other);
  CHECK(q.source_stats.mean == Vector{2.0, 1.0});
}

TEST_CASE("fit_probe: errors") {
  const std::vector<Vector> one{{1.0, 2.0}};
  const std::vector<Vector> two{{1.0, 2.0}, {2.0, 1.0}};
  CHECK_THROWS_AS(fit_probe_from_critiques(one, two), Error);
  CHECK_THROWS_AS(fit_probe_from_critiques(two, two, {0.0, 2.0, kDefaultRidge}), Error);
  const std::vector<Vector> three{{1.0, 2.0, 3.0}, {2.0, 1.0, 0.0}};
  CHECK_THROWS_AS(fit_probe_from_critiques(two, three), Error);
}

TEST_CASE("fit_probe matches a brute-force recomputation from raw critiques") {
  Rng rng(5);
  EtcArchitecture arch;
  arch.discriminator_hidden = {12, 5};
  const auto m = random_models(6, 3, arch, rng);
  const auto xs = random_set(200, 6, 0.0, Domain::source, rng);
  const auto xt = random_set(200, 6, 1.5, Domain::target, rng);
  const auto p = fit_probe(m, xs, xt);

  for (int side = 0; side < 2; ++side) {
    const auto& set = side == 0 ? xs : xt;
    const auto& stats = side == 0 ? p.source_stats : p.target_stats;
    const auto& mstats = side == 0 ? p.source_m_stats : p.target_m_stats;
    oracle::Rows raw;
    for (const auto& x : set.activations) raw.push_back(critique(m, x));
    const auto mu = oracle::mean(raw);
    const auto cov = oracle::covariance(raw);
    const auto prec = oracle::regularized_precision(cov, kDefaultRidge);
    CHECK(oracle::rel_error(stats.mean, mu) <= 1e-8);
    CHECK(oracle::rel_error(oracle::to_rows(stats.covariance), cov) <= 1e-8);
    std::vector<double> dist;
    for (const auto& c : raw) {
      dist.push_back(oracle::quadratic(c, mu, prec));
      CHECK(oracle::rel_error(mahalanobis(c, stats), dist.back()) <= 1e-8);
    }
    const auto [bm, bs] = oracle::mean_and_population_sd(dist);
    CHECK(oracle::rel_error(mstats.mu, bm) <= 1e-8);
    CHECK(oracle::rel_error(mstats.sigma, bs) <= 1e-8);
  }
}

TEST_CASE("membership: band centre and closed boundary") {
  const auto p = unit_probe(3, {1.0, 1.5}, {1.0, 1.5}, 2.0, 2.0);
  CHECK(membership(p, Vector{1.0, 0.0, 0.0}).in_source);  // M = mu
  CHECK(membership(p, Vector{2.0, 0.0, 0.0}) == Membership{true, true});  // M = mu + 2 sigma = 4
  CHECK_FALSE(membership(p, Vector{2.0001, 0.0, 0.0}).in_source);
  CHECK(within_band(-2.0, {1.0, 1.5}, 2.0));
  CHECK_FALSE(within_band(-2.0001, {1.0, 1.5}, 2.0));
  CHECK_THROWS_AS(membership(p, Vector{1.0}), Error);
}

TEST_CASE("membership agrees with a direct inequality evaluation on random probes") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 2 + rng.below(6);
    const auto src = oracle::correlated_samples(60, d, rng);
    const auto tgt = oracle::correlated_samples(60, d, rng);
    const auto p = fit_probe_from_critiques(std::vector<Vector>(src.begin(), src.end()),
                                            std::vector<Vector>(tgt.begin(), tgt.end()),
                                            {rng.uniform(0.2, 3.0), rng.uniform(0.2, 3.0), kDefaultRidge});
    const auto ps = oracle::regularized_precision(oracle::covariance(src), kDefaultRidge);
    const auto pt = oracle::regularized_precision(oracle::covariance(tgt), kDefaultRidge);
    const auto mus = oracle::mean(src), mut = oracle::mean(tgt);
    for (int k = 0; k < 30; ++k) {
      const auto& base = (k % 2 ? src : tgt)[rng.below(60)];
      Vector c = base;
      for (auto& v : c) v += rng.normal(0.0, 0.5);
      const double ms = oracle::quadratic(c, mus, ps);
      const double mt = oracle::quadratic(c, mut, pt);
      const auto& s = p.source_m_stats;
      const auto& t = p.target_m_stats;
      const bool in_s = s.mu - p.lambda_s * s.sigma <= ms && ms <= s.mu + p.lambda_s * s.sigma;
      const bool in_t = t.mu - p.lambda_t * t.sigma <= mt && mt <= t.mu + p.lambda_t * t.sigma;
      // Skip draws within rounding distance of a band edge.
      auto near_edge = [](double m, const ScalarStats& st, double l) {
        return std::fabs(m - (st.mu + l * st.sigma)) < 1e-9 * (1 + std::fabs(m)) ||
               std::fabs(m - (st.mu - l * st.sigma)) < 1e-9 * (1 + std::fabs(m));
      };
      if (near_edge(ms, s, p.lambda_s) || near_edge(mt, t, p.lambda_t)) continue;
      CHECK(membership(p, c) == Membership{in_s, in_t});
    }
  }
}

TEST_CASE("membership is monotone in lambda") {
  Rng rng(7);
  const auto src = oracle::correlated_samples(80, 4, rng);
  const auto tgt = oracle::correlated_samples(80, 4, rng);
  const auto base = fit_probe_from_critiques(std::vector<Vector>(src.begin(), src.end()),
                                             std::vector<Vector>(tgt.begin(), tgt.end()));
  const double lambdas[] = {0.1, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0};
  for (int k = 0; k < 200; ++k) {
    Vector c(4);
    for (auto& v : c) v = rng.normal(0.0, 4.0);
    bool was_s = false, was_t = false;
    for (double l : lambdas) {
      const auto m = membership(with_lambdas(base, l, l), c);
      CHECK((!was_s || m.in_source));
      CHECK((!was_t || m.in_target));
      was_s = m.in_source;
      was_t = m.in_target;
    }
  }
}

TEST_CASE("training critiques satisfy the two-sided Chebyshev bound") {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    // Heavy-tailed critiques: cubes of correlated Gaussians.
    auto src = oracle::correlated_samples(150, 5, rng);
    for (auto& x : src)
      for (auto& v : x) v = v * v * v;
    const auto tgt = oracle::correlated_samples(150, 5, rng);
    const std::vector<Vector> cs(src.begin(), src.end());
    for (double lambda : {1.2, 1.5, 2.0, 3.0}) {
      const auto p = fit_probe_from_critiques(cs, std::vector<Vector>(tgt.begin(), tgt.end()), {lambda, lambda});
      std::size_t in = 0;
      for (const auto& c : cs) in += membership(p, c).in_source;
      CHECK(static_cast<double>(in) / static_cast<double>(cs.size()) >= 1.0 - 1.0 / (lambda * lambda));
    }
  }
}

TEST_CASE("route: unambiguous memberships follow the membership") {
  // Source band [0, 2], target band [8, 12] on M = |c|^2.
  const auto p = unit_probe(2, {1.0, 0.5}, {10.0, 1.0}, 2.0, 2.0);
  const auto src = route(p, along_first_axis(2, 1.5));
  CHECK(src.branch == Domain::source);
  CHECK_FALSE(src.tie_broken);
  CHECK(src.membership == Membership{true, false});
  const auto tgt = route(p, along_first_axis(2, 9.0));
  CHECK(tgt.branch == Domain::target);
  CHECK_FALSE(tgt.tie_broken);
  CHECK(tgt.m_source == doctest::Approx(9.0));
}

TEST_CASE("route: neither is broken by the smaller normalized deviation") {
  // M = 4. Source: z = |4 - 3.6| / 1 = 0.4. Target: z = |4 - 2.7| / 1 = 1.3.
  const auto c = along_first_axis(3, 4.0);
  const auto p = unit_probe(3, {3.6, 1.0}, {2.7, 1.0}, 0.1, 0.1);
  const auto r = route(p, c);
  CHECK(r.membership == Membership{false, false});
  CHECK(r.branch == Domain::source);
  CHECK(r.tie_broken);
  const auto mirrored = route(unit_probe(3, {2.7, 1.0}, {3.6, 1.0}, 0.1, 0.1), c);
  CHECK(mirrored.branch == Domain::target);
  CHECK(mirrored.tie_broken);
}

TEST_CASE("route: both memberships and exact ties go to the source branch") {
  const auto p = unit_probe(2, {5.0, 2.0}, {5.0, 2.0}, 2.0, 2.0);
  const auto r = route(p, along_first_axis(2, 4.0));
  CHECK(r.membership == Membership{true, true});
  CHECK(r.branch == Domain::source);
  CHECK(r.tie_broken);
  // Both, but closer to the target centre.
  const auto q = unit_probe(2, {2.0, 1.0}, {4.0, 1.0}, 3.0, 3.0);
  CHECK(route(q, along_first_axis(2, 3.9)).branch == Domain::target);
  // Zero sigma is floored rather than dividing by zero.
  const auto z = unit_probe(2, {4.0, 0.0}, {4.0, 0.0}, 1.0, 1.0);
  CHECK(route(z, along_first_axis(2, 5.0)).branch == Domain::source);
}

TEST_CASE("classify: forced routings use the matching head") {
  Rng rng(9);
  const auto m = random_models(5, 4, EtcArchitecture{}, rng);
  const auto xs = random_set(60, 5, 0.0, Domain::source, rng);
  const auto xt = random_set(60, 5, 2.0, Domain::target, rng);
  const auto p = fit_probe(m, xs, xt);
  const auto all_source = with_lambdas(p, 1e9, 1e-300);
  const auto all_target = with_lambdas(p, 1e-300, 1e9);
  for (const auto& x : xt.activations) {
    const auto a = classify(m, all_source, x);
    CHECK(a.route.branch == Domain::source);
    CHECK(a.label == argmax(forward(m.d_source, forward(m.e_source, x))));
    const auto b = classify(m, all_target, x);
    CHECK(b.route.branch == Domain::target);
    CHECK(b.label == argmax(forward(m.d_target, forward(m.e_target, x))));
  }
}

TEST_CASE("classify: routing is invisible when both branches are the same model") {
  Rng rng(10);
  auto m = random_models(5, 4, EtcArchitecture{}, rng);
  m.e_target = m.e_source;
  m.d_target = m.d_source;
  const auto xs = random_set(60, 5, 0.0, Domain::source, rng);
  const auto xt = random_set(60, 5, 2.0, Domain::target, rng);
  const auto p = fit_probe(m, xs, xt);
  for (const auto* set : {&xs, &xt})
    for (const auto& x : set->activations) {
      const auto expected = argmax(forward(m.d_source, forward(m.e_source, x)));
      CHECK(classify(m, p, x).label == expected);
      CHECK(classify(m, with_lambdas(p, 1e9, 1e-300), x).label == expected);
      CHECK(classify(m, with_lambdas(p, 1e-300, 1e9), x).label == expected);
    }
  const auto batch = classify_batch(m, p, xt.activations);
  for (std::size_t i = 0; i < xt.size(); ++i) CHECK(batch[i].route == classify(m, p, xt.activations[i]).route);
}

TEST_CASE("probe checkpoint round-trip is value-exact") {
  Rng rng(11);
  const auto m = random_models(5, 3, EtcArchitecture{}, rng);
  const auto p = with_lambdas(fit_probe(m, random_set(40, 5, 0.0, Domain::source, rng),
                                        random_set(40, 5, 1.0, Domain::target, rng)),
                              1.0 / 3.0, 2.5);
  std::stringstream ss;
  write_probe(ss, p);
  CHECK(read_probe(ss) == p);
  CHECK_THROWS_AS(with_lambdas(p, 0.0, 1.0), Error);
}

TEST_CASE("route: with equal lambdas the branch is the smaller z for every lambda") {
  Rng rng(12);
  const auto src = oracle::correlated_samples(80, 4, rng);
  const auto tgt = oracle::correlated_samples(80, 4, rng);
  const auto base = fit_probe_from_critiques(std::vector<Vector>(src.begin(), src.end()),
                                             std::vector<Vector>(tgt.begin(), tgt.end()));
  for (int k = 0; k < 300; ++k) {
    Vector c(4);
    for (auto& v : c) v = rng.normal(0.0, 3.0);
    const auto reference = route(with_lambdas(base, 1.0, 1.0), c).branch;
    for (double l : {0.25, 0.5, 2.0, 4.0, 50.0}) CHECK(route(with_lambdas(base, l, l), c).branch == reference);
  }
}
