#include <doctest.h>

#include <cmath>
#include <set>

#include "et/error.hpp"
#include "et/linalg.hpp"
#include "et/random.hpp"
#include "support.hpp"

using namespace et;

TEST_CASE("rng: same seed gives the same stream, substreams are independent of draws") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  Rng c(42);
  const auto before = c.substream("x").next();
  c.next();
  CHECK(c.substream("x").next() == before);
  CHECK(Rng(42).substream("x").next() != Rng(42).substream("y").next());
  CHECK(Rng(42).substream("x", 0).next() != Rng(42).substream("x", 1).next());
  CHECK(mix_seed(1, "a") != mix_seed(2, "a"));
}

TEST_CASE("rng: uniform and normal moments, bounded draws and permutations") {
  Rng rng(7);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::fabs(sn / n) < 0.01);
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));

  std::vector<int> hits(7, 0);
  for (int i = 0; i < 70000; ++i) ++hits[rng.below(7)];
  for (int h : hits) CHECK(h == doctest::Approx(10000).epsilon(0.05));

  const auto p = rng.permutation(50);
  CHECK(std::set<std::size_t>(p.begin(), p.end()).size() == 50);
  CHECK(*std::max_element(p.begin(), p.end()) == 49);
}

TEST_CASE("empirical mean: single sample is itself, constant shift moves it exactly") {
  const std::vector<Vector> one{{1.5, -2.0, 3.25}};
  CHECK(empirical_mean(one) == one[0]);

  std::vector<Vector> xs{{1, 2}, {3, 5}, {-1, 0}, {0.5, 0.25}};
  const auto m = empirical_mean(xs);
  auto shifted = xs;
  for (auto& x : shifted) {
    x[0] += 8.0;
    x[1] -= 2.0;
  }
  const auto ms = empirical_mean(shifted);
  CHECK(ms[0] == doctest::Approx(m[0] + 8.0).epsilon(1e-14));
  CHECK(ms[1] == doctest::Approx(m[1] - 2.0).epsilon(1e-14));
}

TEST_CASE("empirical mean: errors") {
  CHECK_THROWS_WITH_AS(empirical_mean(std::vector<Vector>{}), doctest::Contains("no samples"), Error);
  CHECK_THROWS_WITH_AS(empirical_mean(std::vector<Vector>{{1, 2}, {1}}),
                       doctest::Contains("dimension mismatch"), Error);
  CHECK_THROWS_AS(empirical_mean(std::vector<Vector>{{1, NAN}}), Error);
}

TEST_CASE("empirical covariance matches a two-pass extended-precision oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t d = 2 + rng.below(10);
    const auto xs = oracle::correlated_samples(30 + rng.below(100), d, rng);
    const std::vector<Vector> samples(xs.begin(), xs.end());
    const auto m = empirical_mean(samples);
    CHECK(oracle::rel_error(m, oracle::mean(xs)) <= 1e-12);
    const auto c = empirical_covariance(samples, m);
    CHECK(oracle::rel_error(oracle::to_rows(c), oracle::covariance(xs)) <= 1e-12);
    CHECK(c == c.transposed());
  }
}

TEST_CASE("empirical covariance: identical samples give zero, translation leaves it unchanged") {
  const std::vector<Vector> same(5, Vector{1.0, 2.0, 3.0});
  const auto c = empirical_covariance(same, empirical_mean(same));
  for (double v : c.values()) CHECK(v == 0.0);

  Rng rng(11);
  const auto xs = oracle::correlated_samples(60, 4, rng);
  std::vector<Vector> a(xs.begin(), xs.end()), b = a;
  for (auto& x : b)
    for (auto& v : x) v += 3.0;
  const auto ca = empirical_covariance(a, empirical_mean(a));
  const auto cb = empirical_covariance(b, empirical_mean(b));
  CHECK(oracle::rel_error(oracle::to_rows(cb), oracle::to_rows(ca)) <= 1e-12);
}

TEST_CASE("covariance is positive semi-definite") {
  Rng rng(5);
  const auto xs = oracle::correlated_samples(40, 6, rng);
  const std::vector<Vector> samples(xs.begin(), xs.end());
  const auto c = empirical_covariance(samples, empirical_mean(samples));
  for (int t = 0; t < 50; ++t) {
    Vector v(6);
    for (auto& x : v) x = rng.normal();
    CHECK(dot(v, multiply(c, v)) >= -1e-12);
  }
}

TEST_CASE("regularized inverse: identity, diagonal, oracle agreement") {
  const auto inv = regularized_inverse(Matrix::identity(4), 0.0);
  CHECK(inv == Matrix::identity(4));

  const Vector diag{2.0, 4.0, 0.5};
  const auto dinv = regularized_inverse(Matrix::diagonal(diag), 0.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(dinv(i, i) == doctest::Approx(1.0 / diag[i]).epsilon(1e-15));

  Rng rng(9);
  const auto xs = oracle::correlated_samples(80, 7, rng);
  const std::vector<Vector> samples(xs.begin(), xs.end());
  const auto c = empirical_covariance(samples, empirical_mean(samples));
  const auto p = regularized_inverse(c, kDefaultRidge);
  CHECK(p == p.transposed());
  CHECK(oracle::rel_error(oracle::to_rows(p), oracle::regularized_precision(oracle::to_rows(c), kDefaultRidge)) <=
        1e-9);
}

TEST_CASE("regularized inverse: errors") {
  CHECK_THROWS_AS(regularized_inverse(Matrix(2, 3)), Error);
  Matrix asym(2, 2);
  asym(0, 0) = asym(1, 1) = 1.0;
  asym(0, 1) = 0.5;
  CHECK_THROWS_WITH_AS(regularized_inverse(asym), doctest::Contains("not symmetric"), Error);
  Matrix neg = Matrix::identity(2);
  neg(1, 1) = -3.0;
  CHECK_THROWS_WITH_AS(regularized_inverse(neg, 0.0), doctest::Contains("not positive definite"), Error);
  // Singular without ridge, invertible with it.
  Matrix rank1(2, 2, 1.0);
  CHECK_THROWS_AS(regularized_inverse(rank1, 0.0), Error);
  CHECK_NOTHROW(regularized_inverse(rank1, 1e-3));
}

TEST_CASE("mahalanobis: zero at the mean, identity stats give squared Euclidean") {
  GaussianStats id{{1.0, -1.0, 2.0}, Matrix::identity(3), Matrix::identity(3)};
  CHECK(mahalanobis(id.mean, id) == 0.0);
  const Vector x{2.0, 1.0, -1.0};
  CHECK(mahalanobis(x, id) == doctest::Approx(1.0 + 4.0 + 9.0));
  CHECK_THROWS_WITH_AS(mahalanobis(Vector{1.0}, id), doctest::Contains("dimension mismatch"), Error);
}

TEST_CASE("mahalanobis: non-negative on random precisions, batch equals single") {
  Rng rng(21);
  const auto xs = oracle::correlated_samples(50, 5, rng);
  const std::vector<Vector> samples(xs.begin(), xs.end());
  const auto stats = fit_gaussian(samples);
  const auto batch = mahalanobis_batch(samples, stats);
  const auto prec = oracle::to_rows(stats.precision);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(batch[i] >= 0.0);
    CHECK(batch[i] == mahalanobis(samples[i], stats));
    CHECK(batch[i] == doctest::Approx(oracle::quadratic(xs[i], stats.mean, prec)).epsilon(1e-10));
  }
}

TEST_CASE("fit_gaussian: training-set mean distance equals the dimension without ridge") {
  // sum_i (x_i - m)^T S^-1 (x_i - m) = N tr(S^-1 S) = N d for the population S.
  Rng rng(13);
  const auto xs = oracle::correlated_samples(200, 6, rng);
  const std::vector<Vector> samples(xs.begin(), xs.end());
  const auto stats = fit_gaussian(samples, 0.0);
  const auto ds = mahalanobis_batch(samples, stats);
  CHECK(scalar_stats(ds).mu == doctest::Approx(6.0).epsilon(1e-9));
}

TEST_CASE("scalar stats: population sigma") {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  const auto s = scalar_stats(v);
  CHECK(s.mu == 5.0);
  CHECK(s.sigma == 2.0);
  CHECK(scalar_stats(std::vector<double>{3.0}).sigma == 0.0);
  CHECK_THROWS_AS(scalar_stats(std::vector<double>{}), Error);
}
