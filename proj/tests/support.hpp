#pragma once
// Independent reference computations shared by the test binaries. None of
// these call into the library's numeric code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "et/linalg.hpp"
#include "et/nn.hpp"
#include "et/random.hpp"

namespace oracle {

using Rows = std::vector<std::vector<double>>;

inline std::vector<double> mean(const Rows& xs) {
  std::vector<long double> acc(xs.front().size(), 0.0L);
  for (const auto& x : xs)
    for (std::size_t j = 0; j < x.size(); ++j) acc[j] += x[j];
  std::vector<double> m(acc.size());
  for (std::size_t j = 0; j < m.size(); ++j) m[j] = static_cast<double>(acc[j] / xs.size());
  return m;
}

/// Two-pass population covariance in extended precision.
inline Rows covariance(const Rows& xs) {
  const auto m = mean(xs);
  const std::size_t d = m.size();
  Rows c(d, std::vector<double>(d));
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) {
      long double s = 0.0L;
      for (const auto& x : xs) s += static_cast<long double>(x[a] - m[a]) * (x[b] - m[b]);
      c[a][b] = static_cast<double>(s / xs.size());
    }
  return c;
}

/// Gauss-Jordan inverse with partial pivoting in extended precision.
inline Rows inverse(const Rows& m) {
  const std::size_t n = m.size();
  std::vector<std::vector<long double>> a(n, std::vector<long double>(2 * n, 0.0L));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a[i][j] = m[i][j];
    a[i][n + i] = 1.0L;
  }
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    if (a[pivot][col] == 0.0L) throw std::runtime_error("oracle: singular");
    std::swap(a[col], a[pivot]);
    const long double p = a[col][col];
    for (auto& v : a[col]) v /= p;
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const long double f = a[r][col];
      for (std::size_t j = 0; j < 2 * n; ++j) a[r][j] -= f * a[col][j];
    }
  }
  Rows inv(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) inv[i][j] = static_cast<double>(a[i][n + j]);
  return inv;
}

/// Covariance plus ridge * mean diagonal on the diagonal, then inverted.
inline Rows regularized_precision(const Rows& cov, double ridge) {
  Rows r = cov;
  long double tr = 0.0L;
  for (std::size_t i = 0; i < r.size(); ++i) tr += r[i][i];
  const double shift = ridge * static_cast<double>(tr / r.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i][i] += shift;
  return inverse(r);
}

inline double quadratic(const std::vector<double>& x, const std::vector<double>& mu, const Rows& p) {
  long double s = 0.0L;
  for (std::size_t a = 0; a < x.size(); ++a)
    for (std::size_t b = 0; b < x.size(); ++b)
      s += static_cast<long double>(x[a] - mu[a]) * p[a][b] * (x[b] - mu[b]);
  return static_cast<double>(s);
}

inline std::pair<double, double> mean_and_population_sd(const std::vector<double>& v) {
  long double m = 0.0L;
  for (double x : v) m += x;
  m /= v.size();
  long double s = 0.0L;
  for (double x : v) s += (x - m) * (x - m);
  return {static_cast<double>(m), static_cast<double>(std::sqrt(s / v.size()))};
}

inline Rows to_rows(const et::Matrix& m) {
  Rows r(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) r[i][j] = m(i, j);
  return r;
}

/// max |a - b| / max |b| over all entries (Frobenius-style relative error).
inline double rel_error(const Rows& a, const Rows& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) {
      num = std::max(num, std::fabs(a[i][j] - b[i][j]));
      den = std::max(den, std::fabs(b[i][j]));
    }
  return den == 0.0 ? num : num / den;
}

inline double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  return rel_error(Rows{a}, Rows{b});
}

inline double rel_error(double a, double b) {
  return std::fabs(a - b) / std::max(std::fabs(b), 1e-300);
}

/// Correlated Gaussian samples: x = A z + b with a random A.
inline Rows correlated_samples(std::size_t n, std::size_t d, et::Rng& rng) {
  Rows a(d, std::vector<double>(d));
  std::vector<double> b(d);
  for (auto& row : a)
    for (auto& v : row) v = rng.normal();
  for (auto& v : b) v = rng.uniform(-5.0, 5.0);
  Rows xs(n, std::vector<double>(d));
  std::vector<double> z(d);
  for (auto& x : xs) {
    for (auto& v : z) v = rng.normal();
    for (std::size_t i = 0; i < d; ++i) {
      double s = b[i];
      for (std::size_t k = 0; k < d; ++k) s += a[i][k] * z[k];
      x[i] = s;
    }
  }
  return xs;
}

struct GradientCheck {
  double max_rel_error = 0.0;
  std::size_t parameters = 0;
};

/// Central finite differences of the mean batch loss against the analytic
/// gradients. Relative error is |g - fd| / max(|g|, |fd|, floor).
inline GradientCheck check_gradients(const et::Network& net, const std::vector<et::Vector>& inputs,
                                     const std::vector<std::size_t>& targets, et::Loss loss,
                                     double step = 1e-5, double floor = 1e-6) {
  const auto analytic = et::loss_and_gradients(net, inputs, targets, loss).gradients;
  et::Network probe = net;
  GradientCheck out;
  auto check = [&](double& param, double g) {
    const double saved = param;
    param = saved + step;
    const double up = et::evaluate_loss(probe, inputs, targets, loss);
    param = saved - step;
    const double down = et::evaluate_loss(probe, inputs, targets, loss);
    param = saved;
    const double fd = (up - down) / (2.0 * step);
    const double rel = std::fabs(g - fd) / std::max({std::fabs(g), std::fabs(fd), floor});
    out.max_rel_error = std::max(out.max_rel_error, rel);
    ++out.parameters;
  };
  for (std::size_t l = 0; l < probe.layer_count(); ++l) {
    auto& layer = probe.layers()[l];
    const auto& g = analytic.layers[l];
    for (std::size_t k = 0; k < layer.weights.values().size(); ++k)
      check(layer.weights.values()[k], g.weights.values()[k]);
    for (std::size_t k = 0; k < layer.bias.size(); ++k) check(layer.bias[k], g.bias[k]);
  }
  return out;
}

}  // namespace oracle
