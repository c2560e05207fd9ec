#include "et/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "et/error.hpp"
#include "et/kernels.hpp"

namespace et {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) throw Error("matrix: element count does not match shape");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> values) {
  Matrix m(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
  return m;
}

double Matrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
  return t;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw Error("multiply: dimension mismatch");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

Vector multiply(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw Error("multiply: dimension mismatch");
  Vector out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) out[i] = dot(a.row(i), x);
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(std::string(what) + ": non-finite value");
  }
}

namespace {

void check_samples(std::span<const Vector> samples, std::size_t dim) {
  for (const auto& s : samples) {
    if (s.size() != dim) throw Error("dimension mismatch");
    require_finite(s, "samples");
  }
}

}  // namespace

Vector empirical_mean(std::span<const Vector> samples) {
  if (samples.empty()) throw Error("no samples");
  const std::size_t d = samples.front().size();
  check_samples(samples, d);
  Vector mean(d, 0.0);
  for (const auto& s : samples)
    for (std::size_t i = 0; i < d; ++i) mean[i] += s[i];
  const double inv = 1.0 / static_cast<double>(samples.size());
  for (double& m : mean) m *= inv;
  return mean;
}

Matrix empirical_covariance(std::span<const Vector> samples, const Vector& mean) {
  if (samples.empty()) throw Error("no samples");
  check_samples(samples, mean.size());
  require_finite(mean, "mean");
  return kernels::parallel::covariance(samples, mean);
}

Matrix regularized_inverse(const Matrix& m, double ridge) {
  if (!m.square()) throw Error("regularized_inverse: matrix not square");
  if (ridge < 0.0 || !std::isfinite(ridge)) throw Error("regularized_inverse: invalid ridge");
  require_finite(m.values(), "regularized_inverse");
  const std::size_t d = m.rows();
  if (d == 0) return {};

  double scale = 1.0;
  for (double v : m.values()) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j)
      if (std::abs(m(i, j) - m(j, i)) > 1e-9 * scale)
        throw Error("regularized_inverse: matrix not symmetric");

  Matrix a = m;
  const double shift = ridge * m.trace() / static_cast<double>(d);
  for (std::size_t i = 0; i < d; ++i) a(i, i) += shift;

  // Cholesky a = L L^T, lower triangle stored in l.
  Matrix l(d, d);
  for (std::size_t j = 0; j < d; ++j) {
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0) || !std::isfinite(diag)) throw Error("not positive definite");
    const double ljj = std::sqrt(diag);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < d; ++i) {
      double v = a(i, j);
      for (std::size_t k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
      l(i, j) = v / ljj;
    }
  }

  // Invert L column by column, then inv(a) = L^-T L^-1.
  Matrix linv(d, d);
  for (std::size_t c = 0; c < d; ++c) {
    linv(c, c) = 1.0 / l(c, c);
    for (std::size_t i = c + 1; i < d; ++i) {
      double v = 0.0;
      for (std::size_t k = c; k < i; ++k) v -= l(i, k) * linv(k, c);
      linv(i, c) = v / l(i, i);
    }
  }
  Matrix inv(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      double v = 0.0;
      for (std::size_t k = j; k < d; ++k) v += linv(k, i) * linv(k, j);
      inv(i, j) = v;
      inv(j, i) = v;
    }
  }
  require_finite(inv.values(), "regularized_inverse");
  return inv;
}

GaussianStats fit_gaussian(std::span<const Vector> samples, double ridge) {
  GaussianStats stats;
  stats.mean = empirical_mean(samples);
  stats.covariance = empirical_covariance(samples, stats.mean);
  stats.precision = regularized_inverse(stats.covariance, ridge);
  return stats;
}

double mahalanobis(std::span<const double> x, const GaussianStats& stats) {
  if (x.size() != stats.dim() || stats.precision.rows() != stats.dim())
    throw Error("mahalanobis: dimension mismatch");
  Vector dev(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) dev[i] = x[i] - stats.mean[i];
  // Rounding can push a zero distance a hair below zero.
  return std::max(0.0, kernels::quadratic_form(dev, stats.precision));
}

std::vector<double> mahalanobis_batch(std::span<const Vector> samples, const GaussianStats& stats) {
  if (stats.precision.rows() != stats.dim()) throw Error("mahalanobis: dimension mismatch");
  for (const auto& s : samples)
    if (s.size() != stats.dim()) throw Error("mahalanobis: dimension mismatch");
  std::vector<double> out(samples.size());
  kernels::parallel::mahalanobis(samples, stats.mean, stats.precision, out);
  for (double& v : out) v = std::max(0.0, v);
  return out;
}

ScalarStats scalar_stats(std::span<const double> values) {
  if (values.empty()) throw Error("no samples");
  require_finite(values, "scalar_stats");
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mu = sum / n;
  double sq = 0.0;
  for (double v : values) sq += (v - mu) * (v - mu);
  return {mu, std::sqrt(sq / n)};
}

}  // namespace et
