#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace et {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double trace() const;
  Matrix transposed() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix multiply(const Matrix& a, const Matrix& b);
Vector multiply(const Matrix& a, std::span<const double> x);
double dot(std::span<const double> a, std::span<const double> b);

struct GaussianStats {
  Vector mean;
  Matrix covariance;
  Matrix precision;  // regularized inverse of covariance

  std::size_t dim() const noexcept { return mean.size(); }
  bool operator==(const GaussianStats&) const = default;
};

struct ScalarStats {
  double mu = 0.0;
  double sigma = 0.0;

  bool operator==(const ScalarStats&) const = default;
};

/// Relative ridge added before inversion, scaled by mean diagonal magnitude.
inline constexpr double kDefaultRidge = 1e-6;

/// Element-wise arithmetic mean (1/N).
Vector empirical_mean(std::span<const Vector> samples);

/// Population covariance (1/N) sum (x - mean)(x - mean)^T.
Matrix empirical_covariance(std::span<const Vector> samples, const Vector& mean);

/// Inverse of m + ridge * trace(m)/d * I via Cholesky. Result is symmetric.
Matrix regularized_inverse(const Matrix& m, double ridge = kDefaultRidge);

GaussianStats fit_gaussian(std::span<const Vector> samples, double ridge = kDefaultRidge);

/// Squared Mahalanobis distance (x - mean)^T precision (x - mean).
double mahalanobis(std::span<const double> x, const GaussianStats& stats);

std::vector<double> mahalanobis_batch(std::span<const Vector> samples, const GaussianStats& stats);

/// Mean and population standard deviation.
ScalarStats scalar_stats(std::span<const double> values);

void require_finite(std::span<const double> values, const char* what);

}  // namespace et
