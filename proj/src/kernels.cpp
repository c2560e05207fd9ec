#include "et/kernels.hpp"

namespace et::kernels {

double quadratic_form(std::span<const double> deviation, const Matrix& precision) {
  const std::size_t d = deviation.size();
  double total = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const auto row = precision.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += row[j] * deviation[j];
    total += deviation[i] * acc;
  }
  return total;
}

namespace {

std::vector<double> deviations(std::span<const Vector> samples, const Vector& mean) {
  const std::size_t d = mean.size();
  std::vector<double> dev(samples.size() * d);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    for (std::size_t i = 0; i < d; ++i) dev[k * d + i] = samples[k][i] - mean[i];
  }
  return dev;
}

void mirror_and_scale(Matrix& cov, std::size_t n) {
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < cov.rows(); ++i) {
    for (std::size_t j = i; j < cov.cols(); ++j) {
      cov(i, j) *= scale;
      cov(j, i) = cov(i, j);
    }
  }
}

}  // namespace

namespace serial {

Matrix covariance(std::span<const Vector> samples, const Vector& mean) {
  const std::size_t d = mean.size();
  const auto dev = deviations(samples, mean);
  Matrix cov(d, d);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const double* x = dev.data() + k * d;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i; j < d; ++j) cov(i, j) += x[i] * x[j];
    }
  }
  mirror_and_scale(cov, samples.size());
  return cov;
}

void mahalanobis(std::span<const Vector> samples, const Vector& mean, const Matrix& precision,
                 std::span<double> out) {
  Vector dev(mean.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    for (std::size_t i = 0; i < mean.size(); ++i) dev[i] = samples[k][i] - mean[i];
    out[k] = quadratic_form(dev, precision);
  }
}

}  // namespace serial

namespace parallel {

Matrix covariance(std::span<const Vector> samples, const Vector& mean) {
  const std::size_t d = mean.size();
  const std::size_t n = samples.size();
  const auto dev = deviations(samples, mean);
  Matrix cov(d, d);
  const auto rows = static_cast<std::ptrdiff_t>(d);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t j = i; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += dev[k * d + i] * dev[k * d + j];
      cov(i, j) = acc;
    }
  }
  mirror_and_scale(cov, n);
  return cov;
}

void mahalanobis(std::span<const Vector> samples, const Vector& mean, const Matrix& precision,
                 std::span<double> out) {
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
#pragma omp parallel
  {
    Vector dev(mean.size());
#pragma omp for schedule(static)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
      const auto& x = samples[static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < mean.size(); ++i) dev[i] = x[i] - mean[i];
      out[static_cast<std::size_t>(k)] = quadratic_form(dev, precision);
    }
  }
}

}  // namespace parallel
}  // namespace et::kernels
