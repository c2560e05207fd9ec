#pragma once

// Data-parallel kernels behind the statistics and batch-inference paths.
//
// Each kernel has a serial reference and an OpenMP version. The parallel
// versions never split a floating-point reduction across threads: every
// output element is produced by exactly one thread with the same summation
// order as the serial code, so both return bit-identical results.

#include <cstddef>
#include <exception>
#include <mutex>
#include <span>
#include <vector>

#include "et/linalg.hpp"

namespace et::kernels {

namespace serial {

/// Population covariance by accumulating outer products sample by sample.
Matrix covariance(std::span<const Vector> samples, const Vector& mean);

void mahalanobis(std::span<const Vector> samples, const Vector& mean, const Matrix& precision,
                 std::span<double> out);

}  // namespace serial

namespace parallel {

/// Population covariance; one thread per output row of the upper triangle.
Matrix covariance(std::span<const Vector> samples, const Vector& mean);

void mahalanobis(std::span<const Vector> samples, const Vector& mean, const Matrix& precision,
                 std::span<double> out);

/// Calls fn(i) for every i in [0, n) across the OpenMP team. The first
/// exception thrown by any call is rethrown on the calling thread.
template <class Fn>
void for_each_index(std::size_t n, Fn&& fn) {
  std::exception_ptr failure;
  std::mutex guard;
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(guard);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace parallel

/// Quadratic form d^T P d for one deviation vector; shared by both paths.
double quadratic_form(std::span<const double> deviation, const Matrix& precision);

}  // namespace et::kernels
