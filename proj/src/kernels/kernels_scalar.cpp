// Reference implementations. These define the numerics every SIMD variant is
// tested against.

#include <algorithm>
#include <cmath>
#include <limits>

#include "kernels_internal.hpp"

namespace sketchprag::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv(const double* m, const double* x, double* y, std::size_t rows,
          std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot(m + r * cols, x, cols);
}

void gemv_t_acc(const double* m, const double* x, double* y, std::size_t rows,
                std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy(x[r], m + r * cols, y, cols);
}

void ger(double alpha, const double* x, const double* y, double* m,
         std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    axpy(alpha * x[r], y, m + r * cols, cols);
  }
}

void exp(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}

double logsumexp(const double* x, std::size_t n) {
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) hi = std::max(hi, x[i]);
  if (!std::isfinite(hi)) return hi;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::exp(x[i] - hi);
  return hi + std::log(sum);
}

double lse_affine3(double a, const double* x, double b, const double* y,
                   double c, const double* z, std::size_t n) {
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    hi = std::max(hi, a * x[i] + b * y[i] + c * z[i]);
  }
  if (!std::isfinite(hi)) return hi;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += std::exp(a * x[i] + b * y[i] + c * z[i] - hi);
  }
  return hi + std::log(sum);
}

void swish(const double* z, double* act, double* sig, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double s = 1.0 / (1.0 + std::exp(-z[i]));
    sig[i] = s;
    act[i] = z[i] * s;
  }
}

}  // namespace sketchprag::kernels::scalar
