#pragma once

// Double-precision inner loops used by the grid likelihood and the adaptor
// networks. Each kernel has a scalar reference implementation and, on x86-64,
// an AVX2+FMA implementation selected once at startup from CPUID. The
// environment variable SKETCHPRAG_SIMD=scalar forces the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace sketchprag::kernels {

enum class Isa { kScalar, kAvx2 };

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y[r] = sum_c m[r * cols + c] * x[c]
  void (*gemv)(const double* m, const double* x, double* y, std::size_t rows,
               std::size_t cols);
  // y[c] += sum_r m[r * cols + c] * x[r]
  void (*gemv_t_acc)(const double* m, const double* x, double* y,
                     std::size_t rows, std::size_t cols);
  // m[r * cols + c] += alpha * x[r] * y[c]
  void (*ger)(double alpha, const double* x, const double* y, double* m,
              std::size_t rows, std::size_t cols);
  void (*exp)(const double* x, double* out, std::size_t n);
  double (*logsumexp)(const double* x, std::size_t n);
  // log sum_k exp(a*x[k] + b*y[k] + c*z[k])
  double (*lse_affine3)(double a, const double* x, double b, const double* y,
                        double c, const double* z, std::size_t n);
  // act = z * sigmoid(z), sig = sigmoid(z)
  void (*swish)(const double* z, double* act, double* sig, std::size_t n);
};

const KernelTable& scalar_table();
// Null when the build or the CPU lacks AVX2+FMA.
const KernelTable* avx2_table();

bool cpu_has_avx2();
const KernelTable& active();
// Tests use this to run the same workload on each path.
void force_isa(Isa isa);
std::string_view isa_name(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline double logsumexp(std::span<const double> x) {
  return active().logsumexp(x.data(), x.size());
}

inline double lse_affine3(double a, std::span<const double> x, double b,
                          std::span<const double> y, double c,
                          std::span<const double> z) {
  return active().lse_affine3(a, x.data(), b, y.data(), c, z.data(), x.size());
}

}  // namespace sketchprag::kernels
