#pragma once

#include "sketchprag/kernels.hpp"

namespace sketchprag::kernels {

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemv(const double* m, const double* x, double* y, std::size_t rows,
          std::size_t cols);
void gemv_t_acc(const double* m, const double* x, double* y, std::size_t rows,
                std::size_t cols);
void ger(double alpha, const double* x, const double* y, double* m,
         std::size_t rows, std::size_t cols);
void exp(const double* x, double* out, std::size_t n);
double logsumexp(const double* x, std::size_t n);
double lse_affine3(double a, const double* x, double b, const double* y,
                   double c, const double* z, std::size_t n);
void swish(const double* z, double* act, double* sig, std::size_t n);
}  // namespace scalar

#ifdef SKETCHPRAG_HAVE_AVX2
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemv(const double* m, const double* x, double* y, std::size_t rows,
          std::size_t cols);
void gemv_t_acc(const double* m, const double* x, double* y, std::size_t rows,
                std::size_t cols);
void ger(double alpha, const double* x, const double* y, double* m,
         std::size_t rows, std::size_t cols);
void exp(const double* x, double* out, std::size_t n);
double logsumexp(const double* x, std::size_t n);
double lse_affine3(double a, const double* x, double b, const double* y,
                   double c, const double* z, std::size_t n);
void swish(const double* z, double* act, double* sig, std::size_t n);
}  // namespace avx2
#endif

}  // namespace sketchprag::kernels
