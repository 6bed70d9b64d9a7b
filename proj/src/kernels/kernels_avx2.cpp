// AVX2+FMA variants. This translation unit is the only one built with
// -mavx2 -mfma; callers reach it through the dispatch table after a CPUID
// check, never directly.

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "kernels_internal.hpp"

namespace sketchprag::kernels::avx2 {

namespace {

constexpr std::size_t kWidth = 4;

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

inline double hmax(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_max_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_max_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

// exp(x) by Cody-Waite reduction x = n ln2 + r, |r| <= ln2/2, and a degree-13
// Taylor polynomial for e^r (truncation error below 1e-17 relative).
inline __m256d exp_pd(__m256d x) {
  const __m256d kMax = _mm256_set1_pd(709.0);
  const __m256d kMin = _mm256_set1_pd(-708.0);
  const __m256d kLog2e = _mm256_set1_pd(1.4426950408889634074);
  const __m256d kLn2Hi = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d kLn2Lo = _mm256_set1_pd(1.42860682030941723212e-6);
  const __m256d kMagic = _mm256_set1_pd(0x1.8p52);

  const __m256d over = _mm256_cmp_pd(x, kMax, _CMP_GT_OQ);
  const __m256d under = _mm256_cmp_pd(x, kMin, _CMP_LT_OQ);
  const __m256d nan = _mm256_cmp_pd(x, x, _CMP_UNORD_Q);
  const __m256d xc = _mm256_max_pd(_mm256_min_pd(x, kMax), kMin);

  const __m256d n = _mm256_round_pd(_mm256_mul_pd(xc, kLog2e),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, kLn2Hi, xc);
  r = _mm256_fnmadd_pd(n, kLn2Lo, r);

  static constexpr double kCoeff[] = {
      1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0,
      1.0 / 3628800.0,    1.0 / 362880.0,    1.0 / 40320.0,
      1.0 / 5040.0,       1.0 / 720.0,       1.0 / 120.0,
      1.0 / 24.0,         1.0 / 6.0,         0.5,
      1.0,                1.0};
  __m256d p = _mm256_set1_pd(kCoeff[0]);
  for (std::size_t k = 1; k < std::size(kCoeff); ++k) {
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kCoeff[k]));
  }

  const __m256i ni = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(n, kMagic)),
                                      _mm256_castpd_si256(kMagic));
  const __m256i bits =
      _mm256_slli_epi64(_mm256_add_epi64(ni, _mm256_set1_epi64x(1023)), 52);
  __m256d result = _mm256_mul_pd(p, _mm256_castsi256_pd(bits));

  result = _mm256_blendv_pd(result, _mm256_setzero_pd(), under);
  result = _mm256_blendv_pd(
      result, _mm256_set1_pd(std::numeric_limits<double>::infinity()), over);
  result = _mm256_blendv_pd(result, x, nan);
  return result;
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 * kWidth <= n; i += 2 * kWidth) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + kWidth),
                           _mm256_loadu_pd(b + i + kWidth), acc1);
  }
  for (; i + kWidth <= n; i += kWidth) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double sum = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + kWidth <= n; i += kWidth) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
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
  std::size_t i = 0;
  for (; i + kWidth <= n; i += kWidth) {
    _mm256_storeu_pd(out + i, exp_pd(_mm256_loadu_pd(x + i)));
  }
  if (i < n) {
    alignas(32) double buf[kWidth] = {0.0, 0.0, 0.0, 0.0};
    std::copy(x + i, x + n, buf);
    alignas(32) double res[kWidth];
    _mm256_store_pd(res, exp_pd(_mm256_load_pd(buf)));
    std::copy(res, res + (n - i), out + i);
  }
}

double logsumexp(const double* x, std::size_t n) {
  const double neg_inf = -std::numeric_limits<double>::infinity();
  __m256d vmax = _mm256_set1_pd(neg_inf);
  std::size_t i = 0;
  for (; i + kWidth <= n; i += kWidth) vmax = _mm256_max_pd(vmax, _mm256_loadu_pd(x + i));
  double hi = hmax(vmax);
  for (; i < n; ++i) hi = std::max(hi, x[i]);
  if (!std::isfinite(hi)) return hi;

  const __m256d vhi = _mm256_set1_pd(hi);
  __m256d acc = _mm256_setzero_pd();
  i = 0;
  for (; i + kWidth <= n; i += kWidth) {
    acc = _mm256_add_pd(acc, exp_pd(_mm256_sub_pd(_mm256_loadu_pd(x + i), vhi)));
  }
  double sum = hsum(acc);
  for (; i < n; ++i) sum += std::exp(x[i] - hi);
  return hi + std::log(sum);
}

double lse_affine3(double a, const double* x, double b, const double* y,
                   double c, const double* z, std::size_t n) {
  constexpr std::size_t kStack = 256;
  alignas(32) double stack_buf[kStack];
  // Larger candidate sets are rare; fall back to two passes without a buffer.
  double* u = n <= kStack ? stack_buf : nullptr;

  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  const __m256d vc = _mm256_set1_pd(c);
  const double neg_inf = -std::numeric_limits<double>::infinity();
  __m256d vmax = _mm256_set1_pd(neg_inf);
  std::size_t i = 0;
  for (; i + kWidth <= n; i += kWidth) {
    __m256d v = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    v = _mm256_add_pd(v, _mm256_mul_pd(vb, _mm256_loadu_pd(y + i)));
    v = _mm256_add_pd(v, _mm256_mul_pd(vc, _mm256_loadu_pd(z + i)));
    if (u != nullptr) _mm256_store_pd(u + i, v);
    vmax = _mm256_max_pd(vmax, v);
  }
  double hi = hmax(vmax);
  const std::size_t tail = i;
  for (; i < n; ++i) {
    const double v = a * x[i] + b * y[i] + c * z[i];
    if (u != nullptr) u[i] = v;
    hi = std::max(hi, v);
  }
  if (!std::isfinite(hi)) return hi;

  const __m256d vhi = _mm256_set1_pd(hi);
  __m256d acc = _mm256_setzero_pd();
  double sum = 0.0;
  if (u != nullptr) {
    for (i = 0; i < tail; i += kWidth) {
      acc = _mm256_add_pd(acc, exp_pd(_mm256_sub_pd(_mm256_load_pd(u + i), vhi)));
    }
    sum = hsum(acc);
    for (i = tail; i < n; ++i) sum += std::exp(u[i] - hi);
  } else {
    for (i = 0; i < tail; i += kWidth) {
      __m256d v = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
      v = _mm256_add_pd(v, _mm256_mul_pd(vb, _mm256_loadu_pd(y + i)));
      v = _mm256_add_pd(v, _mm256_mul_pd(vc, _mm256_loadu_pd(z + i)));
      acc = _mm256_add_pd(acc, exp_pd(_mm256_sub_pd(v, vhi)));
    }
    sum = hsum(acc);
    for (i = tail; i < n; ++i) sum += std::exp(a * x[i] + b * y[i] + c * z[i] - hi);
  }
  return hi + std::log(sum);
}

void swish(const double* z, double* act, double* sig, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d sign = _mm256_set1_pd(-0.0);
  std::size_t i = 0;
  for (; i + kWidth <= n; i += kWidth) {
    const __m256d vz = _mm256_loadu_pd(z + i);
    const __m256d e = exp_pd(_mm256_xor_pd(vz, sign));
    const __m256d s = _mm256_div_pd(one, _mm256_add_pd(one, e));
    _mm256_storeu_pd(sig + i, s);
    _mm256_storeu_pd(act + i, _mm256_mul_pd(vz, s));
  }
  for (; i < n; ++i) {
    const double s = 1.0 / (1.0 + std::exp(-z[i]));
    sig[i] = s;
    act[i] = z[i] * s;
  }
}

}  // namespace sketchprag::kernels::avx2
