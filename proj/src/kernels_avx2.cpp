// AVX2/FMA kernel variants. Vector lane j holds the indices with i mod 4 == j,
// matching the scalar stripes; the horizontal combine is
// (lane0 + lane2) + (lane1 + lane3), then the tail runs scalar fma in index
// order. This file is compiled with -mavx2 -mfma and only reached through
// dispatch after a cpuid check.

#include "qrelu/kernels.hpp"

#include <immintrin.h>

#include <cmath>

namespace qrelu::kernels {
namespace {

double hsum(__m256d acc) {
  const __m128d lo = _mm256_castpd256_pd128(acc);     // lanes 0,1
  const __m128d hi = _mm256_extractf128_pd(acc, 1);   // lanes 2,3
  const __m128d pair = _mm_add_pd(lo, hi);            // (l0+l2, l1+l3)
  return _mm_cvtsd_f64(pair) + _mm_cvtsd_f64(_mm_unpackhi_pd(pair, pair));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t nv = n & ~std::size_t{3};
  for (std::size_t i = 0; i < nv; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  double total = hsum(acc);
  for (std::size_t i = nv; i < n; ++i) total = std::fma(a[i], b[i], total);
  return total;
}

double sqnorm_avx2(const double* v, std::size_t n) { return dot_avx2(v, v, n); }

double sqdist_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t nv = n & ~std::size_t{3};
  for (std::size_t i = 0; i < nv; i += 4) {
    const __m256d t = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(t, t, acc);
  }
  double total = hsum(acc);
  for (std::size_t i = nv; i < n; ++i) {
    const double t = a[i] - b[i];
    total = std::fma(t, t, total);
  }
  return total;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  const std::size_t nv = n & ~std::size_t{3};
  for (std::size_t i = 0; i < nv; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  for (std::size_t i = nv; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

void add_avx2(double* dst, const double* src, std::size_t n) {
  const std::size_t nv = n & ~std::size_t{3};
  for (std::size_t i = 0; i < nv; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(dst + i),
                                            _mm256_loadu_pd(src + i)));
  for (std::size_t i = nv; i < n; ++i) dst[i] += src[i];
}

void scale_avx2(double* v, std::size_t n, double alpha) {
  const __m256d va = _mm256_set1_pd(alpha);
  const std::size_t nv = n & ~std::size_t{3};
  for (std::size_t i = 0; i < nv; i += 4)
    _mm256_storeu_pd(v + i, _mm256_mul_pd(_mm256_loadu_pd(v + i), va));
  for (std::size_t i = nv; i < n; ++i) v[i] *= alpha;
}

constexpr ops avx2{"avx2",    dot_avx2, sqnorm_avx2, sqdist_avx2,
                   axpy_avx2, add_avx2, scale_avx2};

}  // namespace

const ops& avx2_ops() { return avx2; }

}  // namespace qrelu::kernels
