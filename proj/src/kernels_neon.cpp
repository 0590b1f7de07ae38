// NEON kernel variants for aarch64. Two 2-lane registers stand in for one
// 4-lane stripe: accA holds i mod 4 in {0,1}, accB holds {2,3}. The combine
// vaddq(accA, accB) then lane0 + lane1 reproduces (c0+c2) + (c1+c3) exactly,
// so results match the scalar and AVX2 variants bit-for-bit.

#include "qrelu/kernels.hpp"

#include <arm_neon.h>

#include <cmath>

namespace qrelu::kernels {
namespace {

double hsum(float64x2_t acc_a, float64x2_t acc_b) {
  const float64x2_t pair = vaddq_f64(acc_a, acc_b);  // (c0+c2, c1+c3)
  return vgetq_lane_f64(pair, 0) + vgetq_lane_f64(pair, 1);
}

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc_a = vdupq_n_f64(0.0), acc_b = vdupq_n_f64(0.0);
  const std::size_t nv = n & ~std::size_t{3};
  for (std::size_t i = 0; i < nv; i += 4) {
    acc_a = vfmaq_f64(acc_a, vld1q_f64(a + i), vld1q_f64(b + i));
    acc_b = vfmaq_f64(acc_b, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double total = hsum(acc_a, acc_b);
  for (std::size_t i = nv; i < n; ++i) total = std::fma(a[i], b[i], total);
  return total;
}

double sqnorm_neon(const double* v, std::size_t n) { return dot_neon(v, v, n); }

double sqdist_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc_a = vdupq_n_f64(0.0), acc_b = vdupq_n_f64(0.0);
  const std::size_t nv = n & ~std::size_t{3};
  for (std::size_t i = 0; i < nv; i += 4) {
    const float64x2_t ta = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    const float64x2_t tb = vsubq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    acc_a = vfmaq_f64(acc_a, ta, ta);
    acc_b = vfmaq_f64(acc_b, tb, tb);
  }
  double total = hsum(acc_a, acc_b);
  for (std::size_t i = nv; i < n; ++i) {
    const double t = a[i] - b[i];
    total = std::fma(t, t, total);
  }
  return total;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  const std::size_t nv = n & ~std::size_t{1};
  for (std::size_t i = 0; i < nv; i += 2)
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (std::size_t i = nv; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

void add_neon(double* dst, const double* src, std::size_t n) {
  const std::size_t nv = n & ~std::size_t{1};
  for (std::size_t i = 0; i < nv; i += 2)
    vst1q_f64(dst + i, vaddq_f64(vld1q_f64(dst + i), vld1q_f64(src + i)));
  for (std::size_t i = nv; i < n; ++i) dst[i] += src[i];
}

void scale_neon(double* v, std::size_t n, double alpha) {
  const float64x2_t va = vdupq_n_f64(alpha);
  const std::size_t nv = n & ~std::size_t{1};
  for (std::size_t i = 0; i < nv; i += 2)
    vst1q_f64(v + i, vmulq_f64(vld1q_f64(v + i), va));
  for (std::size_t i = nv; i < n; ++i) v[i] *= alpha;
}

constexpr ops neon{"neon",    dot_neon, sqnorm_neon, sqdist_neon,
                   axpy_neon, add_neon, scale_neon};

}  // namespace

const ops& neon_ops() { return neon; }

}  // namespace qrelu::kernels
