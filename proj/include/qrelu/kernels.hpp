#pragma once

// Dense double-precision kernels behind the training loops. Every variant
// (scalar, AVX2, NEON) implements one fixed reduction shape: four accumulators
// striped over i mod 4, fused multiply-adds, lanes combined as
// (acc0 + acc2) + (acc1 + acc3), then a sequential fma tail for n mod 4.
// Variants are therefore bit-identical and runtime dispatch never changes
// numerics. Equivalence is enforced by tests, not assumed.

#include <cstddef>
#include <span>
#include <vector>

namespace qrelu::kernels {

struct ops {
  const char* name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sqnorm)(const double* v, std::size_t n);
  double (*sqdist)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // dst[i] += src[i]
  void (*add)(double* dst, const double* src, std::size_t n);
  // v[i] *= alpha
  void (*scale)(double* v, std::size_t n, double alpha);
};

const ops& scalar_ops();
#if defined(QRELU_HAVE_AVX2)
const ops& avx2_ops();
#endif
#if defined(QRELU_HAVE_NEON)
const ops& neon_ops();
#endif

bool avx2_available();
bool neon_available();

// Variants compiled in and usable on this machine, scalar first.
std::vector<const ops*> supported();

// Explicit selection; name == nullptr or "" picks the best supported variant.
// Unknown or unsupported names are rejected.
const ops& select(const char* name);

// Process-wide choice, resolved once; honors QRELU_KERNEL=scalar|avx2|neon.
const ops& active();

}  // namespace qrelu::kernels

namespace qrelu {

// Thin wrappers over the active variant. Callers guarantee matching extents.
inline double dot(std::span<const double> a, std::span<const double> b) {
  return kernels::active().dot(a.data(), b.data(), a.size());
}
inline double sqnorm(std::span<const double> v) {
  return kernels::active().sqnorm(v.data(), v.size());
}
inline double sqdist(std::span<const double> a, std::span<const double> b) {
  return kernels::active().sqdist(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  kernels::active().axpy(alpha, x.data(), y.data(), y.size());
}
inline void add(std::span<double> dst, std::span<const double> src) {
  kernels::active().add(dst.data(), src.data(), dst.size());
}
inline void scale(std::span<double> v, double alpha) {
  kernels::active().scale(v.data(), v.size(), alpha);
}

}  // namespace qrelu
