#include "qrelu/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qrelu::kernels {
namespace {

// Scalar reference. The 4-way striping mirrors one SIMD register of doubles;
// keeping the stripe and combine order identical across variants is what makes
// them bit-exact, since fma results are correctly rounded everywhere.

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0, c3 = 0.0;
  const std::size_t nv = n & ~std::size_t{3};
  for (std::size_t i = 0; i < nv; i += 4) {
    c0 = std::fma(a[i + 0], b[i + 0], c0);
    c1 = std::fma(a[i + 1], b[i + 1], c1);
    c2 = std::fma(a[i + 2], b[i + 2], c2);
    c3 = std::fma(a[i + 3], b[i + 3], c3);
  }
  double acc = (c0 + c2) + (c1 + c3);
  for (std::size_t i = nv; i < n; ++i) acc = std::fma(a[i], b[i], acc);
  return acc;
}

double sqnorm_scalar(const double* v, std::size_t n) { return dot_scalar(v, v, n); }

double sqdist_scalar(const double* a, const double* b, std::size_t n) {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0, c3 = 0.0;
  const std::size_t nv = n & ~std::size_t{3};
  for (std::size_t i = 0; i < nv; i += 4) {
    const double t0 = a[i + 0] - b[i + 0];
    const double t1 = a[i + 1] - b[i + 1];
    const double t2 = a[i + 2] - b[i + 2];
    const double t3 = a[i + 3] - b[i + 3];
    c0 = std::fma(t0, t0, c0);
    c1 = std::fma(t1, t1, c1);
    c2 = std::fma(t2, t2, c2);
    c3 = std::fma(t3, t3, c3);
  }
  double acc = (c0 + c2) + (c1 + c3);
  for (std::size_t i = nv; i < n; ++i) {
    const double t = a[i] - b[i];
    acc = std::fma(t, t, acc);
  }
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

void add_scalar(double* dst, const double* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
}

void scale_scalar(double* v, std::size_t n, double alpha) {
  for (std::size_t i = 0; i < n; ++i) v[i] *= alpha;
}

constexpr ops scalar{"scalar",     dot_scalar, sqnorm_scalar, sqdist_scalar,
                     axpy_scalar, add_scalar, scale_scalar};

}  // namespace

const ops& scalar_ops() { return scalar; }

bool avx2_available() {
#if defined(QRELU_HAVE_AVX2)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

bool neon_available() {
#if defined(QRELU_HAVE_NEON)
  return true;  // NEON is baseline on aarch64
#else
  return false;
#endif
}

std::vector<const ops*> supported() {
  std::vector<const ops*> out{&scalar};
#if defined(QRELU_HAVE_AVX2)
  if (avx2_available()) out.push_back(&avx2_ops());
#endif
#if defined(QRELU_HAVE_NEON)
  if (neon_available()) out.push_back(&neon_ops());
#endif
  return out;
}

const ops& select(const char* name) {
  if (name != nullptr && *name != '\0') {
    const std::string_view want{name};
    for (const ops* o : supported())
      if (want == o->name) return *o;
    throw std::invalid_argument("kernels: unknown or unsupported variant '" +
                                std::string(want) + "'");
  }
#if defined(QRELU_HAVE_AVX2)
  if (avx2_available()) return avx2_ops();
#endif
#if defined(QRELU_HAVE_NEON)
  if (neon_available()) return neon_ops();
#endif
  return scalar;
}

const ops& active() {
  static const ops& chosen = select(std::getenv("QRELU_KERNEL"));
  return chosen;
}

}  // namespace qrelu::kernels
