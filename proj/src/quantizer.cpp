#include "qrelu/quantizer.hpp"

#include <cmath>
#include <stdexcept>

#include "qrelu/kernels.hpp"

namespace qrelu {

std::uint32_t levels_for_bits(std::uint32_t b) {
  if (b < 2) throw std::invalid_argument("levels_for_bits: b must be >= 2");
  if (b > 32)
    throw std::invalid_argument("levels_for_bits: b must be <= 32 (level count overflows)");
  return (std::uint32_t{1} << (b - 1)) - 1;
}

double variance_factor(std::size_t d, std::uint32_t s) {
  if (d == 0 || s == 0)
    throw std::invalid_argument("variance_factor: d and s must be >= 1");
  const double dd = static_cast<double>(d);
  const double ds = static_cast<double>(s);
  return std::min(dd / (ds * ds), std::sqrt(dd) / ds);
}

quantized_vector quantize(std::span<const double> v, std::uint32_t s,
                          rng::stream& g) {
  if (s == 0) throw std::invalid_argument("quantize: s must be >= 1");
  if (v.empty()) throw std::invalid_argument("quantize: empty vector");
  for (const double x : v)
    if (!std::isfinite(x))
      throw std::invalid_argument("quantize: non-finite input entry");

  quantized_vector q;
  q.s = s;
  q.signs.assign(v.size(), 0);
  q.levels.assign(v.size(), 0);
  q.norm = std::sqrt(sqnorm(v));
  if (q.norm == 0.0) return q;  // all-zero, no draws

  const double sd = static_cast<double>(s);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double r = std::abs(v[i]) * sd / q.norm;
    const double h = std::min(std::floor(r), sd - 1.0);
    const double p = r - h;
    const double u = g.next_unit();  // consumed even when v[i] == 0
    const std::uint32_t level = static_cast<std::uint32_t>(h) + (u < p ? 1u : 0u);
    q.levels[i] = level;
    if (level != 0)
      q.signs[i] = v[i] > 0.0 ? std::int8_t{1} : std::int8_t{-1};
  }
  return q;
}

std::vector<double> dequantize(const quantized_vector& q) {
  std::vector<double> out(q.d());
  const double sd = static_cast<double>(q.s);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = q.norm * static_cast<double>(q.signs[i]) *
             (static_cast<double>(q.levels[i]) / sd);
  return out;
}

}  // namespace qrelu
