#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qrelu/rng.hpp"

namespace qrelu {

// QSGD-compressed vector: entry i reconstructs to norm * signs[i] * levels[i]/s.
struct quantized_vector {
  double norm = 0.0;                 // ||v||_2
  std::uint32_t s = 0;               // level count >= 1
  std::vector<std::int8_t> signs;    // d entries in {-1, 0, +1}
  std::vector<std::uint32_t> levels; // d entries in [0, s]

  std::size_t d() const { return signs.size(); }
  bool operator==(const quantized_vector&) const = default;
};

// s = 2^(b-1) - 1: one sign bit plus b-1 magnitude bits per entry. b in [2, 32].
std::uint32_t levels_for_bits(std::uint32_t b);

// min(d/s^2, sqrt(d)/s), the variance-bound factor
double variance_factor(std::size_t d, std::uint32_t s);

// For each entry: r = |v_i| * s / ||v||, h = min(floor(r), s-1), level = h+1
// with probability r - h else h; one uniform draw per entry in index order.
// sgn(0) = 0, and level 0 forces sign 0 (canonical form, preserved by the
// codec round trip). The zero vector consumes no draws.
quantized_vector quantize(std::span<const double> v, std::uint32_t s,
                          rng::stream& g);

std::vector<double> dequantize(const quantized_vector& q);

}  // namespace qrelu
