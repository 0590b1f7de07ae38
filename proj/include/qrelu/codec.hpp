#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qrelu/quantizer.hpp"

namespace qrelu {

struct codec_error : std::runtime_error {
  enum class kind {
    truncated,       // fewer bytes than the header + packed region require
    oversized,       // trailing bytes past the packed region
    bad_dimension,   // d field is 0
    bad_level_count, // s field is 0
    level_overflow,  // decoded level exceeds s
    negative_zero,   // sign bit set on a zero level
    bad_padding,     // nonzero bits after the last field
  };
  kind k;
  codec_error(kind k, const std::string& what) : std::runtime_error(what), k(k) {}
};

// 16-byte header (d u32 LE, s u32 LE, norm f64 LE) + ceil(d*b/8) packed bytes.
std::size_t encoded_size(std::size_t d, std::uint32_t b);

// Each field is b bits, MSB-first: 1 sign bit (1 = negative) then a (b-1)-bit
// level. A zero level always carries sign bit 0, so non-canonical sign values
// at level 0 encode as the canonical zero entry. Final partial byte is
// zero-padded.
std::vector<std::uint8_t> encode(const quantized_vector& q, std::uint32_t b);

// Exact inverse of encode on canonical vectors. b is the field width the
// sender packed with; the header's s alone does not pin it down (encode
// permits any b with levels_for_bits(b) >= s, and for small d the byte count
// is compatible with several widths).
quantized_vector decode(std::span<const std::uint8_t> bytes, std::uint32_t b);

enum class scheme { sgd, qsgd };

// Upstream worker->master payload bytes per iteration: K*d*8 for raw float64
// gradients, K * encoded_size(d, b) for this codec.
std::uint64_t bytes_per_iteration(scheme sch, std::size_t d, std::uint32_t workers,
                                  std::uint32_t b);

}  // namespace qrelu
