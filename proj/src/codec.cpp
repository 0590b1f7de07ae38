#include "qrelu/codec.hpp"

#include <limits>

#include "qrelu/bytes.hpp"

namespace qrelu {
namespace {

constexpr std::size_t header_bytes = 4 + 4 + 8;

void check_width(std::uint32_t b) {
  if (b < 2 || b > 32)
    throw std::invalid_argument("codec: bit width must be in [2, 32]");
}

// MSB-first bit writer / reader over the packed region
struct bit_writer {
  std::vector<std::uint8_t>& out;
  std::uint32_t bit = 0;  // bits used in the current byte

  void put(std::uint64_t value, std::uint32_t width) {
    for (std::uint32_t i = width; i-- > 0;) {
      if (bit == 0) out.push_back(0);
      if ((value >> i) & 1u) out.back() |= static_cast<std::uint8_t>(0x80u >> bit);
      bit = (bit + 1) & 7u;
    }
  }
};

struct bit_reader {
  const std::uint8_t* p;
  std::size_t pos = 0;  // absolute bit position

  std::uint64_t get(std::uint32_t width) {
    std::uint64_t v = 0;
    for (std::uint32_t i = 0; i < width; ++i, ++pos)
      v = (v << 1) | ((p[pos >> 3] >> (7 - (pos & 7))) & 1u);
    return v;
  }
};

}  // namespace

std::size_t encoded_size(std::size_t d, std::uint32_t b) {
  check_width(b);
  return header_bytes + (d * b + 7) / 8;
}

std::vector<std::uint8_t> encode(const quantized_vector& q, std::uint32_t b) {
  check_width(b);
  if (q.d() == 0) throw std::invalid_argument("encode: empty quantized vector");
  if (q.d() > std::numeric_limits<std::uint32_t>::max())
    throw std::invalid_argument("encode: dimension exceeds u32");
  if (q.s == 0) throw std::invalid_argument("encode: s must be >= 1");
  const std::uint32_t max_level = levels_for_bits(b);
  if (q.s > max_level)
    throw std::invalid_argument("encode: s does not fit in " + std::to_string(b) +
                                " bits");
  std::vector<std::uint8_t> out;
  out.reserve(encoded_size(q.d(), b));
  bytes::put_u32(out, static_cast<std::uint32_t>(q.d()));
  bytes::put_u32(out, q.s);
  bytes::put_f64(out, q.norm);
  bit_writer w{out};
  for (std::size_t i = 0; i < q.d(); ++i) {
    const std::uint32_t level = q.levels[i];
    if (level > max_level)
      throw std::invalid_argument("encode: level overflows " + std::to_string(b) +
                                  " bits");
    const std::uint64_t sign_bit = (q.signs[i] < 0 && level > 0) ? 1u : 0u;
    w.put((sign_bit << (b - 1)) | level, b);
  }
  return out;
}

quantized_vector decode(std::span<const std::uint8_t> bytes_in, std::uint32_t b) {
  check_width(b);
  if (bytes_in.size() < header_bytes)
    throw codec_error(codec_error::kind::truncated, "decode: truncated header");
  const std::uint32_t d = bytes::get_u32(bytes_in.data());
  const std::uint32_t s = bytes::get_u32(bytes_in.data() + 4);
  if (d == 0)
    throw codec_error(codec_error::kind::bad_dimension, "decode: zero dimension");
  if (s == 0)
    throw codec_error(codec_error::kind::bad_level_count,
                      "decode: invalid level count 0");
  const std::size_t expected = encoded_size(d, b);
  if (bytes_in.size() < expected)
    throw codec_error(codec_error::kind::truncated,
                      "decode: truncated payload, want " + std::to_string(expected) +
                          " bytes, got " + std::to_string(bytes_in.size()));
  if (bytes_in.size() > expected)
    throw codec_error(codec_error::kind::oversized,
                      "decode: oversized payload, want " + std::to_string(expected) +
                          " bytes, got " + std::to_string(bytes_in.size()));

  quantized_vector q;
  q.norm = bytes::get_f64(bytes_in.data() + 8);
  q.s = s;
  q.signs.assign(d, 0);
  q.levels.assign(d, 0);
  bit_reader r{bytes_in.data() + header_bytes};
  for (std::uint32_t i = 0; i < d; ++i) {
    const std::uint64_t field = r.get(b);
    const bool negative = (field >> (b - 1)) != 0;
    const std::uint32_t level =
        static_cast<std::uint32_t>(field & ((std::uint64_t{1} << (b - 1)) - 1));
    if (level > s)
      throw codec_error(codec_error::kind::level_overflow,
                        "decode: level " + std::to_string(level) + " exceeds s=" +
                            std::to_string(s) + " at entry " + std::to_string(i));
    if (negative && level == 0)
      throw codec_error(codec_error::kind::negative_zero,
                        "decode: sign bit set on zero level at entry " +
                            std::to_string(i));
    q.levels[i] = level;
    if (level != 0) q.signs[i] = negative ? std::int8_t{-1} : std::int8_t{1};
  }
  // bits after the last field, up to the byte boundary, must be zero
  const std::size_t total_bits = ((expected - header_bytes) * 8);
  for (std::size_t pos = static_cast<std::size_t>(d) * b; pos < total_bits; ++pos)
    if ((bytes_in[header_bytes + (pos >> 3)] >> (7 - (pos & 7))) & 1u)
      throw codec_error(codec_error::kind::bad_padding,
                        "decode: nonzero padding bits");
  return q;
}

std::uint64_t bytes_per_iteration(scheme sch, std::size_t d, std::uint32_t workers,
                                  std::uint32_t b) {
  if (sch == scheme::sgd) return std::uint64_t{workers} * d * 8;
  return std::uint64_t{workers} * encoded_size(d, b);
}

}  // namespace qrelu
