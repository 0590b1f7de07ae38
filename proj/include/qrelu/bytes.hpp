#pragma once

// Little-endian scalar packing shared by the dataset file format, the codec,
// and the wire protocol. Readers take raw pointers into a validated buffer;
// bounds checks belong to the caller.

#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

namespace qrelu::bytes {

inline constexpr std::uint64_t fnv_offset = 0xCBF29CE484222325ull;

// Chainable: pass the previous result as h to checksum in pieces.
inline std::uint64_t fnv1a64(std::span<const std::uint8_t> data,
                             std::uint64_t h = fnv_offset) {
  for (const std::uint8_t b : data) {
    h ^= b;
    h *= 0x100000001B3ull;
  }
  return h;
}

inline void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f64(std::vector<std::uint8_t>& out, double x) {
  std::uint64_t b;
  std::memcpy(&b, &x, sizeof b);
  put_u64(out, b);
}

inline std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

inline std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

inline double get_f64(const std::uint8_t* p) {
  const std::uint64_t b = get_u64(p);
  double x;
  std::memcpy(&x, &b, sizeof x);
  return x;
}

}  // namespace qrelu::bytes
