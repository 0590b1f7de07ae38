#pragma once

// Framed wire format: magic "QSG1", type u8, payload length u64 LE, payload.
// All integers little-endian, floats 64-bit IEEE-754 little-endian.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace qrelu::wire {

struct error : std::runtime_error {
  enum class kind { bad_magic, bad_type, truncated, length_mismatch };
  kind k;
  error(kind k, const std::string& what) : std::runtime_error(what), k(k) {}
};

struct hello {
  std::uint32_t worker_id = 0;
  bool operator==(const hello&) const = default;
};

struct assign {
  std::uint32_t worker_id = 0;
  std::uint64_t shard_start = 0;
  std::uint64_t shard_len = 0;
  std::uint64_t d = 0;
  std::uint8_t bits = 0;
  std::uint64_t m_k = 0;
  std::uint64_t seed = 0;
  bool operator==(const assign&) const = default;
};

struct model {
  std::uint64_t t = 0;
  std::vector<double> weights;
  bool operator==(const model&) const = default;
};

struct qgrad {
  std::uint64_t t = 0;
  std::uint32_t worker_id = 0;
  std::vector<std::uint8_t> payload;  // codec bytes
  bool operator==(const qgrad&) const = default;
};

struct done {
  bool operator==(const done&) const = default;
};

// variant index doubles as the wire type byte: HELLO=0x00 .. DONE=0x04
using message = std::variant<hello, assign, model, qgrad, done>;

inline constexpr std::size_t frame_header_bytes = 4 + 1 + 8;
// per-QGRAD upstream bytes that are not codec payload: frame + t + worker_id
inline constexpr std::size_t qgrad_overhead_bytes = frame_header_bytes + 8 + 4;

std::vector<std::uint8_t> serialize(const message& msg);

// Exact inverse of serialize over one complete frame.
message parse(std::span<const std::uint8_t> frame);

}  // namespace qrelu::wire
