#include "qrelu/wire.hpp"

#include <cstring>

#include "qrelu/bytes.hpp"

namespace qrelu::wire {
namespace {

constexpr char magic[4] = {'Q', 'S', 'G', '1'};
constexpr std::size_t assign_payload_bytes = 4 + 8 + 8 + 8 + 1 + 8 + 8;

void append_payload(std::vector<std::uint8_t>& out, const hello& m) {
  bytes::put_u32(out, m.worker_id);
}

void append_payload(std::vector<std::uint8_t>& out, const assign& m) {
  bytes::put_u32(out, m.worker_id);
  bytes::put_u64(out, m.shard_start);
  bytes::put_u64(out, m.shard_len);
  bytes::put_u64(out, m.d);
  bytes::put_u8(out, m.bits);
  bytes::put_u64(out, m.m_k);
  bytes::put_u64(out, m.seed);
}

void append_payload(std::vector<std::uint8_t>& out, const model& m) {
  bytes::put_u64(out, m.t);
  for (const double x : m.weights) bytes::put_f64(out, x);
}

void append_payload(std::vector<std::uint8_t>& out, const qgrad& m) {
  bytes::put_u64(out, m.t);
  bytes::put_u32(out, m.worker_id);
  out.insert(out.end(), m.payload.begin(), m.payload.end());
}

void append_payload(std::vector<std::uint8_t>&, const done&) {}

}  // namespace

std::vector<std::uint8_t> serialize(const message& msg) {
  std::vector<std::uint8_t> out;
  for (const char c : magic) out.push_back(static_cast<std::uint8_t>(c));
  out.push_back(static_cast<std::uint8_t>(msg.index()));
  bytes::put_u64(out, 0);  // length, patched below
  std::visit([&](const auto& m) { append_payload(out, m); }, msg);
  const std::uint64_t len = out.size() - frame_header_bytes;
  for (int i = 0; i < 8; ++i)
    out[5 + i] = static_cast<std::uint8_t>(len >> (8 * i));
  return out;
}

message parse(std::span<const std::uint8_t> frame) {
  if (frame.size() < frame_header_bytes)
    throw error(error::kind::truncated, "parse: truncated frame header");
  if (std::memcmp(frame.data(), magic, 4) != 0)
    throw error(error::kind::bad_magic, "parse: bad magic");
  const std::uint8_t type = frame[4];
  if (type > 4)
    throw error(error::kind::bad_type,
                "parse: unknown message type " + std::to_string(type));
  const std::uint64_t len = bytes::get_u64(frame.data() + 5);
  if (frame.size() - frame_header_bytes < len)
    throw error(error::kind::truncated, "parse: truncated payload");
  if (frame.size() - frame_header_bytes > len)
    throw error(error::kind::length_mismatch, "parse: trailing bytes after payload");
  const std::uint8_t* p = frame.data() + frame_header_bytes;

  switch (type) {
    case 0: {
      if (len != 4)
        throw error(error::kind::length_mismatch, "parse: HELLO payload must be 4 bytes");
      return hello{bytes::get_u32(p)};
    }
    case 1: {
      if (len != assign_payload_bytes)
        throw error(error::kind::length_mismatch, "parse: ASSIGN payload must be 45 bytes");
      assign m;
      m.worker_id = bytes::get_u32(p);
      m.shard_start = bytes::get_u64(p + 4);
      m.shard_len = bytes::get_u64(p + 12);
      m.d = bytes::get_u64(p + 20);
      m.bits = p[28];
      m.m_k = bytes::get_u64(p + 29);
      m.seed = bytes::get_u64(p + 37);
      return m;
    }
    case 2: {
      if (len < 8 || (len - 8) % 8 != 0)
        throw error(error::kind::length_mismatch,
                    "parse: MODEL payload must be 8 + 8*d bytes");
      model m;
      m.t = bytes::get_u64(p);
      m.weights.resize((len - 8) / 8);
      for (std::size_t i = 0; i < m.weights.size(); ++i)
        m.weights[i] = bytes::get_f64(p + 8 + 8 * i);
      return m;
    }
    case 3: {
      if (len < 12)
        throw error(error::kind::length_mismatch,
                    "parse: QGRAD payload must be at least 12 bytes");
      qgrad m;
      m.t = bytes::get_u64(p);
      m.worker_id = bytes::get_u32(p + 8);
      m.payload.assign(p + 12, p + len);
      return m;
    }
    default: {
      if (len != 0)
        throw error(error::kind::length_mismatch, "parse: DONE carries no payload");
      return done{};
    }
  }
}

}  // namespace qrelu::wire
