#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>

#include "qrelu/wire.hpp"

namespace qrelu::transport {

struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Reliable, ordered, connection-oriented byte stream. close() from any thread
// unblocks a peer's pending recv with an error.
class byte_stream {
 public:
  virtual ~byte_stream() = default;
  virtual void send(std::span<const std::uint8_t> data) = 0;
  virtual void recv_exact(std::span<std::uint8_t> out) = 0;
  virtual void close() = 0;
};

// In-process channel pair; what one endpoint sends the other receives.
std::pair<std::unique_ptr<byte_stream>, std::unique_ptr<byte_stream>> make_pipe();

class listener {
 public:
  virtual ~listener() = default;
  virtual std::unique_ptr<byte_stream> accept() = 0;
  virtual std::uint16_t port() const = 0;  // useful when bound to port 0
};

std::unique_ptr<listener> tcp_listen(const std::string& host, std::uint16_t port);
std::unique_ptr<byte_stream> tcp_connect(const std::string& host, std::uint16_t port);

// One whole frame per call; recv validates and parses it.
void send_message(byte_stream& s, const wire::message& msg);
wire::message recv_message(byte_stream& s);

}  // namespace qrelu::transport
