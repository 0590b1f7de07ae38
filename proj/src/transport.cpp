#include "qrelu/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <condition_variable>
#include <cerrno>
#include <cstring>
#include <mutex>
#include <vector>

#include "qrelu/bytes.hpp"

namespace qrelu::transport {
namespace {

// sanity cap on frame payloads; anything larger is a corrupt stream
constexpr std::uint64_t max_payload = std::uint64_t{1} << 28;

struct channel {
  std::mutex mu;
  std::condition_variable cv;
  std::vector<std::uint8_t> buf;
  std::size_t head = 0;
  bool closed = false;

  void push(std::span<const std::uint8_t> data) {
    std::lock_guard lock{mu};
    if (closed) throw error("pipe: send on closed channel");
    buf.insert(buf.end(), data.begin(), data.end());
    cv.notify_all();
  }

  void pop_exact(std::span<std::uint8_t> out) {
    std::unique_lock lock{mu};
    cv.wait(lock, [&] { return buf.size() - head >= out.size() || closed; });
    if (buf.size() - head < out.size())
      throw error("pipe: channel closed with insufficient data");
    std::memcpy(out.data(), buf.data() + head, out.size());
    head += out.size();
    if (head > (std::size_t{1} << 20) && head * 2 > buf.size()) {
      buf.erase(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(head));
      head = 0;
    }
  }

  void close() {
    std::lock_guard lock{mu};
    closed = true;
    cv.notify_all();
  }
};

class pipe_stream final : public byte_stream {
 public:
  pipe_stream(std::shared_ptr<channel> out, std::shared_ptr<channel> in)
      : out_(std::move(out)), in_(std::move(in)) {}
  ~pipe_stream() override { close(); }

  void send(std::span<const std::uint8_t> data) override { out_->push(data); }
  void recv_exact(std::span<std::uint8_t> out) override { in_->pop_exact(out); }
  void close() override {
    out_->close();
    in_->close();
  }

 private:
  std::shared_ptr<channel> out_, in_;
};

[[noreturn]] void throw_errno(const std::string& what) {
  throw error(what + ": " + std::strerror(errno));
}

sockaddr_in make_addr(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  const std::string ip = host == "localhost" ? "127.0.0.1" : host;
  if (::inet_pton(AF_INET, ip.c_str(), &addr.sin_addr) != 1)
    throw error("tcp: bad IPv4 address '" + host + "'");
  return addr;
}

class tcp_stream final : public byte_stream {
 public:
  explicit tcp_stream(int fd) : fd_(fd) {
    const int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }
  ~tcp_stream() override {
    if (fd_ >= 0) ::close(fd_);
  }

  void send(std::span<const std::uint8_t> data) override {
    std::size_t sent = 0;
    while (sent < data.size()) {
      const ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent,
                               MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw_errno("tcp: send failed");
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  void recv_exact(std::span<std::uint8_t> out) override {
    std::size_t got = 0;
    while (got < out.size()) {
      const ssize_t n = ::recv(fd_, out.data() + got, out.size() - got, 0);
      if (n == 0) throw error("tcp: connection closed by peer");
      if (n < 0) {
        if (errno == EINTR) continue;
        throw_errno("tcp: recv failed");
      }
      got += static_cast<std::size_t>(n);
    }
  }

  // shutdown only; the fd lives until destruction so concurrent reads wake
  // instead of racing a reused descriptor
  void close() override { ::shutdown(fd_, SHUT_RDWR); }

 private:
  int fd_;
};

class tcp_listener final : public listener {
 public:
  tcp_listener(const std::string& host, std::uint16_t port) {
    sockaddr_in addr = make_addr(host, port);
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw_errno("tcp: socket failed");
    const int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
      const std::string what = "tcp: bind to " + host + ":" + std::to_string(port) +
                               " failed: " + std::strerror(errno);
      ::close(fd_);
      throw error(what);
    }
    if (::listen(fd_, 64) != 0) {
      const std::string what = std::string("tcp: listen failed: ") + std::strerror(errno);
      ::close(fd_);
      throw error(what);
    }
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
  }
  ~tcp_listener() override { ::close(fd_); }

  std::unique_ptr<byte_stream> accept() override {
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd < 0) throw_errno("tcp: accept failed");
    return std::make_unique<tcp_stream>(fd);
  }

  std::uint16_t port() const override { return port_; }

 private:
  int fd_;
  std::uint16_t port_ = 0;
};

}  // namespace

std::pair<std::unique_ptr<byte_stream>, std::unique_ptr<byte_stream>> make_pipe() {
  auto a_to_b = std::make_shared<channel>();
  auto b_to_a = std::make_shared<channel>();
  return {std::make_unique<pipe_stream>(a_to_b, b_to_a),
          std::make_unique<pipe_stream>(b_to_a, a_to_b)};
}

std::unique_ptr<listener> tcp_listen(const std::string& host, std::uint16_t port) {
  return std::make_unique<tcp_listener>(host, port);
}

std::unique_ptr<byte_stream> tcp_connect(const std::string& host,
                                         std::uint16_t port) {
  sockaddr_in addr = make_addr(host, port);
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw_errno("tcp: socket failed");
  if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    const std::string what = "tcp: connect to " + host + ":" +
                             std::to_string(port) + " failed: " +
                             std::strerror(errno);
    ::close(fd);
    throw error(what);
  }
  return std::make_unique<tcp_stream>(fd);
}

void send_message(byte_stream& s, const wire::message& msg) {
  s.send(wire::serialize(msg));
}

wire::message recv_message(byte_stream& s) {
  std::vector<std::uint8_t> frame(wire::frame_header_bytes);
  s.recv_exact(frame);
  // validate the header before trusting the length field
  if (frame[0] != 'Q' || frame[1] != 'S' || frame[2] != 'G' || frame[3] != '1')
    throw wire::error(wire::error::kind::bad_magic, "recv: bad magic");
  const std::uint64_t len = bytes::get_u64(frame.data() + 5);
  if (len > max_payload)
    throw wire::error(wire::error::kind::length_mismatch,
                      "recv: implausible payload length " + std::to_string(len));
  frame.resize(wire::frame_header_bytes + len);
  if (len > 0) s.recv_exact(std::span{frame}.subspan(wire::frame_header_bytes));
  return wire::parse(frame);
}

}  // namespace qrelu::transport
