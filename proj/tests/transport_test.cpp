// Byte stream contracts shared by the in-process pipe and loopback TCP.

#include "qrelu/transport.hpp"

#include <gtest/gtest.h>

#include <cstdint>
#include <future>
#include <numeric>
#include <thread>
#include <vector>

#include "qrelu/wire.hpp"

namespace {

using namespace qrelu;

std::vector<std::uint8_t> iota_bytes(std::size_t n) {
  std::vector<std::uint8_t> v(n);
  std::iota(v.begin(), v.end(), std::uint8_t{0});
  return v;
}

TEST(Pipe, DeliversBytesInOrder) {
  auto [a, b] = transport::make_pipe();
  const auto out = iota_bytes(64);
  a->send(out);
  std::vector<std::uint8_t> in(64);
  b->recv_exact(in);
  EXPECT_EQ(in, out);
}

TEST(Pipe, ReassemblesAcrossSendBoundaries) {
  // recv_exact sizes need not match send sizes
  auto [a, b] = transport::make_pipe();
  const auto out = iota_bytes(10);
  a->send(std::span{out}.first(3));
  a->send(std::span{out}.subspan(3, 4));
  a->send(std::span{out}.subspan(7));

  std::vector<std::uint8_t> first(6), rest(4);
  b->recv_exact(first);
  b->recv_exact(rest);
  std::vector<std::uint8_t> got = first;
  got.insert(got.end(), rest.begin(), rest.end());
  EXPECT_EQ(got, out);
}

TEST(Pipe, IsFullDuplex) {
  auto [a, b] = transport::make_pipe();
  const std::vector<std::uint8_t> ping = {1}, pong = {2};
  a->send(ping);
  b->send(pong);
  std::vector<std::uint8_t> got(1);
  b->recv_exact(got);
  EXPECT_EQ(got, ping);
  a->recv_exact(got);
  EXPECT_EQ(got, pong);
}

TEST(Pipe, CloseUnblocksPendingRecv) {
  auto [a, b] = transport::make_pipe();
  auto blocked = std::async(std::launch::async, [&] {
    std::vector<std::uint8_t> buf(4);
    EXPECT_THROW(b->recv_exact(buf), transport::error);
  });
  // give the reader a moment to block on the empty channel
  std::this_thread::sleep_for(std::chrono::milliseconds(20));
  a->close();
  blocked.get();
}

TEST(Pipe, BufferedDataDrainsAfterClose) {
  auto [a, b] = transport::make_pipe();
  const auto out = iota_bytes(8);
  a->send(out);
  a->close();

  std::vector<std::uint8_t> in(8);
  b->recv_exact(in);
  EXPECT_EQ(in, out);
  // nothing further can arrive
  std::vector<std::uint8_t> more(1);
  EXPECT_THROW(b->recv_exact(more), transport::error);
}

TEST(Pipe, SendOnClosedChannelThrows) {
  auto [a, b] = transport::make_pipe();
  a->close();
  const std::vector<std::uint8_t> data = {1, 2, 3};
  EXPECT_THROW(a->send(data), transport::error);
  EXPECT_THROW(b->send(data), transport::error);
}

TEST(Tcp, ListensOnEphemeralPortAndEchoes) {
  auto listener = transport::tcp_listen("127.0.0.1", 0);
  ASSERT_NE(listener->port(), 0);

  // backlog lets connect complete before accept runs
  auto client = transport::tcp_connect("127.0.0.1", listener->port());
  auto server = listener->accept();

  const auto out = iota_bytes(100);
  client->send(out);
  std::vector<std::uint8_t> in(100);
  server->recv_exact(in);
  EXPECT_EQ(in, out);

  server->send(in);
  std::vector<std::uint8_t> echoed(100);
  client->recv_exact(echoed);
  EXPECT_EQ(echoed, out);
}

TEST(Tcp, AcceptsLocalhostAlias) {
  auto listener = transport::tcp_listen("localhost", 0);
  auto client = transport::tcp_connect("localhost", listener->port());
  auto server = listener->accept();
  const std::vector<std::uint8_t> one = {42};
  client->send(one);
  std::vector<std::uint8_t> got(1);
  server->recv_exact(got);
  EXPECT_EQ(got, one);
}

TEST(Tcp, RejectsNonNumericHost) {
  EXPECT_THROW(transport::tcp_connect("not an address", 1), transport::error);
  EXPECT_THROW(transport::tcp_listen("256.0.0.1", 0), transport::error);
}

TEST(Tcp, ConnectToClosedPortFails) {
  std::uint16_t dead_port;
  {
    auto listener = transport::tcp_listen("127.0.0.1", 0);
    dead_port = listener->port();
  }
  EXPECT_THROW(transport::tcp_connect("127.0.0.1", dead_port),
               transport::error);
}

TEST(Tcp, PeerShutdownSurfacesAsError) {
  auto listener = transport::tcp_listen("127.0.0.1", 0);
  auto client = transport::tcp_connect("127.0.0.1", listener->port());
  auto server = listener->accept();
  client->close();
  std::vector<std::uint8_t> buf(1);
  EXPECT_THROW(server->recv_exact(buf), transport::error);
}

TEST(Tcp, StreamsLargePayloadAcrossThreads) {
  // larger than typical socket buffers, so both loops must handle partial IO
  auto listener = transport::tcp_listen("127.0.0.1", 0);
  auto client = transport::tcp_connect("127.0.0.1", listener->port());
  auto server = listener->accept();

  std::vector<std::uint8_t> out(1 << 21);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>(i * 2654435761u >> 24);

  auto sender = std::async(std::launch::async, [&] { client->send(out); });
  std::vector<std::uint8_t> in(out.size());
  server->recv_exact(in);
  sender.get();
  EXPECT_EQ(in, out);
}

TEST(Messages, RoundTripOverPipe) {
  auto [a, b] = transport::make_pipe();
  const wire::message msgs[] = {
      wire::hello{9},
      wire::model{3, {1.0, -2.5, 0.0}},
      wire::qgrad{3, 9, {0xDE, 0xAD}},
      wire::done{},
  };
  for (const auto& m : msgs) transport::send_message(*a, m);
  for (const auto& m : msgs) EXPECT_EQ(transport::recv_message(*b), m);
}

TEST(Messages, RoundTripOverTcp) {
  auto listener = transport::tcp_listen("127.0.0.1", 0);
  auto client = transport::tcp_connect("127.0.0.1", listener->port());
  auto server = listener->accept();

  const wire::message m = wire::model{7, std::vector<double>(513, 1.25)};
  transport::send_message(*client, m);
  EXPECT_EQ(transport::recv_message(*server), m);
}

TEST(Messages, RecvRejectsGarbageMagic) {
  auto [a, b] = transport::make_pipe();
  const std::vector<std::uint8_t> junk(wire::frame_header_bytes, 0x58);
  a->send(junk);
  EXPECT_THROW((void)transport::recv_message(*b), wire::error);
}

TEST(Messages, RecvRejectsImplausibleLength) {
  // a corrupt length field must fail fast instead of allocating gigabytes
  auto [a, b] = transport::make_pipe();
  std::vector<std::uint8_t> header = {'Q', 'S', 'G', '1', 0x03};
  const std::uint64_t huge = (std::uint64_t{1} << 28) + 1;
  for (int i = 0; i < 8; ++i)
    header.push_back(static_cast<std::uint8_t>(huge >> (8 * i)));
  a->send(header);
  try {
    (void)transport::recv_message(*b);
    FAIL() << "accepted a 256MiB+ payload length";
  } catch (const wire::error& e) {
    EXPECT_EQ(e.k, wire::error::kind::length_mismatch);
  }
}

TEST(Messages, RecvTruncatedPayloadThrowsOnClose) {
  auto [a, b] = transport::make_pipe();
  auto frame = wire::serialize(wire::message{wire::hello{1}});
  frame.pop_back();
  a->send(frame);
  a->close();
  EXPECT_THROW((void)transport::recv_message(*b), transport::error);
}

}  // namespace
