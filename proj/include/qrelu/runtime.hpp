#pragma once

#include <memory>
#include <stdexcept>
#include <vector>

#include "qrelu/dataset.hpp"
#include "qrelu/rng.hpp"
#include "qrelu/sgd.hpp"
#include "qrelu/transport.hpp"
#include "qrelu/wire.hpp"

namespace qrelu {

// Peer violated the message protocol (wrong type, bad ids, undecodable QGRAD).
struct protocol_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct shard {
  std::uint64_t start = 0;
  std::uint64_t len = 0;
  bool operator==(const shard&) const = default;
};

// Contiguous equal shards; K must divide n.
std::vector<shard> partition(const dataset& ds, std::uint32_t K);

// One worker's compute state. Exposed separately from the connection loop so
// single rounds are testable without a transport.
struct worker_state {
  const dataset* ds;
  wire::assign cfg;
  bool full_shard;
  rng::stream sample;
  rng::stream quant;
  std::uint32_t s;
  std::uint64_t expected_t = 1;

  worker_state(const dataset& ds, const wire::assign& cfg, bool full_shard);
  wire::qgrad round(const wire::model& msg);
};

// HELLO -> ASSIGN -> (MODEL -> QGRAD)* -> DONE, from the worker side.
// full_shard must match the master's run config.
void run_worker(const dataset& ds, std::uint32_t worker_id,
                transport::byte_stream& conn, bool full_shard = false);

// Master side of the same protocol. result() holds the completed iterations
// even when run() throws (no partial rounds are ever recorded).
class master {
 public:
  master(const run_config& cfg, const dataset& ds);
  void run(std::vector<std::unique_ptr<transport::byte_stream>> conns);
  const trace& result() const { return tr_; }
  trace take() { return std::move(tr_); }

 private:
  run_config cfg_;
  const dataset& ds_;
  trace tr_;
};

trace run_master(const run_config& cfg, const dataset& ds,
                 std::vector<std::unique_ptr<transport::byte_stream>> conns);

// Full K-worker runs on this process; bit-identical to run_qsgd_local.
trace run_distributed_inproc(const run_config& cfg, const dataset& ds);
trace run_distributed_tcp(const run_config& cfg, const dataset& ds);

}  // namespace qrelu
