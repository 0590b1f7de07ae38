#include "qrelu/runtime.hpp"

#include <chrono>
#include <exception>
#include <thread>

#include "qrelu/kernels.hpp"
#include "qrelu/model.hpp"
#include "qrelu/quantizer.hpp"

namespace qrelu {
namespace {

using clock = std::chrono::steady_clock;

std::uint64_t ns_since(clock::time_point start) {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - start)
          .count());
}

std::string worker_tag(std::uint32_t k) { return "worker " + std::to_string(k); }

}  // namespace

std::vector<shard> partition(const dataset& ds, std::uint32_t K) {
  if (K == 0) throw std::invalid_argument("partition: K must be >= 1");
  if (ds.n % K != 0)
    throw std::invalid_argument("partition: K=" + std::to_string(K) +
                                " does not divide n=" + std::to_string(ds.n));
  const std::uint64_t len = ds.n / K;
  std::vector<shard> shards(K);
  for (std::uint32_t k = 0; k < K; ++k) shards[k] = {k * len, len};
  return shards;
}

worker_state::worker_state(const dataset& ds_in, const wire::assign& cfg_in,
                           bool full_shard_in)
    : ds(&ds_in),
      cfg(cfg_in),
      full_shard(full_shard_in),
      sample(rng::derive_seed(cfg_in.seed, rng::tag::sample, cfg_in.worker_id)),
      quant(rng::derive_seed(cfg_in.seed, rng::tag::quant, cfg_in.worker_id)),
      s(levels_for_bits(cfg_in.bits)) {
  if (cfg.d != ds->d)
    throw protocol_error("worker: ASSIGN d=" + std::to_string(cfg.d) +
                         " does not match dataset d=" + std::to_string(ds->d));
  if (cfg.shard_len == 0 || cfg.shard_start + cfg.shard_len > ds->n)
    throw protocol_error("worker: ASSIGN shard out of range");
  if (cfg.m_k == 0) throw protocol_error("worker: ASSIGN m_k must be >= 1");
  if (full_shard && cfg.m_k != cfg.shard_len)
    throw protocol_error("worker: full-shard mode requires m_k == shard size");
}

wire::qgrad worker_state::round(const wire::model& msg) {
  if (msg.t != expected_t)
    throw protocol_error("worker: out-of-order MODEL t=" + std::to_string(msg.t) +
                         ", expected " + std::to_string(expected_t));
  if (msg.weights.size() != cfg.d)
    throw protocol_error("worker: MODEL weight count mismatch");
  std::vector<std::size_t> idx(cfg.m_k);
  if (full_shard) {
    for (std::uint64_t i = 0; i < cfg.m_k; ++i) idx[i] = cfg.shard_start + i;
  } else {
    for (std::uint64_t i = 0; i < cfg.m_k; ++i)
      idx[i] = cfg.shard_start + sample.next_index(cfg.shard_len);
  }
  const std::vector<double> g = minibatch_gradient(msg.weights, *ds, idx);
  const quantized_vector q = quantize(g, s, quant);
  ++expected_t;
  return wire::qgrad{msg.t, cfg.worker_id, encode(q, cfg.bits)};
}

void run_worker(const dataset& ds, std::uint32_t worker_id,
                transport::byte_stream& conn, bool full_shard) {
  send_message(conn, wire::hello{worker_id});
  wire::message first = recv_message(conn);
  const wire::assign* a = std::get_if<wire::assign>(&first);
  if (a == nullptr) throw protocol_error("worker: expected ASSIGN");
  if (a->worker_id != worker_id)
    throw protocol_error("worker: ASSIGN addressed to worker " +
                         std::to_string(a->worker_id) + ", this is worker " +
                         std::to_string(worker_id));
  worker_state st{ds, *a, full_shard};
  for (;;) {
    wire::message msg = recv_message(conn);
    if (std::holds_alternative<wire::done>(msg)) return;
    const wire::model* mo = std::get_if<wire::model>(&msg);
    if (mo == nullptr) throw protocol_error("worker: expected MODEL or DONE");
    send_message(conn, st.round(*mo));
  }
}

master::master(const run_config& cfg, const dataset& ds) : cfg_(cfg), ds_(ds) {}

void master::run(std::vector<std::unique_ptr<transport::byte_stream>> conns) {
  if (cfg_.sch != scheme::qsgd)
    throw std::invalid_argument("master: config scheme is not QSGD");
  cfg_.validate(ds_);
  const std::uint32_t K = cfg_.workers;
  if (conns.size() != K)
    throw std::invalid_argument("master: expected " + std::to_string(K) +
                                " connections, got " + std::to_string(conns.size()));
  const std::vector<shard> shards = partition(ds_, K);
  const std::uint64_t m_k = cfg_.m / K;

  tr_ = trace{};
  tr_.eta_published = cfg_.policy == eta_policy::theorem
                          ? theorem_step_size(ds_.d, cfg_.m)
                      : cfg_.policy == eta_policy::experiment
                          ? experiment_step_size(cfg_.sch, ds_.d, cfg_.m, cfg_.bits)
                          : cfg_.eta_value;
  const double eta = effective_step_size(cfg_, ds_.d);
  tr_.eta_effective = eta;

  const clock::time_point start = clock::now();

  // registration: every connection introduces itself before any assignment
  std::vector<std::unique_ptr<transport::byte_stream>> by_id(K);
  for (std::uint32_t c = 0; c < K; ++c) {
    clock::time_point t0 = clock::now();
    wire::message msg = recv_message(*conns[c]);
    tr_.comm_ns += ns_since(t0);
    const wire::hello* h = std::get_if<wire::hello>(&msg);
    if (h == nullptr) throw protocol_error("master: expected HELLO");
    if (h->worker_id >= K)
      throw protocol_error("master: HELLO worker id " +
                           std::to_string(h->worker_id) + " out of range");
    if (by_id[h->worker_id])
      throw protocol_error("master: duplicate HELLO from " +
                           worker_tag(h->worker_id));
    by_id[h->worker_id] = std::move(conns[c]);
  }
  for (std::uint32_t k = 0; k < K; ++k) {
    const wire::assign a{k,
                         shards[k].start,
                         shards[k].len,
                         ds_.d,
                         static_cast<std::uint8_t>(cfg_.bits),
                         m_k,
                         cfg_.seed};
    clock::time_point t0 = clock::now();
    send_message(*by_id[k], a);
    tr_.comm_ns += ns_since(t0);
  }

  std::vector<double> w =
      cfg_.w0 ? *cfg_.w0 : spectral_init(ds_);
  std::vector<double> sum(ds_.d);
  std::uint64_t upstream = 0;

  auto record = [&](std::uint64_t t) {
    const double rel = rel_error(w, ds_);
    const double l = loss(w, ds_);
    tr_.records.push_back({t, rel, l, upstream, t == 0 ? 0 : ns_since(start)});
    if (!std::isfinite(rel) || !std::isfinite(l)) tr_.diverged = true;
  };

  record(0);
  if (tr_.records.back().rel_err < cfg_.tol) tr_.converged = true;
  for (std::uint64_t t = 1;
       t <= cfg_.max_iters && !tr_.diverged && !tr_.converged; ++t) {
    {
      clock::time_point t0 = clock::now();
      const std::vector<std::uint8_t> frame =
          wire::serialize(wire::model{t, w});
      for (std::uint32_t k = 0; k < K; ++k) {
        try {
          by_id[k]->send(frame);
        } catch (const transport::error& e) {
          throw transport::error(worker_tag(k) + ": " + e.what());
        }
      }
      tr_.comm_ns += ns_since(t0);
    }
    std::fill(sum.begin(), sum.end(), 0.0);
    for (std::uint32_t k = 0; k < K; ++k) {
      wire::message msg;
      clock::time_point t0 = clock::now();
      try {
        msg = recv_message(*by_id[k]);
      } catch (const transport::error& e) {
        throw transport::error(worker_tag(k) + ": " + e.what());
      } catch (const wire::error& e) {
        throw protocol_error(worker_tag(k) + ": " + e.what());
      }
      const wire::qgrad* q = std::get_if<wire::qgrad>(&msg);
      if (q == nullptr)
        throw protocol_error(worker_tag(k) + ": expected QGRAD");
      if (q->worker_id != k)
        throw protocol_error(worker_tag(k) + ": QGRAD carries worker id " +
                             std::to_string(q->worker_id));
      if (q->t != t)
        throw protocol_error(worker_tag(k) + ": QGRAD for iteration " +
                             std::to_string(q->t) + ", expected " +
                             std::to_string(t));
      quantized_vector qv;
      try {
        qv = decode(q->payload, cfg_.bits);
      } catch (const codec_error& e) {
        throw protocol_error(worker_tag(k) + ": undecodable QGRAD: " + e.what());
      }
      if (qv.d() != ds_.d)
        throw protocol_error(worker_tag(k) + ": QGRAD dimension mismatch");
      const std::vector<double> deq = dequantize(qv);
      tr_.comm_ns += ns_since(t0);

      t0 = clock::now();
      add(sum, deq);
      tr_.comp_ns += ns_since(t0);
      upstream += q->payload.size();
      tr_.overhead_bytes += wire::qgrad_overhead_bytes;
    }
    clock::time_point t0 = clock::now();
    scale(sum, 1.0 / static_cast<double>(K));
    axpy(-eta, sum, w);
    record(t);
    tr_.comp_ns += ns_since(t0);
    if (tr_.records.back().rel_err < cfg_.tol) tr_.converged = true;
  }

  for (std::uint32_t k = 0; k < K; ++k) {
    clock::time_point t0 = clock::now();
    send_message(*by_id[k], wire::done{});
    by_id[k]->close();
    tr_.comm_ns += ns_since(t0);
  }
  tr_.final_w = std::move(w);
}

trace run_master(const run_config& cfg, const dataset& ds,
                 std::vector<std::unique_ptr<transport::byte_stream>> conns) {
  master m{cfg, ds};
  m.run(std::move(conns));
  return m.take();
}

namespace {

trace run_with_workers(const run_config& cfg, const dataset& ds,
                       std::vector<std::unique_ptr<transport::byte_stream>> master_side,
                       std::vector<std::unique_ptr<transport::byte_stream>> worker_side) {
  const std::uint32_t K = cfg.workers;
  std::vector<std::exception_ptr> worker_errors(K);
  std::vector<std::thread> threads;
  threads.reserve(K);
  for (std::uint32_t k = 0; k < K; ++k) {
    threads.emplace_back([&, k] {
      try {
        run_worker(ds, k, *worker_side[k], cfg.full_batch);
      } catch (...) {
        worker_errors[k] = std::current_exception();
        worker_side[k]->close();  // unblock the master instead of hanging it
      }
    });
  }

  master m{cfg, ds};
  std::exception_ptr master_error;
  try {
    m.run(std::move(master_side));
  } catch (...) {
    master_error = std::current_exception();
    // master connections are already destroyed; workers unblock on close
  }
  for (std::thread& th : threads) th.join();
  if (master_error) std::rethrow_exception(master_error);
  for (std::uint32_t k = 0; k < K; ++k)
    if (worker_errors[k]) std::rethrow_exception(worker_errors[k]);
  return m.take();
}

}  // namespace

trace run_distributed_inproc(const run_config& cfg, const dataset& ds) {
  cfg.validate(ds);
  const std::uint32_t K = cfg.workers;
  std::vector<std::unique_ptr<transport::byte_stream>> master_side, worker_side;
  for (std::uint32_t k = 0; k < K; ++k) {
    auto [a, b] = transport::make_pipe();
    master_side.push_back(std::move(a));
    worker_side.push_back(std::move(b));
  }
  return run_with_workers(cfg, ds, std::move(master_side), std::move(worker_side));
}

trace run_distributed_tcp(const run_config& cfg, const dataset& ds) {
  cfg.validate(ds);
  const std::uint32_t K = cfg.workers;
  const std::unique_ptr<transport::listener> lis =
      transport::tcp_listen("127.0.0.1", 0);
  std::vector<std::unique_ptr<transport::byte_stream>> worker_side(K);
  for (std::uint32_t k = 0; k < K; ++k)
    worker_side[k] = transport::tcp_connect("127.0.0.1", lis->port());
  std::vector<std::unique_ptr<transport::byte_stream>> master_side;
  for (std::uint32_t k = 0; k < K; ++k) master_side.push_back(lis->accept());
  return run_with_workers(cfg, ds, std::move(master_side), std::move(worker_side));
}

}  // namespace qrelu
