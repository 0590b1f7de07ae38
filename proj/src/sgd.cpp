#include "qrelu/sgd.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "qrelu/bytes.hpp"
#include "qrelu/kernels.hpp"
#include "qrelu/model.hpp"
#include "qrelu/quantizer.hpp"
#include "qrelu/rng.hpp"

namespace qrelu {
namespace {

using clock = std::chrono::steady_clock;

std::uint64_t ns_since(clock::time_point start) {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - start)
          .count());
}

void append_f64(std::vector<std::uint8_t>& buf, double x) { bytes::put_f64(buf, x); }

std::vector<double> starting_point(const run_config& cfg, const dataset& ds) {
  if (cfg.w0) {
    if (cfg.w0->size() != ds.d)
      throw std::invalid_argument("run: w0 override has wrong dimension");
    return *cfg.w0;
  }
  return spectral_init(ds);
}

void record_iteration(trace& tr, std::uint64_t t, std::span<const double> w,
                      const dataset& ds, std::uint64_t upstream,
                      clock::time_point start) {
  const double rel = rel_error(w, ds);
  const double l = loss(w, ds);
  tr.records.push_back({t, rel, l, upstream, t == 0 ? 0 : ns_since(start)});
  if (!std::isfinite(rel) || !std::isfinite(l)) tr.diverged = true;
}

}  // namespace

void run_config::validate(const dataset& ds) const {
  if (m == 0) throw std::invalid_argument("run config: m must be >= 1");
  if (max_iters == 0) throw std::invalid_argument("run config: max_iters must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("run config: tol must be > 0");
  if (policy == eta_policy::explicit_value && !(eta_value > 0.0))
    throw std::invalid_argument("run config: explicit eta must be > 0");
  if (full_batch && m != ds.n)
    throw std::invalid_argument("run config: full-batch mode requires m == n");
  if (sch == scheme::qsgd) {
    if (workers == 0) throw std::invalid_argument("run config: K must be >= 1");
    if (m % workers != 0)
      throw std::invalid_argument("run config: K must divide m");
    if (ds.n % workers != 0)
      throw std::invalid_argument("run config: K must divide n");
    levels_for_bits(bits);  // validates the range
  }
  if (w0 && w0->size() != ds.d)
    throw std::invalid_argument("run config: w0 has wrong dimension");
}

double theorem_step_size(std::size_t d, std::size_t m) {
  if (d == 0 || m == 0)
    throw std::invalid_argument("theorem_step_size: d, m must be >= 1");
  const double dm = 9.0 * static_cast<double>(d) / static_cast<double>(m);
  return 3.0 / (4.0 * (dm + 25.0 / 16.0));
}

double experiment_step_size(scheme sch, std::size_t d, std::size_t m,
                            std::uint32_t b) {
  if (d == 0 || m == 0)
    throw std::invalid_argument("experiment_step_size: d, m must be >= 1");
  if (sch == scheme::sgd)
    return static_cast<double>(m) / static_cast<double>(d);
  if (b < 2) throw std::invalid_argument("experiment_step_size: b must be >= 2");
  return static_cast<double>(m) * static_cast<double>(b) /
         (9.0 * static_cast<double>(d));
}

double theorem_rate(std::size_t d, std::size_t m) {
  if (d == 0 || m == 0)
    throw std::invalid_argument("theorem_rate: d, m must be >= 1");
  const double dm = 9.0 * static_cast<double>(d) / static_cast<double>(m);
  return 1.0 - 9.0 / (16.0 * (dm + 25.0 / 16.0));
}

double qsgd_rate(std::size_t d, std::size_t m, std::uint32_t s) {
  if (d == 0 || m == 0 || s == 0)
    throw std::invalid_argument("qsgd_rate: d, m, s must be >= 1");
  const double dm = 9.0 * static_cast<double>(d) / static_cast<double>(m);
  const double vf = variance_factor(d, s);
  return 1.0 - 9.0 / (16.0 * ((1.0 + vf) * (dm + 25.0 / 16.0) + 25.0 / 16.0));
}

std::uint64_t iterations_for_accuracy(double eps, double delta2, double rate) {
  if (!(eps > 0.0))
    throw std::invalid_argument("iterations_for_accuracy: eps must be > 0");
  if (!(delta2 > 0.0) || delta2 > 1.0)
    throw std::invalid_argument("iterations_for_accuracy: delta2 must be in (0, 1]");
  if (!(rate > 0.0) || rate >= 1.0)
    throw std::invalid_argument("iterations_for_accuracy: rate must be in (0, 1)");
  const double raw = (std::log(2.0 / eps) + std::log(1.0 / delta2)) / (1.0 - rate);
  if (raw <= 0.0) return 0;
  return static_cast<std::uint64_t>(std::ceil(raw));
}

double effective_step_size(const run_config& cfg, std::size_t d) {
  switch (cfg.policy) {
    case eta_policy::theorem:
      return theorem_step_size(d, cfg.m);
    case eta_policy::experiment:
      return 0.25 * experiment_step_size(cfg.sch, d, cfg.m, cfg.bits);
    case eta_policy::explicit_value:
      return cfg.eta_value;
  }
  throw std::logic_error("effective_step_size: unknown policy");
}

std::uint64_t trace::digest() const {
  std::vector<std::uint8_t> buf;
  buf.reserve(records.size() * 32 + final_w.size() * 8 + 2);
  for (const trace_record& r : records) {
    bytes::put_u64(buf, r.t);
    append_f64(buf, r.rel_err);
    append_f64(buf, r.loss);
    bytes::put_u64(buf, r.upstream_bytes);
  }
  for (const double x : final_w) append_f64(buf, x);
  buf.push_back(converged ? 1 : 0);
  buf.push_back(diverged ? 1 : 0);
  return bytes::fnv1a64(buf);
}

void trace::write_csv(std::ostream& out) const {
  out << "t,rel_err,loss,upstream_bytes,elapsed_ns\n";
  char num[32];
  for (const trace_record& r : records) {
    out << r.t << ',';
    std::snprintf(num, sizeof num, "%.17g", r.rel_err);
    out << num << ',';
    std::snprintf(num, sizeof num, "%.17g", r.loss);
    out << num << ',' << r.upstream_bytes << ',' << r.elapsed_ns << '\n';
  }
}

trace run_sgd(const run_config& cfg, const dataset& ds) {
  if (cfg.sch != scheme::sgd)
    throw std::invalid_argument("run_sgd: config scheme is not SGD");
  cfg.validate(ds);

  trace tr;
  tr.eta_published = cfg.policy == eta_policy::theorem
                         ? theorem_step_size(ds.d, cfg.m)
                     : cfg.policy == eta_policy::experiment
                         ? experiment_step_size(cfg.sch, ds.d, cfg.m, cfg.bits)
                         : cfg.eta_value;
  const double eta = effective_step_size(cfg, ds.d);
  tr.eta_effective = eta;

  const clock::time_point start = clock::now();
  std::vector<double> w = starting_point(cfg, ds);
  std::vector<double> g(ds.d);
  std::vector<std::size_t> idx(cfg.m);
  if (cfg.full_batch)
    for (std::size_t i = 0; i < cfg.m; ++i) idx[i] = i;
  rng::stream sample{rng::derive_seed(cfg.seed, rng::tag::sample, 0)};

  record_iteration(tr, 0, w, ds, 0, start);
  if (tr.records.back().rel_err < cfg.tol) tr.converged = true;
  for (std::uint64_t t = 1; t <= cfg.max_iters && !tr.diverged && !tr.converged;
       ++t) {
    if (!cfg.full_batch)
      for (std::size_t i = 0; i < cfg.m; ++i) idx[i] = sample.next_index(ds.n);
    minibatch_gradient(w, ds, idx, g);
    axpy(-eta, g, w);
    record_iteration(tr, t, w, ds, 0, start);
    if (tr.records.back().rel_err < cfg.tol) tr.converged = true;
  }
  tr.final_w = std::move(w);
  tr.comp_ns = ns_since(start);
  return tr;
}

trace run_qsgd_local(const run_config& cfg, const dataset& ds) {
  if (cfg.sch != scheme::qsgd)
    throw std::invalid_argument("run_qsgd_local: config scheme is not QSGD");
  cfg.validate(ds);

  const std::uint32_t K = cfg.workers;
  const std::size_t m_k = cfg.m / K;
  const std::size_t shard_len = ds.n / K;
  const std::uint32_t s = levels_for_bits(cfg.bits);
  const std::uint64_t payload_per_iter =
      bytes_per_iteration(scheme::qsgd, ds.d, K, cfg.bits);

  trace tr;
  tr.eta_published = cfg.policy == eta_policy::theorem
                         ? theorem_step_size(ds.d, cfg.m)
                     : cfg.policy == eta_policy::experiment
                         ? experiment_step_size(cfg.sch, ds.d, cfg.m, cfg.bits)
                         : cfg.eta_value;
  const double eta = effective_step_size(cfg, ds.d);
  tr.eta_effective = eta;

  const clock::time_point start = clock::now();
  std::vector<double> w = starting_point(cfg, ds);
  std::vector<double> g(ds.d), sum(ds.d);
  std::vector<std::size_t> idx(m_k);
  std::vector<rng::stream> sample, quant;
  sample.reserve(K);
  quant.reserve(K);
  for (std::uint32_t k = 0; k < K; ++k) {
    sample.emplace_back(rng::derive_seed(cfg.seed, rng::tag::sample, k));
    quant.emplace_back(rng::derive_seed(cfg.seed, rng::tag::quant, k));
  }

  std::uint64_t upstream = 0;
  record_iteration(tr, 0, w, ds, upstream, start);
  if (tr.records.back().rel_err < cfg.tol) tr.converged = true;
  for (std::uint64_t t = 1; t <= cfg.max_iters && !tr.diverged && !tr.converged;
       ++t) {
    std::fill(sum.begin(), sum.end(), 0.0);
    for (std::uint32_t k = 0; k < K; ++k) {
      const std::size_t shard_start = k * shard_len;
      if (cfg.full_batch) {
        for (std::size_t i = 0; i < m_k; ++i) idx[i] = shard_start + i;
      } else {
        for (std::size_t i = 0; i < m_k; ++i)
          idx[i] = shard_start + sample[k].next_index(shard_len);
      }
      minibatch_gradient(w, ds, idx, g);
      const quantized_vector q = quantize(g, s, quant[k]);
      const std::vector<double> deq = dequantize(q);
      add(sum, deq);
    }
    scale(sum, 1.0 / static_cast<double>(K));
    axpy(-eta, sum, w);
    upstream += payload_per_iter;
    record_iteration(tr, t, w, ds, upstream, start);
    if (tr.records.back().rel_err < cfg.tol) tr.converged = true;
  }
  tr.final_w = std::move(w);
  tr.comp_ns = ns_since(start);
  return tr;
}

std::optional<std::size_t> select_majority(
    const std::vector<std::vector<double>>& finals, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("select_majority: eps must be > 0");
  const std::size_t L = finals.size();
  const std::size_t need = (L + 1) / 2;
  for (std::size_t k = 0; k < L; ++k) {
    std::size_t inside = 0;
    for (std::size_t j = 0; j < L; ++j)
      if (sqdist(finals[j], finals[k]) <= 4.0 * eps) ++inside;
    if (inside >= need) return k;
  }
  return std::nullopt;
}

ensemble_result ensemble_estimate(const run_config& cfg, const dataset& ds,
                                  std::size_t trials, std::size_t iters,
                                  double eps) {
  if (trials == 0) throw std::invalid_argument("ensemble: L must be >= 1");
  if (iters == 0) throw std::invalid_argument("ensemble: iteration count must be >= 1");
  if (!(eps > 0.0)) throw std::invalid_argument("ensemble: eps must be > 0");

  run_config trial_cfg = cfg;
  trial_cfg.sch = scheme::sgd;
  trial_cfg.max_iters = iters;
  // trials run their full budget; tol only short-circuits exact recovery
  trial_cfg.tol = std::numeric_limits<double>::min();
  trial_cfg.w0 = starting_point(cfg, ds);

  ensemble_result res;
  res.finals.reserve(trials);
  for (std::size_t l = 0; l < trials; ++l) {
    trial_cfg.seed = rng::derive_seed(cfg.seed, rng::tag::trial, l);
    res.finals.push_back(run_sgd(trial_cfg, ds).final_w);
  }
  res.selected = select_majority(res.finals, eps);
  if (res.selected) res.w_hat = res.finals[*res.selected];
  return res;
}

}  // namespace qrelu
