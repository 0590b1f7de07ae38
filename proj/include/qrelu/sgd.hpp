#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "qrelu/codec.hpp"
#include "qrelu/dataset.hpp"

namespace qrelu {

enum class eta_policy { theorem, experiment, explicit_value };

struct run_config {
  scheme sch = scheme::sgd;
  std::size_t m = 1;
  std::uint32_t workers = 1;  // K; QSGD only
  std::uint32_t bits = 7;     // b; QSGD only
  eta_policy policy = eta_policy::experiment;
  double eta_value = 0.0;     // explicit_value only
  std::size_t max_iters = 2000;
  double tol = 1e-3;
  std::uint64_t seed = 0;
  bool full_batch = false;    // m = n, sampling replaced by the full index list
  std::optional<std::vector<double>> w0;  // default start is spectral_init

  void validate(const dataset& ds) const;  // throws std::invalid_argument
};

struct trace_record {
  std::uint64_t t;
  double rel_err;
  double loss;
  std::uint64_t upstream_bytes;  // cumulative codec payload bytes
  std::uint64_t elapsed_ns;      // cumulative wall clock; not deterministic
};

struct trace {
  std::vector<trace_record> records;  // consecutive from t = 0
  std::vector<double> final_w;
  bool converged = false;
  bool diverged = false;
  double eta_published = 0.0;
  double eta_effective = 0.0;
  // upstream frame headers and t/worker_id fields, kept out of upstream_bytes
  std::uint64_t overhead_bytes = 0;
  std::uint64_t comm_ns = 0;  // blocking transport + (de)serialization time
  std::uint64_t comp_ns = 0;  // gradient + update + metric time

  std::uint64_t iterations() const { return records.empty() ? 0 : records.back().t; }
  // FNV-1a over the deterministic fields; wall-clock fields are excluded since
  // they can never replay exactly.
  std::uint64_t digest() const;
  // header: t,rel_err,loss,upstream_bytes,elapsed_ns
  void write_csv(std::ostream& out) const;
};

// Step-size and rate calculators. These return the published closed forms.
double theorem_step_size(std::size_t d, std::size_t m);
double experiment_step_size(scheme sch, std::size_t d, std::size_t m,
                            std::uint32_t b);
double theorem_rate(std::size_t d, std::size_t m);
double qsgd_rate(std::size_t d, std::size_t m, std::uint32_t s);
std::uint64_t iterations_for_accuracy(double eps, double delta2, double rate);

// Step size the run loop actually applies. The experiment schedule (m/d and
// m*b/(9d)) is calibrated for the conventional least-squares gradient, which
// is half our generalized gradient; applying it to the 2x gradient needs an
// extra 1/4 (exact in binary floating point). The theorem schedule already
// matches the 2x gradient and explicit values are applied verbatim.
double effective_step_size(const run_config& cfg, std::size_t d);

trace run_sgd(const run_config& cfg, const dataset& ds);
trace run_qsgd_local(const run_config& cfg, const dataset& ds);

struct ensemble_result {
  std::vector<std::vector<double>> finals;  // one per trial, trial order
  std::optional<std::size_t> selected;      // first majority candidate
  std::vector<double> w_hat;                // empty when selection failed
};

// First candidate (in trial order) whose closed ball of radius 2*sqrt(eps)
// contains at least ceil(L/2) of the finals, itself included. Membership is
// tested as sqdist <= 4*eps to avoid the square root.
std::optional<std::size_t> select_majority(
    const std::vector<std::vector<double>>& finals, double eps);

// L independent SGD trials of `iters` steps from one shared spectral_init
// start; trial l runs with seed derive_seed(cfg.seed, "trial", l).
ensemble_result ensemble_estimate(const run_config& cfg, const dataset& ds,
                                  std::size_t trials, std::size_t iters,
                                  double eps);

}  // namespace qrelu
