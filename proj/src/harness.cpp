#include "qrelu/harness.hpp"

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "qrelu/bytes.hpp"
#include "qrelu/rng.hpp"

namespace qrelu {
namespace {

std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt_seconds(std::uint64_t ns) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", static_cast<double>(ns) * 1e-9);
  return buf;
}

}  // namespace

artifact_info write_artifact(const std::filesystem::path& dir,
                             const std::string& name, std::string_view content) {
  const std::filesystem::path path = dir / name;
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp =
      path.string() + ".tmp-" + std::to_string(static_cast<long>(::getpid()));
  {
    std::ofstream out{tmp, std::ios::binary | std::ios::trunc};
    if (!out) throw io_error("write_artifact: cannot open " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
      std::filesystem::remove(tmp);
      throw io_error("write_artifact: write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw io_error("write_artifact: rename to " + path.string() + " failed: " +
                   ec.message());
  }
  artifact_info info;
  info.name = name;
  info.size = content.size();
  info.fnv = bytes::fnv1a64(
      {reinterpret_cast<const std::uint8_t*>(content.data()), content.size()});
  return info;
}

artifact_info checksum_file(const std::filesystem::path& dir,
                            const std::string& name) {
  const std::filesystem::path path = dir / name;
  std::ifstream in{path, std::ios::binary};
  if (!in) throw io_error("checksum_file: cannot open " + path.string());
  artifact_info info;
  info.name = name;
  info.fnv = bytes::fnv_offset;
  std::vector<std::uint8_t> buf(1 << 16);
  for (;;) {
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
    const std::size_t got = static_cast<std::size_t>(in.gcount());
    if (got == 0) break;
    info.fnv = bytes::fnv1a64({buf.data(), got}, info.fnv);
    info.size += got;
  }
  return info;
}

std::string convergence_result::csv() const {
  std::ostringstream out;
  out << 't';
  for (const sweep_point& p : points) out << ",rel_err_" << p.label;
  out << '\n';
  std::size_t rows = 0;
  for (const sweep_point& p : points)
    rows = std::max(rows, p.tr.records.size());
  for (std::size_t r = 0; r < rows; ++r) {
    out << r;
    for (const sweep_point& p : points) {
      out << ',';
      if (r < p.tr.records.size()) out << fmt_double(p.tr.records[r].rel_err);
    }
    out << '\n';
  }
  return out.str();
}

convergence_result convergence_experiment(const run_config& base,
                                          const dataset& ds, sweep_kind kind,
                                          std::span<const std::uint64_t> values) {
  if (values.empty())
    throw std::invalid_argument("convergence_experiment: empty sweep");
  convergence_result res;
  res.kind = kind;
  for (const std::uint64_t v : values) {
    run_config cfg = base;
    sweep_point p;
    p.value = v;
    if (kind == sweep_kind::batch_size) {
      cfg.m = v;
      p.label = "m" + std::to_string(v);
    } else {
      cfg.bits = static_cast<std::uint32_t>(v);
      p.label = "b" + std::to_string(v);
    }
    p.tr = cfg.sch == scheme::sgd ? run_sgd(cfg, ds) : run_qsgd_local(cfg, ds);
    res.points.push_back(std::move(p));
  }
  return res;
}

void phase_grid::validate() const {
  if (d_values.empty() || n_values.empty())
    throw std::invalid_argument("phase grid: d_values and n_values must be nonempty");
  for (const std::size_t d : d_values)
    if (d == 0) throw std::invalid_argument("phase grid: d must be >= 1");
  for (const std::size_t n : n_values)
    if (n == 0) throw std::invalid_argument("phase grid: n must be >= 1");
  if (trials_per_cell == 0)
    throw std::invalid_argument("phase grid: trials_per_cell must be >= 1");
  if (iteration_budget == 0)
    throw std::invalid_argument("phase grid: iteration_budget must be >= 1");
  if (!(success_tol > 0.0))
    throw std::invalid_argument("phase grid: success_tol must be > 0");
  if (m_fixed && *m_fixed == 0)
    throw std::invalid_argument("phase grid: fixed m must be >= 1");
}

std::string phase_result::csv() const {
  std::ostringstream out;
  out << "d,n,trials,successes,success_rate\n";
  for (const phase_cell& c : cells)
    out << c.d << ',' << c.n << ',' << c.trials << ',' << c.successes << ','
        << fmt_double(c.rate()) << '\n';
  return out.str();
}

phase_result phase_transition(const phase_grid& grid, std::uint64_t base_seed) {
  grid.validate();
  phase_result res;
  res.grid = grid;
  for (const std::size_t d : grid.d_values) {
    const std::uint64_t d_seed = rng::derive_seed(base_seed, "phase-d", d);
    for (const std::size_t n : grid.n_values) {
      const std::uint64_t n_seed = rng::derive_seed(d_seed, "phase-n", n);
      phase_cell cell;
      cell.d = d;
      cell.n = n;
      cell.trials = grid.trials_per_cell;
      std::size_t m = grid.m_fixed.value_or(std::min(n, d));
      if (grid.sch == scheme::qsgd && m == 0) m = 1;
      for (std::size_t trial = 0; trial < grid.trials_per_cell; ++trial) {
        const std::uint64_t trial_seed =
            rng::derive_seed(n_seed, rng::tag::trial, trial);
        try {
          const dataset ds = generate_dataset(
              n, d, wstar_spec::gaussian(0.0, 1.0),
              rng::derive_seed(trial_seed, "dataset"));
          run_config cfg;
          cfg.sch = grid.sch;
          cfg.m = m;
          cfg.workers = 1;
          cfg.bits = grid.bits;
          cfg.policy = eta_policy::experiment;
          cfg.max_iters = grid.iteration_budget;
          cfg.tol = grid.success_tol;
          cfg.seed = rng::derive_seed(trial_seed, "run");
          const trace tr = cfg.sch == scheme::sgd ? run_sgd(cfg, ds)
                                                  : run_qsgd_local(cfg, ds);
          if (tr.converged) ++cell.successes;
        } catch (const std::exception&) {
          // a failed trial is simply not a success
        }
      }
      res.cells.push_back(cell);
    }
  }
  return res;
}

std::vector<double> median_smooth(std::span<const double> xs) {
  std::vector<double> out(xs.begin(), xs.end());
  for (std::size_t i = 1; i + 1 < xs.size(); ++i) {
    const double a = xs[i - 1], b = xs[i], c = xs[i + 1];
    // middle element by comparison; arithmetic shortcuts would round
    out[i] = std::max(std::min(a, b), std::min(std::max(a, b), c));
  }
  return out;
}

std::optional<std::size_t> first_n_reaching(const phase_result& res,
                                            std::size_t d, double threshold) {
  std::vector<double> rates;
  std::vector<std::size_t> ns;
  for (const phase_cell& c : res.cells)
    if (c.d == d) {
      rates.push_back(c.rate());
      ns.push_back(c.n);
    }
  const std::vector<double> smooth = median_smooth(rates);
  for (std::size_t i = 0; i < smooth.size(); ++i)
    if (smooth[i] >= threshold) return ns[i];
  return std::nullopt;
}

std::string timing_csv(std::span<const timing_row> rows) {
  std::ostringstream out;
  out << "label,scheme,workers,bits,iterations,comm_time_s,comp_time_s,"
         "total_time_s,total_bytes,overhead_bytes,raw_sgd_bytes\n";
  for (const timing_row& r : rows) {
    const trace& tr = *r.tr;
    const std::uint64_t total_ns =
        tr.records.empty() ? 0 : tr.records.back().elapsed_ns;
    const std::uint64_t raw =
        bytes_per_iteration(scheme::sgd, r.d, r.workers, r.bits) *
        tr.iterations();
    out << r.label << ',' << (r.sch == scheme::sgd ? "sgd" : "qsgd") << ','
        << r.workers << ',' << r.bits << ',' << tr.iterations() << ','
        << fmt_seconds(tr.comm_ns) << ',' << fmt_seconds(tr.comp_ns) << ','
        << fmt_seconds(total_ns) << ','
        << (tr.records.empty() ? 0 : tr.records.back().upstream_bytes) << ','
        << tr.overhead_bytes << ',' << raw << '\n';
  }
  return out.str();
}

nlohmann::json make_manifest(const nlohmann::json& config_echo,
                             std::uint64_t effective_seed,
                             std::span<const artifact_info> artifacts) {
  nlohmann::json arts = nlohmann::json::array();
  for (const artifact_info& a : artifacts) {
    char hex[24];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(a.fnv));
    arts.push_back({{"path", a.name}, {"bytes", a.size}, {"fnv1a64", hex}});
  }
  return nlohmann::json{{"config", config_echo},
                        {"effective_seed", effective_seed},
                        {"artifacts", arts}};
}

}  // namespace qrelu
