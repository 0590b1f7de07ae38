#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qrelu/dataset.hpp"
#include "qrelu/sgd.hpp"

namespace qrelu {

// Atomic file write: temp file in the target directory, then rename.
struct artifact_info {
  std::string name;     // path relative to the output directory
  std::uint64_t size = 0;
  std::uint64_t fnv = 0;  // FNV-1a of the file bytes
};
artifact_info write_artifact(const std::filesystem::path& dir,
                             const std::string& name, std::string_view content);
// Checksum an existing file (used for artifacts written by other means).
artifact_info checksum_file(const std::filesystem::path& dir,
                            const std::string& name);

enum class sweep_kind { batch_size, bits };

struct sweep_point {
  std::string label;  // "m200" or "b7"
  std::uint64_t value = 0;
  trace tr;
};

struct convergence_result {
  sweep_kind kind = sweep_kind::batch_size;
  std::vector<sweep_point> points;
  // wide CSV: t,rel_err_<label>,... ; shorter traces leave cells empty
  std::string csv() const;
};

// One run per sweep value over a shared dataset; base.m (or base.bits) is
// replaced by each value in turn. Diverged runs keep their trace and flag.
convergence_result convergence_experiment(const run_config& base,
                                          const dataset& ds, sweep_kind kind,
                                          std::span<const std::uint64_t> values);

struct phase_grid {
  std::vector<std::size_t> d_values;
  std::vector<std::size_t> n_values;
  std::size_t trials_per_cell = 10;
  std::size_t iteration_budget = 2000;
  double success_tol = 1e-3;
  scheme sch = scheme::sgd;
  std::uint32_t bits = 7;
  // batch size per cell; default is min(n, d)
  std::optional<std::size_t> m_fixed;

  void validate() const;
};

struct phase_cell {
  std::size_t d = 0;
  std::size_t n = 0;
  std::size_t trials = 0;
  std::size_t successes = 0;
  double rate() const {
    return static_cast<double>(successes) / static_cast<double>(trials);
  }
};

struct phase_result {
  phase_grid grid;
  std::vector<phase_cell> cells;  // d-major, n-minor, matching the grid lists
  // CSV: d,n,trials,successes,success_rate
  std::string csv() const;
};

// Each cell runs trials_per_cell fresh datasets and counts runs whose relative
// error drops below success_tol within the budget. Diverged or failed runs
// count as failures. Reproducible per cell from (base_seed, d, n, trial).
phase_result phase_transition(const phase_grid& grid, std::uint64_t base_seed);

// 3-point running median; endpoints keep their values.
std::vector<double> median_smooth(std::span<const double> xs);

// Smallest n in the grid whose smoothed success rate reaches the threshold.
std::optional<std::size_t> first_n_reaching(const phase_result& res,
                                            std::size_t d, double threshold);

struct timing_row {
  std::string label;
  scheme sch = scheme::sgd;
  std::size_t d = 0;
  std::uint32_t workers = 1;
  std::uint32_t bits = 7;
  const trace* tr = nullptr;
};

// CSV with one row per run: measured times and bytes, plus the raw-float64
// upstream bytes an uncompressed run of the same shape would send.
std::string timing_csv(std::span<const timing_row> rows);

// Manifest JSON: config echo, effective seed, artifact checksums.
nlohmann::json make_manifest(const nlohmann::json& config_echo,
                             std::uint64_t effective_seed,
                             std::span<const artifact_info> artifacts);

}  // namespace qrelu
