#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qrelu {

// File and format failures for dataset save/load.
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct wstar_spec {
  enum class kind { gaussian, fixed };
  kind k = kind::gaussian;
  double mean = 0.0;
  double stddev = 1.0;
  std::vector<double> values;  // kind::fixed only

  static wstar_spec gaussian(double mean, double stddev);
  static wstar_spec fixed(std::vector<double> values);
};

// Planted model: y_i = max(0, <w*, x_i>) with i.i.d. standard normal features.
struct dataset {
  std::size_t n = 0;
  std::size_t d = 0;
  std::uint64_t seed = 0;
  std::vector<double> w_star;    // d
  std::vector<double> features;  // n*d, row-major
  std::vector<double> labels;    // n

  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * d, d};
  }
};

// Draw order is fixed (w* stream first, then the feature stream row-major) so
// identical arguments give bit-identical datasets.
dataset generate_dataset(std::size_t n, std::size_t d, const wstar_spec& spec,
                         std::uint64_t seed);

// Binary format: magic "RELU", version u16 (=1), n u64, d u64, seed u64, then
// w* (d doubles), features row-major (n*d doubles), labels (n doubles), all
// little-endian IEEE-754. Writes go to a temp file renamed into place.
void save_dataset(const dataset& ds, const std::filesystem::path& path);
dataset load_dataset(const std::filesystem::path& path);

}  // namespace qrelu
