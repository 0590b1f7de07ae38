#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "qrelu/dataset.hpp"
#include "qrelu/harness.hpp"
#include "qrelu/sgd.hpp"

namespace qrelu {

struct dataset_section {
  std::size_t n = 0;
  std::size_t d = 0;
  std::optional<std::string> path;  // relative to the output directory
  wstar_spec w_star = wstar_spec::gaussian(0.0, 1.0);
};

struct sweep_section {
  sweep_kind kind = sweep_kind::batch_size;
  std::vector<std::uint64_t> values;
};

struct ensemble_section {
  std::size_t trials = 0;
  std::size_t iterations = 0;
  double eps = 0.0;
};

struct endpoint {
  std::string host;
  std::uint16_t port = 0;
};

struct transport_section {
  std::optional<endpoint> listen;   // dist-master
  std::optional<endpoint> connect;  // dist-worker
};

// Parsed configuration file. Sections are optional here; each subcommand
// checks for the ones it needs. Unknown keys anywhere are an error.
struct cli_config {
  std::uint64_t seed = 0;
  std::optional<dataset_section> data;
  std::optional<run_config> run;
  std::optional<sweep_section> sweep;
  std::optional<phase_grid> phase;
  std::optional<ensemble_section> ensemble;
  std::optional<transport_section> transport;
  nlohmann::json echo;  // the raw document, echoed into manifests
};

// "host:port" with a numeric port in [0, 65535].
endpoint parse_endpoint(const std::string& text);

// Throws std::invalid_argument naming the offending key or value.
cli_config parse_config(const std::string& json_text);
cli_config load_config(const std::filesystem::path& path);

}  // namespace qrelu
