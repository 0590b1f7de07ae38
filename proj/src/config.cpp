#include "qrelu/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace qrelu {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& what) {
  throw std::invalid_argument("config: " + what);
}

// Every object walk goes through here so unknown keys are always rejected.
void check_keys(const json& obj, const char* section,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool known = false;
    for (const char* a : allowed)
      if (key == a) {
        known = true;
        break;
      }
    if (!known)
      fail("unknown key \"" + key + "\" in \"" + section + "\"");
  }
}

std::uint64_t get_count(const json& obj, const char* section, const char* key,
                        std::uint64_t min_value) {
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.is_number_float())
    fail(std::string(section) + "." + key + " must be an integer");
  if (v.is_number_integer() && !v.is_number_unsigned())
    fail(std::string(section) + "." + key + " must be non-negative");
  const std::uint64_t x = v.get<std::uint64_t>();
  if (x < min_value)
    fail(std::string(section) + "." + key + " must be >= " +
         std::to_string(min_value));
  return x;
}

double get_positive(const json& obj, const char* section, const char* key) {
  const json& v = obj.at(key);
  if (!v.is_number()) fail(std::string(section) + "." + key + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x) || !(x > 0.0))
    fail(std::string(section) + "." + key + " must be finite and > 0");
  return x;
}

wstar_spec parse_wstar(const json& obj) {
  check_keys(obj, "dataset.w_star", {"kind", "mean", "stddev", "values"});
  const std::string kind = obj.at("kind").get<std::string>();
  if (kind == "gaussian") {
    if (obj.contains("values")) fail("dataset.w_star: gaussian takes no values");
    double mean = 0.0, stddev = 1.0;
    if (obj.contains("mean")) mean = obj.at("mean").get<double>();
    if (obj.contains("stddev")) {
      stddev = obj.at("stddev").get<double>();
      if (!std::isfinite(stddev) || stddev < 0.0)
        fail("dataset.w_star.stddev must be finite and >= 0");
    }
    if (!std::isfinite(mean)) fail("dataset.w_star.mean must be finite");
    return wstar_spec::gaussian(mean, stddev);
  }
  if (kind == "fixed") {
    if (obj.contains("mean") || obj.contains("stddev"))
      fail("dataset.w_star: fixed takes only values");
    if (!obj.contains("values") || !obj.at("values").is_array())
      fail("dataset.w_star.values must be an array");
    std::vector<double> values;
    for (const json& v : obj.at("values")) {
      if (!v.is_number()) fail("dataset.w_star.values must be numeric");
      const double x = v.get<double>();
      if (!std::isfinite(x)) fail("dataset.w_star.values must be finite");
      values.push_back(x);
    }
    return wstar_spec::fixed(std::move(values));
  }
  fail("dataset.w_star.kind must be \"gaussian\" or \"fixed\"");
}

dataset_section parse_dataset(const json& obj) {
  check_keys(obj, "dataset", {"n", "d", "path", "w_star"});
  dataset_section out;
  out.n = get_count(obj, "dataset", "n", 1);
  out.d = get_count(obj, "dataset", "d", 1);
  if (obj.contains("path")) {
    out.path = obj.at("path").get<std::string>();
    if (out.path->empty()) fail("dataset.path must be nonempty");
  }
  if (obj.contains("w_star")) out.w_star = parse_wstar(obj.at("w_star"));
  return out;
}

scheme parse_scheme(const json& v, const char* where) {
  const std::string s = v.get<std::string>();
  if (s == "sgd") return scheme::sgd;
  if (s == "qsgd") return scheme::qsgd;
  fail(std::string(where) + " must be \"sgd\" or \"qsgd\"");
}

run_config parse_run(const json& obj) {
  check_keys(obj, "run",
             {"scheme", "batch_size", "workers", "bits", "eta", "max_iters",
              "tol", "full_batch"});
  run_config cfg;
  if (obj.contains("scheme")) cfg.sch = parse_scheme(obj.at("scheme"), "run.scheme");
  cfg.m = get_count(obj, "run", "batch_size", 1);
  if (obj.contains("workers"))
    cfg.workers = static_cast<std::uint32_t>(get_count(obj, "run", "workers", 1));
  if (obj.contains("bits"))
    cfg.bits = static_cast<std::uint32_t>(get_count(obj, "run", "bits", 2));
  if (obj.contains("eta")) {
    const json& e = obj.at("eta");
    if (e.is_string()) {
      const std::string s = e.get<std::string>();
      if (s == "theorem")
        cfg.policy = eta_policy::theorem;
      else if (s == "experiment")
        cfg.policy = eta_policy::experiment;
      else
        fail("run.eta must be \"theorem\", \"experiment\", or a number");
    } else if (e.is_number()) {
      cfg.policy = eta_policy::explicit_value;
      cfg.eta_value = e.get<double>();
      if (!std::isfinite(cfg.eta_value) || !(cfg.eta_value > 0.0))
        fail("run.eta must be finite and > 0");
    } else {
      fail("run.eta must be \"theorem\", \"experiment\", or a number");
    }
  }
  if (obj.contains("max_iters"))
    cfg.max_iters = get_count(obj, "run", "max_iters", 1);
  if (obj.contains("tol")) cfg.tol = get_positive(obj, "run", "tol");
  if (obj.contains("full_batch")) {
    if (!obj.at("full_batch").is_boolean()) fail("run.full_batch must be a bool");
    cfg.full_batch = obj.at("full_batch").get<bool>();
  }
  return cfg;
}

sweep_section parse_sweep(const json& obj) {
  check_keys(obj, "sweep", {"kind", "values"});
  sweep_section out;
  const std::string kind = obj.at("kind").get<std::string>();
  if (kind == "batch_size")
    out.kind = sweep_kind::batch_size;
  else if (kind == "bits")
    out.kind = sweep_kind::bits;
  else
    fail("sweep.kind must be \"batch_size\" or \"bits\"");
  if (obj.contains("values")) {
    if (!obj.at("values").is_array() || obj.at("values").empty())
      fail("sweep.values must be a nonempty array");
    for (const json& v : obj.at("values")) {
      if (!v.is_number_unsigned()) fail("sweep.values must be positive integers");
      const std::uint64_t x = v.get<std::uint64_t>();
      if (x == 0) fail("sweep.values must be positive integers");
      out.values.push_back(x);
    }
  } else {
    out.values = out.kind == sweep_kind::batch_size
                     ? std::vector<std::uint64_t>{200, 400, 600, 800}
                     : std::vector<std::uint64_t>{4, 5, 6, 7};
  }
  return out;
}

std::vector<std::size_t> parse_size_list(const json& obj, const char* key) {
  const json& arr = obj.at(key);
  if (!arr.is_array() || arr.empty())
    fail("phase." + std::string(key) + " must be a nonempty array");
  std::vector<std::size_t> out;
  for (const json& v : arr) {
    if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0)
      fail("phase." + std::string(key) + " must be positive integers");
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

phase_grid parse_phase(const json& obj) {
  check_keys(obj, "phase",
             {"d_values", "n_values", "trials_per_cell", "iteration_budget",
              "success_tol", "scheme", "bits", "batch_size"});
  phase_grid grid;
  grid.d_values = parse_size_list(obj, "d_values");
  grid.n_values = parse_size_list(obj, "n_values");
  if (obj.contains("trials_per_cell"))
    grid.trials_per_cell = get_count(obj, "phase", "trials_per_cell", 1);
  if (obj.contains("iteration_budget"))
    grid.iteration_budget = get_count(obj, "phase", "iteration_budget", 1);
  if (obj.contains("success_tol"))
    grid.success_tol = get_positive(obj, "phase", "success_tol");
  if (obj.contains("scheme"))
    grid.sch = parse_scheme(obj.at("scheme"), "phase.scheme");
  if (obj.contains("bits"))
    grid.bits = static_cast<std::uint32_t>(get_count(obj, "phase", "bits", 2));
  if (obj.contains("batch_size"))
    grid.m_fixed = get_count(obj, "phase", "batch_size", 1);
  grid.validate();
  return grid;
}

ensemble_section parse_ensemble(const json& obj) {
  check_keys(obj, "ensemble", {"trials", "iterations", "eps"});
  ensemble_section out;
  out.trials = get_count(obj, "ensemble", "trials", 1);
  out.iterations = get_count(obj, "ensemble", "iterations", 1);
  out.eps = get_positive(obj, "ensemble", "eps");
  return out;
}

transport_section parse_transport(const json& obj) {
  check_keys(obj, "transport", {"listen", "connect"});
  transport_section out;
  if (obj.contains("listen"))
    out.listen = parse_endpoint(obj.at("listen").get<std::string>());
  if (obj.contains("connect"))
    out.connect = parse_endpoint(obj.at("connect").get<std::string>());
  return out;
}

}  // namespace

endpoint parse_endpoint(const std::string& text) {
  const std::size_t colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size())
    fail("endpoint \"" + text + "\" must be host:port");
  endpoint ep;
  ep.host = text.substr(0, colon);
  const std::string port = text.substr(colon + 1);
  std::uint64_t value = 0;
  for (const char c : port) {
    if (c < '0' || c > '9') fail("endpoint \"" + text + "\": port must be numeric");
    value = value * 10 + static_cast<std::uint64_t>(c - '0');
    if (value > 65535) fail("endpoint \"" + text + "\": port out of range");
  }
  ep.port = static_cast<std::uint16_t>(value);
  return ep;
}

cli_config parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail("top level must be an object");
  check_keys(doc, "top level",
             {"seed", "dataset", "run", "sweep", "phase", "ensemble",
              "transport"});
  cli_config out;
  out.echo = doc;
  try {
    if (doc.contains("seed")) out.seed = get_count(doc, "top level", "seed", 0);
    if (doc.contains("dataset")) out.data = parse_dataset(doc.at("dataset"));
    if (doc.contains("run")) out.run = parse_run(doc.at("run"));
    if (doc.contains("sweep")) out.sweep = parse_sweep(doc.at("sweep"));
    if (doc.contains("phase")) out.phase = parse_phase(doc.at("phase"));
    if (doc.contains("ensemble")) out.ensemble = parse_ensemble(doc.at("ensemble"));
    if (doc.contains("transport"))
      out.transport = parse_transport(doc.at("transport"));
  } catch (const json::exception& e) {
    // missing required key or wrong primitive type inside a section
    fail(std::string("schema error: ") + e.what());
  }
  return out;
}

cli_config load_config(const std::filesystem::path& path) {
  std::ifstream in{path, std::ios::binary};
  if (!in) throw io_error("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (!in.good() && !in.eof())
    throw io_error("cannot read config " + path.string());
  return parse_config(buf.str());
}

}  // namespace qrelu
