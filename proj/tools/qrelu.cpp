// Single entry point for dataset generation, training runs, the phase and
// ensemble experiments, and the loopback distributed runtime. All subcommands
// read one JSON config; artifacts land in --out and are listed in
// manifest.json with checksums. Exit codes: 0 ok, 1 config or validation
// error, 2 divergence (or failed ensemble selection), 3 transport or protocol
// error.
#include <chrono>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "qrelu/codec.hpp"
#include "qrelu/config.hpp"
#include "qrelu/dataset.hpp"
#include "qrelu/harness.hpp"
#include "qrelu/model.hpp"
#include "qrelu/runtime.hpp"
#include "qrelu/sgd.hpp"
#include "qrelu/transport.hpp"

namespace fs = std::filesystem;
using namespace qrelu;

namespace {

struct common_args {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
};

std::uint64_t parse_seed_text(const std::string& text, const char* source) {
  std::uint64_t value = 0;
  const char* first = text.data();
  const char* last = first + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || text.empty())
    throw std::invalid_argument(std::string(source) +
                                " must be an unsigned 64-bit integer, got \"" +
                                text + "\"");
  return value;
}

// Precedence: --seed flag, then QRELU_SEED, then the config file.
std::uint64_t resolve_seed(const common_args& args, const cli_config& cfg) {
  if (args.seed_set) return args.seed;
  if (const char* env = std::getenv("QRELU_SEED")) return parse_seed_text(env, "QRELU_SEED");
  return cfg.seed;
}

const dataset_section& need_dataset(const cli_config& cfg) {
  if (!cfg.data)
    throw std::invalid_argument("config: this subcommand needs a \"dataset\" section");
  return *cfg.data;
}

run_config need_run(const cli_config& cfg, std::uint64_t seed) {
  if (!cfg.run)
    throw std::invalid_argument("config: this subcommand needs a \"run\" section");
  run_config rc = *cfg.run;
  rc.seed = seed;
  return rc;
}

// dataset.path set: load that file (made by gen-data). Otherwise generate
// in memory from the dataset section and the effective seed.
dataset obtain_dataset(const cli_config& cfg, const fs::path& out,
                       std::uint64_t seed) {
  const dataset_section& sec = need_dataset(cfg);
  if (sec.path) return load_dataset(out / *sec.path);
  return generate_dataset(sec.n, sec.d, sec.w_star, seed);
}

nlohmann::json run_summary(const trace& tr) {
  nlohmann::json j;
  j["iterations"] = tr.iterations();
  j["converged"] = tr.converged;
  j["diverged"] = tr.diverged;
  j["final_rel_err"] =
      tr.records.empty() ? 0.0 : tr.records.back().rel_err;
  j["upstream_bytes"] =
      tr.records.empty() ? 0 : tr.records.back().upstream_bytes;
  j["eta"] = tr.eta_effective;
  return j;
}

void emit_manifest(const fs::path& out, const cli_config& cfg,
                   std::uint64_t seed, std::vector<artifact_info> artifacts,
                   nlohmann::json extra = {}) {
  nlohmann::json m = make_manifest(cfg.echo, seed, artifacts);
  for (auto& [key, value] : extra.items()) m[key] = std::move(value);
  write_artifact(out, "manifest.json", m.dump(2) + "\n");
}

std::string trace_csv(const trace& tr) {
  std::ostringstream ss;
  tr.write_csv(ss);
  return ss.str();
}

int cmd_gen_data(const common_args& args, const cli_config& cfg,
                 std::uint64_t seed) {
  const dataset_section& sec = need_dataset(cfg);
  if (!sec.path)
    throw std::invalid_argument("config: gen-data needs dataset.path");
  const fs::path out{args.out_dir};
  const dataset ds = generate_dataset(sec.n, sec.d, sec.w_star, seed);
  const fs::path target = out / *sec.path;
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  save_dataset(ds, target);
  std::vector<artifact_info> arts{checksum_file(out, *sec.path)};
  emit_manifest(out, cfg, seed, arts);
  std::cout << "wrote " << *sec.path << " (n=" << ds.n << ", d=" << ds.d
            << ")\n";
  return 0;
}

int cmd_train(const common_args& args, const cli_config& cfg,
              std::uint64_t seed) {
  const fs::path out{args.out_dir};
  const dataset ds = obtain_dataset(cfg, out, seed);
  const run_config rc = need_run(cfg, seed);

  if (cfg.sweep) {
    const convergence_result res =
        convergence_experiment(rc, ds, cfg.sweep->kind, cfg.sweep->values);
    std::vector<timing_row> rows;
    nlohmann::json points = nlohmann::json::array();
    for (const sweep_point& p : res.points) {
      timing_row row;
      row.label = p.label;
      row.sch = rc.sch;
      row.d = ds.d;
      row.workers = rc.workers;
      row.bits = res.kind == sweep_kind::bits
                     ? static_cast<std::uint32_t>(p.value)
                     : rc.bits;
      row.tr = &p.tr;
      rows.push_back(row);
      nlohmann::json e = run_summary(p.tr);
      e["label"] = p.label;
      points.push_back(std::move(e));
    }
    std::vector<artifact_info> arts;
    arts.push_back(write_artifact(out, "sweep.csv", res.csv()));
    arts.push_back(write_artifact(out, "timing.csv", timing_csv(rows)));
    emit_manifest(out, cfg, seed, arts, {{"sweep", points}});
    std::cout << "wrote sweep.csv timing.csv manifest.json ("
              << res.points.size() << " runs)\n";
    return 0;
  }

  const trace tr = rc.sch == scheme::sgd ? run_sgd(rc, ds) : run_qsgd_local(rc, ds);
  timing_row row;
  row.label = rc.sch == scheme::sgd ? "sgd" : "qsgd";
  row.sch = rc.sch;
  row.d = ds.d;
  row.workers = rc.workers;
  row.bits = rc.bits;
  row.tr = &tr;
  std::vector<artifact_info> arts;
  arts.push_back(write_artifact(out, "trace.csv", trace_csv(tr)));
  arts.push_back(write_artifact(out, "timing.csv", timing_csv({&row, 1})));
  emit_manifest(out, cfg, seed, arts, {{"run", run_summary(tr)}});
  std::cout << "wrote trace.csv timing.csv manifest.json (t=" << tr.iterations()
            << ", rel_err="
            << (tr.records.empty() ? 0.0 : tr.records.back().rel_err) << ")\n";
  return tr.diverged ? 2 : 0;
}

int cmd_phase(const common_args& args, const cli_config& cfg,
              std::uint64_t seed) {
  if (!cfg.phase)
    throw std::invalid_argument("config: phase needs a \"phase\" section");
  const fs::path out{args.out_dir};
  const phase_result res = phase_transition(*cfg.phase, seed);
  std::vector<artifact_info> arts;
  arts.push_back(write_artifact(out, "phase.csv", res.csv()));
  emit_manifest(out, cfg, seed, arts);
  std::cout << "wrote phase.csv manifest.json (" << res.cells.size()
            << " cells)\n";
  return 0;
}

int cmd_ensemble(const common_args& args, const cli_config& cfg,
                 std::uint64_t seed) {
  if (!cfg.ensemble)
    throw std::invalid_argument("config: ensemble needs an \"ensemble\" section");
  const fs::path out{args.out_dir};
  const dataset ds = obtain_dataset(cfg, out, seed);
  const run_config rc = need_run(cfg, seed);
  const ensemble_section& es = *cfg.ensemble;
  const ensemble_result er =
      ensemble_estimate(rc, ds, es.trials, es.iterations, es.eps);

  std::ostringstream csv;
  csv << "trial,rel_err,selected\n";
  char buf[32];
  for (std::size_t l = 0; l < er.finals.size(); ++l) {
    std::snprintf(buf, sizeof buf, "%.17g", rel_error(er.finals[l], ds));
    csv << l << ',' << buf << ',' << (er.selected && *er.selected == l ? 1 : 0)
        << '\n';
  }
  nlohmann::json summary;
  if (er.selected) {
    summary["selected"] = *er.selected;
    summary["rel_err"] = rel_error(er.w_hat, ds);
  } else {
    summary["selected"] = nullptr;
  }
  std::vector<artifact_info> arts;
  arts.push_back(write_artifact(out, "ensemble.csv", csv.str()));
  emit_manifest(out, cfg, seed, arts, {{"ensemble", summary}});
  if (!er.selected) {
    std::cerr << "ensemble: no majority cluster among " << er.finals.size()
              << " trials\n";
    return 2;
  }
  std::cout << "wrote ensemble.csv manifest.json (selected trial "
            << *er.selected << ")\n";
  return 0;
}

int cmd_dist_master(const common_args& args, const cli_config& cfg,
                    std::uint64_t seed, const std::string& listen_flag) {
  const fs::path out{args.out_dir};
  const dataset ds = obtain_dataset(cfg, out, seed);
  const run_config rc = need_run(cfg, seed);
  if (rc.sch != scheme::qsgd)
    throw std::invalid_argument("dist-master: run.scheme must be \"qsgd\"");
  endpoint ep{"127.0.0.1", 0};
  if (!listen_flag.empty())
    ep = parse_endpoint(listen_flag);
  else if (cfg.transport && cfg.transport->listen)
    ep = *cfg.transport->listen;

  auto lst = transport::tcp_listen(ep.host, ep.port);
  std::cout << "listening " << ep.host << ":" << lst->port() << std::endl;
  std::vector<std::unique_ptr<transport::byte_stream>> conns;
  for (std::uint32_t k = 0; k < rc.workers; ++k) conns.push_back(lst->accept());
  const trace tr = run_master(rc, ds, std::move(conns));

  timing_row row;
  row.label = "dist-master";
  row.sch = scheme::qsgd;
  row.d = ds.d;
  row.workers = rc.workers;
  row.bits = rc.bits;
  row.tr = &tr;
  std::vector<artifact_info> arts;
  arts.push_back(write_artifact(out, "trace.csv", trace_csv(tr)));
  arts.push_back(write_artifact(out, "timing.csv", timing_csv({&row, 1})));
  emit_manifest(out, cfg, seed, arts, {{"run", run_summary(tr)}});
  std::cout << "wrote trace.csv timing.csv manifest.json (t=" << tr.iterations()
            << ")\n";
  return tr.diverged ? 2 : 0;
}

int cmd_dist_worker(const common_args& args, const cli_config& cfg,
                    std::uint64_t seed, std::uint32_t worker_id,
                    const std::string& connect_flag, double timeout_s) {
  const fs::path out{args.out_dir};
  const dataset ds = obtain_dataset(cfg, out, seed);
  std::optional<endpoint> ep;
  if (!connect_flag.empty())
    ep = parse_endpoint(connect_flag);
  else if (cfg.transport && cfg.transport->connect)
    ep = cfg.transport->connect;
  if (!ep)
    throw std::invalid_argument(
        "dist-worker: master address required (--connect or transport.connect)");
  const bool full_shard = cfg.run && cfg.run->full_batch;

  // The master may not be listening yet; retry until the deadline.
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration<double>(timeout_s);
  std::unique_ptr<transport::byte_stream> conn;
  for (;;) {
    try {
      conn = transport::tcp_connect(ep->host, ep->port);
      break;
    } catch (const transport::error&) {
      if (std::chrono::steady_clock::now() >= deadline) throw;
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  }
  run_worker(ds, worker_id, *conn, full_shard);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"planted-ReLU regression: SGD, QSGD, and a loopback distributed runtime"};
  app.require_subcommand(1);

  common_args args;
  std::string listen_flag;
  std::string connect_flag;
  std::uint32_t worker_id = 0;
  double connect_timeout = 10.0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "JSON config file")
        ->required();
    sub->add_option("--out", args.out_dir,
                    "output directory; artifacts and dataset paths are relative "
                    "to it (default .)");
    sub->add_option("--seed", args.seed,
                    "base seed; overrides QRELU_SEED and the config file")
        ->each([&](const std::string&) { args.seed_set = true; });
    return sub;
  };

  CLI::App* gen = add_common(app.add_subcommand(
      "gen-data", "generate a planted dataset file at dataset.path"));
  CLI::App* train = add_common(app.add_subcommand(
      "train", "run SGD or local QSGD; with a sweep section, one run per value"));
  CLI::App* phase = add_common(app.add_subcommand(
      "phase", "success-probability grid over (d, n)"));
  CLI::App* ensemble = add_common(app.add_subcommand(
      "ensemble", "majority-vote estimate from independent SGD trials"));
  CLI::App* dmaster = add_common(app.add_subcommand(
      "dist-master", "serve run.workers TCP workers and train QSGD"));
  dmaster->add_option("--listen", listen_flag,
                      "host:port to bind (default transport.listen, else "
                      "127.0.0.1:0); the bound port is printed");
  CLI::App* dworker = add_common(app.add_subcommand(
      "dist-worker", "connect to a master and serve gradient rounds"));
  dworker->add_option("--worker-id", worker_id, "0-based worker id")->required();
  dworker->add_option("--connect", connect_flag,
                      "master host:port (default transport.connect)");
  dworker->add_option("--connect-timeout", connect_timeout,
                      "seconds to keep retrying the connect (default 10)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const cli_config cfg = load_config(args.config_path);
    const std::uint64_t seed = resolve_seed(args, cfg);
    fs::create_directories(args.out_dir);
    if (gen->parsed()) return cmd_gen_data(args, cfg, seed);
    if (train->parsed()) return cmd_train(args, cfg, seed);
    if (phase->parsed()) return cmd_phase(args, cfg, seed);
    if (ensemble->parsed()) return cmd_ensemble(args, cfg, seed);
    if (dmaster->parsed()) return cmd_dist_master(args, cfg, seed, listen_flag);
    if (dworker->parsed())
      return cmd_dist_worker(args, cfg, seed, worker_id, connect_flag,
                             connect_timeout);
    return 1;
  } catch (const protocol_error& e) {
    std::cerr << "protocol error: " << e.what() << '\n';
    return 3;
  } catch (const transport::error& e) {
    std::cerr << "transport error: " << e.what() << '\n';
    return 3;
  } catch (const wire::error& e) {
    std::cerr << "wire error: " << e.what() << '\n';
    return 3;
  } catch (const codec_error& e) {
    std::cerr << "codec error: " << e.what() << '\n';
    return 3;
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
