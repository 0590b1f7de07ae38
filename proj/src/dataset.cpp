#include "qrelu/dataset.hpp"

#include <unistd.h>

#include <bit>
#include <fstream>
#include <limits>
#include <utility>

#include "qrelu/bytes.hpp"
#include "qrelu/kernels.hpp"
#include "qrelu/rng.hpp"

namespace qrelu {
namespace {

constexpr char magic[4] = {'R', 'E', 'L', 'U'};
constexpr std::uint16_t format_version = 1;
constexpr std::size_t header_size = 4 + 2 + 8 + 8 + 8;

void write_doubles(std::ofstream& out, const std::vector<double>& v) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  } else {
    std::vector<std::uint8_t> buf;
    buf.reserve(v.size() * sizeof(double));
    for (const double x : v) bytes::put_f64(buf, x);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
  }
}

void read_doubles(const std::uint8_t* p, std::vector<double>& v) {
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(v.data(), p, v.size() * sizeof(double));
  } else {
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = bytes::get_f64(p + 8 * i);
  }
}

}  // namespace

wstar_spec wstar_spec::gaussian(double mean, double stddev) {
  wstar_spec s;
  s.k = kind::gaussian;
  s.mean = mean;
  s.stddev = stddev;
  return s;
}

wstar_spec wstar_spec::fixed(std::vector<double> values) {
  wstar_spec s;
  s.k = kind::fixed;
  s.values = std::move(values);
  return s;
}

dataset generate_dataset(std::size_t n, std::size_t d, const wstar_spec& spec,
                         std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("generate_dataset: n must be >= 1");
  if (d == 0) throw std::invalid_argument("generate_dataset: d must be >= 1");
  if (d != 0 && n > std::numeric_limits<std::size_t>::max() / d / sizeof(double))
    throw std::invalid_argument("generate_dataset: n*d overflows");
  if (spec.k == wstar_spec::kind::gaussian && !(spec.stddev >= 0.0))
    throw std::invalid_argument("generate_dataset: w* stddev must be >= 0");
  if (spec.k == wstar_spec::kind::fixed && spec.values.size() != d)
    throw std::invalid_argument("generate_dataset: explicit w* has wrong dimension");

  dataset ds;
  ds.n = n;
  ds.d = d;
  ds.seed = seed;

  ds.w_star.resize(d);
  if (spec.k == wstar_spec::kind::fixed) {
    ds.w_star = spec.values;
  } else {
    rng::stream g{rng::derive_seed(seed, rng::tag::wstar)};
    for (std::size_t j = 0; j < d; ++j)
      ds.w_star[j] = spec.mean + spec.stddev * g.next_gaussian();
  }

  ds.features.resize(n * d);
  rng::stream g{rng::derive_seed(seed, rng::tag::data)};
  for (double& x : ds.features) x = g.next_gaussian();

  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = dot(ds.w_star, ds.row(i));
    ds.labels[i] = z > 0.0 ? z : 0.0;
  }
  return ds;
}

void save_dataset(const dataset& ds, const std::filesystem::path& path) {
  std::vector<std::uint8_t> header;
  header.reserve(header_size);
  for (const char c : magic) header.push_back(static_cast<std::uint8_t>(c));
  bytes::put_u16(header, format_version);
  bytes::put_u64(header, ds.n);
  bytes::put_u64(header, ds.d);
  bytes::put_u64(header, ds.seed);

  const std::filesystem::path tmp =
      path.string() + ".tmp-" + std::to_string(static_cast<long>(::getpid()));
  {
    std::ofstream out{tmp, std::ios::binary | std::ios::trunc};
    if (!out) throw io_error("save_dataset: cannot open " + tmp.string());
    out.write(reinterpret_cast<const char*>(header.data()),
              static_cast<std::streamsize>(header.size()));
    write_doubles(out, ds.w_star);
    write_doubles(out, ds.features);
    write_doubles(out, ds.labels);
    if (!out) {
      std::filesystem::remove(tmp);
      throw io_error("save_dataset: write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw io_error("save_dataset: rename to " + path.string() + " failed: " +
                   ec.message());
  }
}

dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in{path, std::ios::binary};
  if (!in) throw io_error("load_dataset: cannot open " + path.string());
  std::vector<std::uint8_t> raw{std::istreambuf_iterator<char>(in),
                                std::istreambuf_iterator<char>()};
  if (raw.size() < header_size)
    throw io_error("load_dataset: truncated header in " + path.string());
  if (std::memcmp(raw.data(), magic, 4) != 0)
    throw io_error("load_dataset: bad magic in " + path.string());
  if (bytes::get_u16(raw.data() + 4) != format_version)
    throw io_error("load_dataset: unsupported version in " + path.string());

  dataset ds;
  ds.n = bytes::get_u64(raw.data() + 6);
  ds.d = bytes::get_u64(raw.data() + 14);
  ds.seed = bytes::get_u64(raw.data() + 22);
  if (ds.n == 0 || ds.d == 0)
    throw io_error("load_dataset: zero dimension in " + path.string());
  if (ds.n > std::numeric_limits<std::size_t>::max() / ds.d / sizeof(double))
    throw io_error("load_dataset: dimensions overflow in " + path.string());

  const std::size_t expected =
      header_size + sizeof(double) * (ds.d + ds.n * ds.d + ds.n);
  if (raw.size() < expected)
    throw io_error("load_dataset: truncated payload in " + path.string());
  if (raw.size() > expected)
    throw io_error("load_dataset: trailing bytes in " + path.string());

  ds.w_star.resize(ds.d);
  ds.features.resize(ds.n * ds.d);
  ds.labels.resize(ds.n);
  const std::uint8_t* p = raw.data() + header_size;
  read_doubles(p, ds.w_star);
  p += 8 * ds.d;
  read_doubles(p, ds.features);
  p += 8 * ds.n * ds.d;
  read_doubles(p, ds.labels);
  return ds;
}

}  // namespace qrelu
