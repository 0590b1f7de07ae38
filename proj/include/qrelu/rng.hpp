#pragma once

// Counter-based splitmix64 streams. Draw k of a stream is
// mix64(key + k * golden), a pure function of (key, k), so every consumer
// replays bit-for-bit. Derived keys are re-mixed so sibling streams (per
// purpose, per worker, per trial) land at unrelated points of the orbit
// instead of shifted copies of each other.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace qrelu::rng {

inline constexpr std::uint64_t golden = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::string_view purpose,
                                    std::uint64_t index = 0) {
  return mix64(mix64(base ^ fnv1a64(purpose)) + golden * index);
}

// Purpose tags shared between the local simulator and the distributed runtime;
// bit-identical replay depends on both sides deriving the same streams.
namespace tag {
inline constexpr std::string_view data = "data";      // feature matrix
inline constexpr std::string_view wstar = "wstar";    // planted weights
inline constexpr std::string_view sample = "sample";  // batch index draws, per worker
inline constexpr std::string_view quant = "quant";    // quantizer draws, per worker
inline constexpr std::string_view trial = "trial";    // ensemble / phase trials
}  // namespace tag

class stream {
 public:
  explicit stream(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() { return mix64(key_ + golden * ++n_); }

  // [0, 1), 53 uniform mantissa bits
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  std::size_t next_index(std::size_t n) {
    return static_cast<std::size_t>(next_u64() % n);
  }

  // Box-Muller; the second variate of each pair is cached, so gaussian draws
  // consume uniforms two at a time.
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - next_unit();  // (0, 1], keeps the log finite
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // uniforms consumed so far
  std::uint64_t draws() const { return n_; }

 private:
  std::uint64_t key_;
  std::uint64_t n_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace qrelu::rng
