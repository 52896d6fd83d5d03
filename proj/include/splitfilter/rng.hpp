#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace splitfilter::rng {

// Counter-based generator: output k of a stream is mix(key + k*gamma), so
// streams are cheap to create and advance, and substreams never share state.
inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

class Stream {
 public:
  explicit Stream(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGolden); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller; the second deviate is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u = uniform01();        // [0,1)
    const double radius = std::sqrt(-2.0 * std::log1p(-u));  // log(1-u), 1-u in (0,1]
    const double angle = 2.0 * std::numbers::pi * uniform01();
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Stream purposes; tags keep substreams for different uses disjoint even
// when their numeric keys coincide.
enum class Purpose : std::uint64_t {
  signal_noise = 1,
  observation_noise = 2,
  network_init = 3,
  training_paths = 4,
  normalizer = 5,
  fk_reference = 6,
  ou_sampler = 7,
  generic = 8,
};

inline Stream substream(std::uint64_t root, Purpose purpose, std::uint64_t a = 0,
                        std::uint64_t b = 0) {
  std::uint64_t key = mix64(root + kGolden);
  key = mix64(key ^ (static_cast<std::uint64_t>(purpose) * 0xD6E8FEB86659FD93ull));
  key = mix64(key ^ (a * 0xA5CB3A035AF5BB6Dull));
  key = mix64(key ^ (b * 0xC2B2AE3D27D4EB4Full));
  return Stream(key);
}

}  // namespace splitfilter::rng
