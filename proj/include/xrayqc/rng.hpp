#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace xrayqc {

// splitmix64 finalizer. Whitens seeds and derives independent streams.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Stream splitting: every consumer of randomness gets its own seed derived
// from (root seed, stream tag, indices). Parallel and sequential execution
// then draw identical values.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = mix64(seed ^ 0x517cc1b727220a95ull);
  h = mix64(h ^ tag);
  h = mix64(h ^ a);
  h = mix64(h ^ b);
  return h;
}

// Stream tags for derive_seed. Keeping them in one table avoids collisions
// between modules.
namespace stream {
inline constexpr std::uint64_t synth_batch = 1;
inline constexpr std::uint64_t synth_sample = 2;
inline constexpr std::uint64_t backbone = 3;
inline constexpr std::uint64_t head_init = 4;
inline constexpr std::uint64_t shuffle = 5;
inline constexpr std::uint64_t augment = 6;
inline constexpr std::uint64_t fold = 7;
}  // namespace stream

// mt19937_64 plus hand-rolled distributions. The engine's output sequence is
// pinned by the standard; std:: distributions are not, so we do not use them.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t raw() { return eng_(); }

  // [0,1), 53-bit resolution
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0,n); modulo bias is negligible for n far below 2^64
  std::uint64_t uniform_int(std::uint64_t n) { return n ? eng_() % n : 0; }

  // Box-Muller with cached spare
  double normal(double mean = 0.0, double sigma = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + sigma * spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return mean + sigma * r * std::cos(a);
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace xrayqc
