#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace recert {

// Deterministic substream RNG.
//
// Every random quantity in the toolkit is drawn from a SubstreamRng
// constructed from (master seed, stream label, stream index).  The label
// separates logical streams ("Y", "ER", "noise", "cone-sampler"), the index
// separates parallel trials.  Normal variates are produced by Box-Muller on
// top of std::mt19937_64, so identical (seed, label, index) triples give
// bit-identical sequences on every platform and for any worker count.
class SubstreamRng {
 public:
  SubstreamRng(std::uint64_t master_seed, std::string_view label,
               std::uint64_t index = 0)
      : engine_(derive_seed(master_seed, label, index)) {}

  // Uniform on (0, 1]; never returns 0 so log() is always safe.
  double uniform01() {
    const std::uint64_t bits = engine_();
    return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the second variate of each pair is
  // cached, so draws come in a fixed deterministic order.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform integer in [0, bound) by rejection; bound must be positive.
  std::uint64_t uniform_below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t draw;
    do {
      draw = engine_();
    } while (draw >= limit);
    return draw % bound;
  }

  static std::uint64_t derive_seed(std::uint64_t master_seed,
                                   std::string_view label,
                                   std::uint64_t index) {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a over the label
    for (const char c : label) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    std::uint64_t x = master_seed;
    x = splitmix64(x + 0x9e3779b97f4a7c15ull);
    x = splitmix64(x ^ h);
    x = splitmix64(x ^ index);
    return x;
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace recert
