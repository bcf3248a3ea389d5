#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace mpbt {

// Small, fast counter-seeded generator (xoshiro256++ state update with a
// splitmix64 seeding pass). Simulations draw billions of exponentials per
// run, so the per-draw cost matters more than fancy distribution support.
//
// Two construction parameters: a user-visible seed and a stream index.
// Distinct (seed, stream) pairs give statistically independent sequences,
// which lets replicate k use Rng(seed, k) and stay reproducible no matter
// how replicates are scheduled.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t x = seed;
    x ^= 0x9E3779B97F4A7C15ULL * (stream + 1);
    for (auto& word : s_) word = splitmix64(x);
    // A few warm-up rounds decorrelate nearby (seed, stream) pairs.
    for (int i = 0; i < 8; ++i) next();
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Unit-rate exponential via a 256-level ziggurat; the slow path with a
  // log runs about 1% of the time. Edge simulation lives on this call.
  double std_exponential() {
    for (;;) {
      std::uint64_t r = next() >> 3;
      const std::size_t idx = static_cast<std::size_t>(r & 0xFF);
      r >>= 8;  // 53 bits remain
      const double x = static_cast<double>(r) * zig().w[idx];
      if (r < zig().k[idx]) return x;
      if (idx == 0) return zig().tail + tail_exponential();
      const double f_hi = zig().f[idx - 1];
      const double f_lo = zig().f[idx];
      if (f_lo + (f_hi - f_lo) * uniform() < std::exp(-x)) return x;
    }
  }

  // Exponential waiting time with the given rate. rate == 0 yields +inf,
  // which callers treat as "no event before any finite horizon".
  double exponential(double rate) { return std_exponential() / rate; }

  // Index uniform on {0, ..., n-1}. Exact for n up to 2^53.
  std::uint64_t below(std::uint64_t n) {
    std::uint64_t i = static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

  // UniformRandomBitGenerator interface so <random> adapters work too.
  std::uint64_t operator()() { return next(); }
  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() {
    return std::numeric_limits<std::uint64_t>::max();
  }

 private:
  // Ziggurat tables for the unit exponential: 256 equal-area layers,
  // k[i] the inner-rectangle acceptance bound on the 53-bit mantissa,
  // w[i] the layer width over 2^53, f[i] the density at the layer edge.
  struct ZigguratTables {
    static constexpr double kTailStart = 7.697117470131487;
    std::uint64_t k[256];
    double w[256];
    double f[256];
    double tail = kTailStart;

    ZigguratTables() {
      const double v = 3.949659822581572e-3;  // common layer area
      double x = kTailStart;
      double prev = x;
      const double scale = 0x1.0p53;
      k[0] = static_cast<std::uint64_t>((x / (v / std::exp(-x))) * scale);
      k[1] = 0;
      w[0] = (v / std::exp(-x)) / scale;
      w[255] = x / scale;
      f[0] = 1.0;
      f[255] = std::exp(-x);
      for (int i = 254; i >= 1; --i) {
        x = -std::log(v / x + std::exp(-x));
        k[i + 1] = static_cast<std::uint64_t>((x / prev) * scale);
        prev = x;
        f[i] = std::exp(-x);
        w[i] = x / scale;
      }
    }
  };

  static const ZigguratTables& zig() {
    static const ZigguratTables tables;
    return tables;
  }

  // -log(U) on (0, 1]; used only for the ziggurat tail.
  double tail_exponential() {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return -std::log(u);
  }

  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }

  static std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::array<std::uint64_t, 4> s_;
};

}  // namespace mpbt
