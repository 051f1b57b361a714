#ifndef RVCLT_RNG_HPP
#define RVCLT_RNG_HPP

#include <cmath>
#include <cstdint>

namespace rvclt {

// Splitmix64 step (Vigna's fixed-increment variant of SplittableRandom).
// One 64-bit word of state, passes BigCrush, and mixes arbitrary seeds well,
// which is what the counter-based stream derivation below relies on.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Stage tags keep streams for different pipeline stages disjoint even when
// they share (master_seed, n, replicate).
enum class Stage : std::uint64_t {
  generic = 0,
  normalized_sums = 1,
  studentized_sums = 2,
  multiplier = 3,
  petrov = 4,
  ld_scan = 5,
  mixing_full = 6,
  mixing_block = 7,
  moment_growth = 8,
  marginal_sample = 9,
  spectral_mc = 10,
  multiplier_noise = 11,
};

// Derives one independent stream per (master, stage, n, replicate).
// Streams are a pure function of the tuple: changing the replicate count or
// the thread layout never changes the values a given replicate sees.
inline std::uint64_t derive_stream(std::uint64_t master, Stage stage,
                                   std::uint64_t n, std::uint64_t replicate) {
  std::uint64_t s = master;
  s = splitmix64_next(s) ^ (static_cast<std::uint64_t>(stage) * 0xBF58476D1CE4E5B9ULL);
  s = splitmix64_next(s) ^ (n * 0x94D049BB133111EBULL);
  s = splitmix64_next(s) ^ (replicate * 0x9E3779B97F4A7C15ULL);
  return splitmix64_next(s);
}

// Sequential pseudorandom stream. Pure value type: copying replays.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}
  RngStream(std::uint64_t master, Stage stage, std::uint64_t n, std::uint64_t replicate)
      : state_(derive_stream(master, stage, n, replicate)) {}

  std::uint64_t next_u64() { return splitmix64_next(state_); }

  // Uniform on the open interval (0,1); never returns 0 or 1, so inverse
  // transforms like u^{-1/2} stay finite.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
  }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 6.283185307179586476925286766559 * u2;
    spare_ = rad * std::sin(ang);
    have_spare_ = true;
    return rad * std::cos(ang);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace rvclt

#endif  // RVCLT_RNG_HPP
