#pragma once

#include <cstdint>
#include <cmath>
#include <initializer_list>

namespace l2o {

// splitmix64 finalizer; used both as a bit mixer and as a tiny RNG for
// deriving child seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic, seekable-by-construction random stream. Identical
// (seed, stream_id) pairs reproduce identical draw sequences; distinct
// stream ids give independent-for-all-practical-purposes streams.
//
// The generator is xoshiro256** seeded through splitmix64, with explicit
// uniform/normal transforms so draws do not depend on any
// implementation-defined <random> distribution.
class RandomnessStream {
 public:
  RandomnessStream(std::uint64_t seed, std::uint64_t stream_id) {
    std::uint64_t z = splitmix64(seed) ^ splitmix64(stream_id * 0x9e3779b97f4a7c15ULL + 1);
    for (auto& si : s_) {
      z = splitmix64(z);
      si = z;
    }
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
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
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (pair cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  // Derives a child seed from a master seed and a path of tags, e.g.
  // derive(master, {kRollout, support_index, problem_index}).
  static std::uint64_t derive(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = splitmix64(master);
    for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
    return h;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t s_[4] = {};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stream id tags for the experiment pipeline. Kept in one place so the
// mapping from pipeline phase to random stream is auditable.
enum StreamTag : std::uint64_t {
  kTagProblems = 1,
  kTagDesignMatrix = 2,
  kTagWeightInit = 3,
  kTagTraining = 4,
  kTagPriorPerturbation = 5,
  kTagRollout = 6,
  kTagValidation = 7,
};

}  // namespace l2o
