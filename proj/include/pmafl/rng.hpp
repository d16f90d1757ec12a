#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace pmafl {

// Counter-style stream derivation: every (master seed, device, round, purpose)
// tuple maps to an independent generator, so results do not depend on the
// order in which streams are consumed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class StreamPurpose : std::uint64_t {
  kChannel = 1,
  kDataGen = 2,
  kPartition = 3,
  kWeightInit = 4,
  kBatch = 5,
  kScheduleBaseline = 6,
  kGeneric = 7,
  kDeviceGen = 8,
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(splitmix64(seed)) {}

  static Rng stream(std::uint64_t master, StreamPurpose purpose,
                    std::uint64_t device = 0, std::uint64_t round = 0) {
    std::uint64_t s = splitmix64(master ^ (0xa5a5a5a5a5a5a5a5ULL *
                                           static_cast<std::uint64_t>(purpose)));
    s = splitmix64(s ^ (device + 0x51ed270b1a2f8dbfULL));
    s = splitmix64(s ^ (round + 0x9cd38f5a7cc6e2adULL));
    return Rng(s);
  }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1). Explicit bit conversion keeps results identical across
  // standard library implementations.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Exp(1) via inverse transform; strictly positive.
  double exponential() {
    double u = uniform();
    return -std::log1p(-u);
  }

  // Standard normal via Box-Muller; keeps the spare draw for the next call.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::index: n must be positive");
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace pmafl
