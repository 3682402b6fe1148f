#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace vqseg {

// mt19937_64 with in-house distribution transforms. The raw engine sequence
// is pinned by the standard; std:: distributions are not, so uniform/normal
// are derived here to keep outputs identical across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : engine_(seed) {}

  uint64_t next() { return engine_(); }

  // [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  int64_t below(int64_t n) {
    return static_cast<int64_t>(next() % static_cast<uint64_t>(n));
  }

  // Box-Muller; one spare kept in state.
  double normal(double mean, double sigma);

  std::string save() const;
  void restore(const std::string& blob);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace vqseg
