#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace dfr {

// splitmix64 finalizer. Used to derive independent sub-seeds from a master
// seed so that task k always sees the same stream regardless of what else ran.
uint64_t splitmix64(uint64_t x);
uint64_t mix_seed(uint64_t seed, uint64_t stream);

// All randomness in the library flows through this wrapper.
// Engine: std::mt19937_64 (bit-exact output mandated by the C++ standard).
// uniform() maps the top 53 bits to [0,1); normal() is the Marsaglia polar
// method. No global RNG state anywhere.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double normal();

  // Uniform in [0, n), unbiased via rejection.
  uint64_t below(uint64_t n);

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (size_t i = v.size() - 1; i > 0; --i) {
      size_t j = static_cast<size_t>(below(i + 1));
      std::swap(v[i], v[j]);
    }
  }

  // k distinct indices from [0, n), returned in ascending order.
  std::vector<size_t> sample_without_replacement(size_t n, size_t k);

  // Index in [0, priors.size()) with the given probabilities (must sum to ~1).
  int categorical(const std::vector<double>& priors);

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace dfr
