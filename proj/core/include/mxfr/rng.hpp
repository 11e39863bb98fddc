#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace mxfr {

// Deterministic RNG helpers. mt19937_64 has a fully specified output
// sequence; the bounded draw below uses rejection sampling instead of
// std::uniform_int_distribution, whose mapping is implementation-defined.
// Together these make every sampled artifact byte-identical across
// platforms and standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform draw in [0, n), n >= 1.
  uint64_t below(uint64_t n);

  double uniform(double lo, double hi);

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices out of [0, n), in draw order.
  std::vector<size_t> sample_indices(size_t n, size_t k);

 private:
  std::mt19937_64 engine_;
};

// splitmix64 step; used to expand one master seed into independent
// per-purpose seeds (split, init, shuffle, cipher).
uint64_t derive_seed(uint64_t master, uint64_t stream);

}  // namespace mxfr
