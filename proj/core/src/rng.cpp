#include "mxfr/rng.hpp"

#include <cassert>
#include <numeric>

namespace mxfr {

uint64_t Rng::below(uint64_t n) {
  assert(n >= 1);
  if (n == 1) return 0;
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::uniform(double lo, double hi) {
  // 53 random bits -> [0, 1)
  double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}

std::vector<size_t> Rng::sample_indices(size_t n, size_t k) {
  assert(k <= n);
  std::vector<size_t> pool(n);
  std::iota(pool.begin(), pool.end(), size_t{0});
  std::vector<size_t> out;
  out.reserve(k);
  for (size_t i = 0; i < k; ++i) {
    size_t j = i + static_cast<size_t>(below(n - i));
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  return out;
}

uint64_t derive_seed(uint64_t master, uint64_t stream) {
  uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace mxfr
