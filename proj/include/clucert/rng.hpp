#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace clucert {

// SplitMix64 step; also used to expand seeds.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stable derivation of stream seeds from (master, index). Every batch fan-out
// goes through this, so outputs do not depend on scheduling.
inline uint64_t derive_seed(uint64_t master, uint64_t index) {
  uint64_t s = master ^ (0x9e3779b97f4a7c15ULL * (index + 0x632be59bd9b4e019ULL));
  uint64_t a = splitmix64(s);
  uint64_t b = splitmix64(s);
  return a ^ (b >> 1);
}

// xoshiro256++, self-contained so sampling is bit-identical across platforms
// and standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& w : state_) w = splitmix64(sm);
  }

  uint64_t next() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Unbiased integer in [0, bound) via rejection.
  uint64_t below(uint64_t bound) {
    if (bound < 2) {
      if (bound == 0) throw std::invalid_argument("Rng::below: zero bound");
      return 0;
    }
    const uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // k distinct values from {0,...,n-1}, ascending.
  std::vector<int> sample_indices(int n, int k) {
    std::vector<int> pool(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) pool[static_cast<size_t>(i)] = i;
    for (int i = 0; i < k; ++i) {
      const int j = i + static_cast<int>(below(static_cast<uint64_t>(n - i)));
      std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
    }
    pool.resize(static_cast<size_t>(k));
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t state_[4];
};

}  // namespace clucert
