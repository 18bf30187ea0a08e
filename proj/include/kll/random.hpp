#pragma once

#include <array>
#include <cstdint>

namespace kll {

// splitmix64: used to expand seeds and to derive per-trial substreams.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256** (Blackman & Vigna). Hand-rolled so that a given seed produces
// the same stream on every platform; one instance is owned per sketch.
// Satisfies UniformRandomBitGenerator.
class rng64 {
 public:
  using result_type = uint64_t;

  explicit rng64(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  static constexpr uint64_t min() { return 0; }
  static constexpr uint64_t max() { return ~uint64_t(0); }

  uint64_t operator()() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // fair coin from the top bit
  bool coin() { return ((*this)() >> 63) != 0; }

  // uniform integer in [0, n), unbiased via rejection
  uint64_t bounded(uint64_t n) {
    const uint64_t threshold = (0 - n) % n;
    for (;;) {
      const uint64_t r = (*this)();
      if (r >= threshold) return r % n;
    }
  }

  // uniform double in [0, 1) with 53 random bits
  double uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  static constexpr uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::array<uint64_t, 4> state_;
};

// Per-trial seed derivation: master xor index, pushed through the seeding
// function, so whole experiments are reproducible from one master seed.
inline uint64_t derive_seed(uint64_t master, uint64_t index) {
  uint64_t s = master ^ index;
  return splitmix64(s);
}

}  // namespace kll
