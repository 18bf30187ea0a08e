#pragma once

#include <bit>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace kll {

enum class compactor_mode { exponential, fixed_top };

// Sketch parameters. The decay ratio c is kept as an exact rational so that
// serialized sketches round-trip bit-exactly; it must lie strictly inside
// (0.5, 1). k is the top-level capacity, at least 4. In fixed_top mode the
// top s levels keep capacity exactly k instead of decaying.
struct params {
  uint32_t k = 200;
  uint64_t c_num = 2;
  uint64_t c_den = 3;
  compactor_mode mode = compactor_mode::exponential;
  uint32_t s = 0;  // number of fixed-capacity top levels; 0 in exponential mode

  params() = default;

  params(uint32_t k_, uint64_t c_num_, uint64_t c_den_,
         compactor_mode mode_ = compactor_mode::exponential, uint32_t s_ = 0)
      : k(k_), c_num(c_num_), c_den(c_den_), mode(mode_), s(s_) {
    if (k < 4) throw std::invalid_argument("k too small: must be >= 4, got " + std::to_string(k));
    if (c_den == 0 || 2 * c_num <= c_den || c_num >= c_den) {
      throw std::invalid_argument("c out of (0.5,1): got " + std::to_string(c_num) + "/" + std::to_string(c_den));
    }
    const uint64_t g = std::gcd(c_num, c_den);
    c_num /= g;
    c_den /= g;
    if (mode == compactor_mode::fixed_top) {
      if (s < 1) throw std::invalid_argument("s must be >= 1 in fixed-top mode");
    } else {
      s = 0;
    }
  }

  static params exponential(uint32_t k, uint64_t c_num = 2, uint64_t c_den = 3) {
    return params(k, c_num, c_den, compactor_mode::exponential, 0);
  }

  static params fixed_top(uint32_t k, uint32_t s, uint64_t c_num = 2, uint64_t c_den = 3) {
    return params(k, c_num, c_den, compactor_mode::fixed_top, s);
  }

  double c() const { return static_cast<double>(c_num) / static_cast<double>(c_den); }

  bool operator==(const params&) const = default;
};

// Capacity of the compactor at height h when the hierarchy currently tops out
// at H. Decays as ceil(k*c^(H-h)) + 1 below the top; fixed at k on the top s
// levels in fixed_top mode. Never below 2.
inline uint32_t capacity(const params& p, uint32_t h_top, uint32_t h) {
  assert(h >= 1 && h <= h_top);
  if (p.mode == compactor_mode::fixed_top && h + p.s > h_top) return p.k;
  const double raw = static_cast<double>(p.k) * std::pow(p.c(), static_cast<double>(h_top - h));
  const uint64_t cap = static_cast<uint64_t>(std::ceil(raw)) + 1;
  return cap < 2 ? 2u : static_cast<uint32_t>(cap);
}

namespace detail {
// ceil(log2(x)) for integer x >= 1, exactly
inline uint32_t ceil_log2(uint64_t x) {
  assert(x >= 1);
  return x <= 1 ? 0 : static_cast<uint32_t>(std::bit_width(x - 1));
}
}  // namespace detail

// Height at or below which compactors are replaced by the sampler; 0 means
// the sampler is inactive. Monotone non-decreasing in the current top height.
inline uint32_t sampler_target_height(const params& p, uint32_t h_top) {
  assert(h_top >= 1);
  uint32_t gap;
  if (p.mode == compactor_mode::fixed_top) {
    gap = 2 * p.s + detail::ceil_log2(p.k);
  } else {
    // tiny slack keeps exact integer ratios from being bumped up by fp noise
    const double levels = std::log(static_cast<double>(p.k)) / std::log(1.0 / p.c());
    gap = static_cast<uint32_t>(std::ceil(levels - 1e-9));
  }
  return h_top > gap ? h_top - gap : 0;
}

}  // namespace kll
