#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

namespace kll {

// Closed-form failure-probability bounds for the sketch and the parameter
// helpers that invert them. All probabilities are clamped to [0, 1]; logs
// inside the exponential bounds are natural, heights count doublings.

namespace detail {

inline double clamp_probability(double p) { return p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p); }

inline void check_unit_interval(double value, const char* name) {
  if (!(value > 0.0 && value < 1.0)) {
    throw std::invalid_argument(std::string(name) + " must lie in (0,1)");
  }
}

inline void check_c(double c) {
  if (!(c > 0.5 && c < 1.0)) throw std::invalid_argument("c must lie in (0.5,1)");
}

}  // namespace detail

// C = c^2 (2c - 1), the constant of the compactor bound.
inline double error_constant(double c) {
  detail::check_c(c);
  return c * c * (2.0 * c - 1.0);
}

// Two-sided tail bound for a sum of independent zero-mean terms bounded by
// the given weights: min(1, 2 exp(-t^2 / (2 sum w_i^2))).
inline double hoeffding_tail(double t, std::span<const double> weights) {
  if (!(t > 0.0)) throw std::invalid_argument("hoeffding_tail: t must be positive");
  if (weights.empty()) throw std::invalid_argument("hoeffding_tail: weights must be non-empty");
  double sum_squares = 0.0;
  for (const double w : weights) sum_squares += w * w;
  return detail::clamp_probability(2.0 * std::exp(-(t * t) / (2.0 * sum_squares)));
}

// Pr[compactor error above level cut h_prime exceeds eps*n]
// <= 2 exp(-C eps^2 k^2 2^(2(H-H'))).
inline double compactor_fail_bound(double eps, uint32_t k, double c, uint32_t h_top, uint32_t h_prime) {
  detail::check_unit_interval(eps, "eps");
  if (h_prime < 1 || h_prime > h_top) throw std::invalid_argument("compactor_fail_bound: need 1 <= H' <= H");
  const double ek = eps * static_cast<double>(k);
  const double exponent = error_constant(c) * ek * ek * std::exp2(2.0 * static_cast<double>(h_top - h_prime));
  return detail::clamp_probability(2.0 * std::exp(-exponent));
}

// Pr[sampler error up to height h_pp exceeds eps*n]
// <= 2 exp(-c eps^2 k 2^(H-H'') / 32).
inline double sampler_fail_bound(double eps, uint32_t k, double c, uint32_t h_top, uint32_t h_pp) {
  detail::check_unit_interval(eps, "eps");
  detail::check_c(c);
  if (h_pp > h_top) throw std::invalid_argument("sampler_fail_bound: need H'' <= H");
  const double exponent =
      c * eps * eps * static_cast<double>(k) * std::exp2(static_cast<double>(h_top - h_pp)) / 32.0;
  return detail::clamp_probability(2.0 * std::exp(-exponent));
}

// Union of the two sources: bounds Pr[err_{H'} > 2 eps n].
inline double combined_fail_bound(double eps, uint32_t k, double c, uint32_t h_top, uint32_t h_prime,
                                  uint32_t h_pp) {
  if (!(h_pp < h_prime)) throw std::invalid_argument("combined_fail_bound: need H'' < H'");
  return detail::clamp_probability(sampler_fail_bound(eps, k, c, h_top, h_pp) +
                                   compactor_fail_bound(eps, k, c, h_top, h_prime));
}

// Smallest k with compactor_fail_bound(eps, k, c, H, H) <= delta:
// k = ceil((1/eps) sqrt(ln(2/delta) / C)), floored at 4.
inline uint32_t k_for_single(double eps, double delta, double c = 2.0 / 3.0) {
  detail::check_unit_interval(eps, "eps");
  detail::check_unit_interval(delta, "delta");
  const double raw = (1.0 / eps) * std::sqrt(std::log(2.0 / delta) / error_constant(c));
  if (raw >= static_cast<double>(std::numeric_limits<uint32_t>::max())) {
    throw std::overflow_error("k_for_single: k out of range");
  }
  uint32_t k = std::max<uint32_t>(4, static_cast<uint32_t>(std::ceil(raw)));
  // guard against ceil landing a hair short under fp rounding
  while (compactor_fail_bound(eps, k, c, 1, 1) > delta) ++k;
  return k;
}

// All-quantiles sizing via the union bound over a grid of ceil(2/eps)
// queries, each answered to eps/2.
inline uint32_t k_for_all(double eps, double delta, double c = 2.0 / 3.0) {
  detail::check_unit_interval(eps, "eps");
  detail::check_unit_interval(delta, "delta");
  return k_for_single(eps / 2.0, delta * eps / 2.0, c);
}

// Number of fixed-capacity top layers for a target failure probability:
// max(1, ceil(log2 log2 (2/delta))).
inline uint32_t s_for(double delta) {
  detail::check_unit_interval(delta, "delta");
  const double raw = std::log2(std::log2(2.0 / delta));
  const double rounded = std::ceil(raw - 1e-9);
  return rounded < 1.0 ? 1u : static_cast<uint32_t>(rounded);
}

// Both fixed-top conditions: eps*k*2^s >= c' sqrt(ln(2/delta)) and s <= k*eps.
inline bool fixed_top_check(double eps, uint32_t k, uint32_t s, double delta, double c_prime = 1.0) {
  detail::check_unit_interval(eps, "eps");
  detail::check_unit_interval(delta, "delta");
  const double lhs = eps * static_cast<double>(k) * std::exp2(static_cast<double>(s));
  const bool deviation_ok = lhs >= c_prime * std::sqrt(std::log(2.0 / delta));
  const bool budget_ok = static_cast<double>(s) <= static_cast<double>(k) * eps;
  return deviation_ok && budget_ok;
}

// H <= ceil(log2(n/(c k))) + 2, floored at 1.
inline uint32_t height_bound(uint64_t n, uint32_t k, double c) {
  if (n < 1) throw std::invalid_argument("height_bound: n must be >= 1");
  detail::check_c(c);
  const double raw = std::log2(static_cast<double>(n) / (c * static_cast<double>(k)));
  const int64_t bound = static_cast<int64_t>(std::ceil(raw)) + 2;
  return bound < 1 ? 1u : static_cast<uint32_t>(bound);
}

// m_h <= (2/c)^(H-h-1); below 1 at the top, where a compaction forces growth.
inline double compactions_bound(uint32_t h, uint32_t h_top, double c) {
  detail::check_c(c);
  if (h < 1 || h > h_top) throw std::invalid_argument("compactions_bound: need 1 <= h <= H");
  return std::pow(2.0 / c, static_cast<double>(h_top) - static_cast<double>(h) - 1.0);
}

}  // namespace kll
