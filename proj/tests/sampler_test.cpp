#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "kll/random.hpp"
#include "kll/sampler.hpp"

using kll::rng64;
using kll::sampler;

namespace {

// chi-square 0.999 critical values, df -> value
constexpr double k_chi2_crit_df3 = 16.26623619623813;

}  // namespace

TEST_CASE("first item is always adopted") {
  rng64 rng(1);
  sampler<double> smp;
  smp.set_height(3);
  const auto out = smp.update(42.0, 5, rng);  // replacement probability 5/5
  CHECK_FALSE(out.has_value());
  REQUIRE(smp.holds_item());
  CHECK(*smp.stored_item() == 42.0);
  CHECK(smp.stored_weight() == 5);
}

TEST_CASE("hitting the window emits and resets") {
  // stored (a, 3), update (b, 5): v+w = 8 = 2^3 emits a with prob 3/8, b with 5/8
  int emitted_a = 0;
  int emitted_b = 0;
  const int reps = 40000;
  for (int rep = 0; rep < reps; ++rep) {
    rng64 rng(static_cast<uint64_t>(rep) + 7);
    sampler<double> smp;
    smp.set_height(3);
    (void)smp.update(1.0, 3, rng);  // a
    const auto out = smp.update(2.0, 5, rng);  // b
    REQUIRE(out.has_value());
    CHECK(smp.stored_weight() == 0);
    CHECK_FALSE(smp.holds_item());
    if (*out == 1.0) ++emitted_a;
    else ++emitted_b;
  }
  CHECK(emitted_a + emitted_b == reps);
  const double p = 3.0 / 8.0;
  const double se = std::sqrt(p * (1.0 - p) / reps);
  CHECK(std::abs(static_cast<double>(emitted_a) / reps - p) <= 4.0 * se);
  // expected rank of a query between a and b is preserved: 8 * 3/8 = 3 = v
  CHECK(8.0 * static_cast<double>(emitted_a) / reps == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("overweight update keeps the lighter item") {
  // stored (a, 3), update (b, 7): keep (a, 3); emit b with prob 7/8
  int emissions = 0;
  const int reps = 40000;
  for (int rep = 0; rep < reps; ++rep) {
    rng64 rng(static_cast<uint64_t>(rep) * 3 + 1);
    sampler<double> smp;
    smp.set_height(3);
    (void)smp.update(1.0, 3, rng);
    const auto out = smp.update(2.0, 7, rng);
    REQUIRE(smp.holds_item());
    CHECK(*smp.stored_item() == 1.0);
    CHECK(smp.stored_weight() == 3);
    if (out.has_value()) {
      CHECK(*out == 2.0);
      ++emissions;
    }
  }
  const double p = 7.0 / 8.0;
  const double se = std::sqrt(p * (1.0 - p) / reps);
  CHECK(std::abs(static_cast<double>(emissions) / reps - p) <= 4.0 * se);
}

TEST_CASE("overweight tie keeps the stored item") {
  rng64 rng(11);
  sampler<double> smp;
  smp.set_height(2);
  (void)smp.update(1.0, 3, rng);
  (void)smp.update(2.0, 3, rng);  // 3+3 > 4, tie on weights
  REQUIRE(smp.holds_item());
  CHECK(*smp.stored_item() == 1.0);
  CHECK(smp.stored_weight() == 3);
}

TEST_CASE("unit-weight feeds emit exactly once per window") {
  rng64 rng(5);
  sampler<double> smp;
  smp.set_height(2);
  int emissions = 0;
  for (int i = 0; i < 4000; ++i) {
    const auto out = smp.update(static_cast<double>(i), 1, rng);
    if (out.has_value()) {
      ++emissions;
      CHECK((i + 1) % 4 == 0);  // every 2^h-th input, exactly
    }
  }
  CHECK(emissions == 1000);
}

TEST_CASE("window selection is uniform (chi-square at h=2)") {
  rng64 rng(12345);
  sampler<double> smp;
  smp.set_height(2);
  std::array<uint64_t, 4> position_counts{};
  const uint64_t windows = 100000;
  for (uint64_t i = 0; i < windows * 4; ++i) {
    const auto out = smp.update(static_cast<double>(i), 1, rng);
    if (out.has_value()) {
      position_counts[static_cast<uint64_t>(*out) % 4] += 1;
    }
  }
  const double expected = static_cast<double>(windows) / 4.0;
  double chi2 = 0.0;
  for (const auto count : position_counts) {
    const double diff = static_cast<double>(count) - expected;
    chi2 += diff * diff / expected;
  }
  CHECK(chi2 < k_chi2_crit_df3);
}

TEST_CASE("from_parts validates its invariants") {
  CHECK_NOTHROW(sampler<double>::from_parts(3, 5, 1.5));
  CHECK_NOTHROW(sampler<double>::from_parts(0, 0, std::nullopt));
  CHECK_THROWS(sampler<double>::from_parts(3, 8, 1.5));             // v > 2^h - 1
  CHECK_THROWS(sampler<double>::from_parts(3, 0, 1.5));             // weight/item disagree
  CHECK_THROWS(sampler<double>::from_parts(3, 5, std::nullopt));
  CHECK_THROWS(sampler<double>::from_parts(0, 1, 1.5));             // inactive with state
}
