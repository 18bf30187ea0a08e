#include <doctest.h>

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "kll/error_model.hpp"

using namespace kll;

TEST_CASE("hoeffding tail") {
  const std::array<double, 1> one{1.0};
  // 2*exp(-1/2) = 1.213 clamps to 1
  CHECK(hoeffding_tail(1.0, one) == 1.0);

  const std::vector<double> eight(8, 1.0);
  // 2*exp(-64/16) = 2e^-4
  CHECK(hoeffding_tail(8.0, eight) == doctest::Approx(0.036631277777468356).epsilon(1e-12));

  // monotone decreasing in t, vanishing in the limit
  CHECK(hoeffding_tail(4.0, eight) > hoeffding_tail(8.0, eight));
  CHECK(hoeffding_tail(1e6, one) < 1e-300);

  CHECK_THROWS_AS(hoeffding_tail(0.0, one), std::invalid_argument);
  CHECK_THROWS_AS(hoeffding_tail(1.0, std::span<const double>{}), std::invalid_argument);
}

TEST_CASE("compactor fail bound") {
  // with k from k_for_single(0.01, 0.01) the bound clears delta
  CHECK(k_for_single(0.01, 0.01) == 599);
  CHECK(compactor_fail_bound(0.01, 599, 2.0 / 3.0, 7, 7) ==
        doctest::Approx(0.009828949769881135).epsilon(1e-12));
  CHECK(compactor_fail_bound(0.01, 599, 2.0 / 3.0, 7, 7) <= 0.01);

  // algebraic identity: eps*k = sqrt(ln(2/delta)/C) makes the bound exactly delta
  const double c = 2.0 / 3.0;
  const double delta = 0.037;
  const double ek = std::sqrt(std::log(2.0 / delta) / error_constant(c));
  const double eps = ek / 1000.0;
  CHECK(compactor_fail_bound(eps, 1000, c, 3, 3) == doctest::Approx(delta).epsilon(1e-9));

  // strictly decreasing as the cut moves down
  CHECK(compactor_fail_bound(0.01, 500, c, 8, 7) < compactor_fail_bound(0.01, 500, c, 8, 8));
}

TEST_CASE("sampler fail bound") {
  // 2*exp(-(2/3)*1e-4*100*2^14/32) = 2*exp(-3.41333...)
  CHECK(sampler_fail_bound(0.01, 100, 2.0 / 3.0, 20, 6) ==
        doctest::Approx(0.06586249279947355).epsilon(1e-12));
  // monotone decreasing in H - H''
  CHECK(sampler_fail_bound(0.01, 100, 2.0 / 3.0, 20, 5) < sampler_fail_bound(0.01, 100, 2.0 / 3.0, 20, 6));
  CHECK(sampler_fail_bound(0.01, 100, 2.0 / 3.0, 20, 6) > 0.0);
  // eps -> 0 clamps to 1
  CHECK(sampler_fail_bound(1e-12, 4, 2.0 / 3.0, 2, 1) == 1.0);
}

TEST_CASE("combined fail bound adds the two parts") {
  const double combined = combined_fail_bound(0.01, 500, 2.0 / 3.0, 20, 20, 6);
  const double expected =
      sampler_fail_bound(0.01, 500, 2.0 / 3.0, 20, 6) + compactor_fail_bound(0.01, 500, 2.0 / 3.0, 20, 20);
  CHECK(combined == doctest::Approx(expected).epsilon(1e-12));
  CHECK(combined < 1.0);
  CHECK_THROWS_AS(combined_fail_bound(0.01, 500, 2.0 / 3.0, 20, 6, 6), std::invalid_argument);
  // H'' = 0 boundary: the sampler term carries its maximal exponent and the
  // compactor term dominates
  const double at_boundary = combined_fail_bound(0.01, 500, 2.0 / 3.0, 20, 20, 0);
  CHECK(at_boundary >= compactor_fail_bound(0.01, 500, 2.0 / 3.0, 20, 20));
  CHECK(at_boundary == doctest::Approx(compactor_fail_bound(0.01, 500, 2.0 / 3.0, 20, 20)).epsilon(1e-6));
  // corollary-scale parameters stay within budget
  const uint32_t k = k_for_single(0.01, 0.1);
  CHECK(combined_fail_bound(0.01, k, 2.0 / 3.0, 20, 20, 20 - 14) <= 0.1);
}

TEST_CASE("k_for_single") {
  CHECK(k_for_single(0.01, 0.01) == 599);
  CHECK(k_for_single(0.01, 0.05) == 499);
  CHECK(k_for_single(0.5, 0.5) >= 4);
  CHECK_THROWS_AS(k_for_single(0.01, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(k_for_single(0.0, 0.5), std::invalid_argument);

  SUBCASE("round-trips through the bound on a grid") {
    for (double eps : {0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001, 0.0005}) {
      for (double delta : {0.5, 0.3, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001}) {
        const uint32_t k = k_for_single(eps, delta);
        CHECK(compactor_fail_bound(eps, k, 2.0 / 3.0, 5, 5) <= delta);
      }
    }
  }
}

TEST_CASE("k_for_all dominates k_for_single") {
  CHECK(k_for_all(0.02, 0.1) == 717);
  CHECK(k_for_all(0.01, 0.1) == 1497);
  for (double eps : {0.5, 0.1, 0.02}) {
    for (double delta : {0.5, 0.1, 0.02}) {
      CHECK(k_for_all(eps, delta) >= k_for_single(eps, delta));
      CHECK(k_for_all(eps, delta) >= 4);
    }
  }
}

TEST_CASE("s_for and fixed_top_check") {
  CHECK(s_for(0.01) == 3);   // ceil(log2 log2 200)
  CHECK(s_for(1e-6) == 5);
  CHECK(s_for(0.9) == 1);    // floored at 1

  CHECK(fixed_top_check(0.01, 800, 3, 0.01, 1.0));
  // s > k*eps violates the second condition
  CHECK_FALSE(fixed_top_check(0.01, 800, 9, 0.01, 1.0));
  // a large enough c' breaks the first condition
  CHECK_FALSE(fixed_top_check(0.01, 800, 3, 0.01, 100.0));
}

TEST_CASE("height and compaction-count bounds") {
  CHECK(height_bound(12, 16, 0.75) == 2);    // n = c*k exactly
  CHECK(height_bound(1000000, 200, 2.0 / 3.0) == 15);
  CHECK(height_bound(1, 200, 2.0 / 3.0) == 1);

  CHECK(compactions_bound(5, 5, 2.0 / 3.0) == doctest::Approx(1.0 / 3.0));  // c/2 < 1 at the top
  CHECK(compactions_bound(4, 5, 2.0 / 3.0) == doctest::Approx(1.0));
  CHECK(compactions_bound(1, 5, 2.0 / 3.0) == doctest::Approx(27.0));
}

TEST_CASE("bounds stay inside [0,1] across a parameter sweep") {
  for (uint32_t k : {4u, 16u, 128u, 1024u}) {
    for (double eps : {0.9, 0.1, 0.001}) {
      for (uint32_t h_top : {1u, 5u, 30u}) {
        const double cf = compactor_fail_bound(eps, k, 0.67, h_top, h_top);
        const double sf = sampler_fail_bound(eps, k, 0.67, h_top, 0);
        CHECK(cf >= 0.0);
        CHECK(cf <= 1.0);
        CHECK(sf >= 0.0);
        CHECK(sf <= 1.0);
      }
    }
  }
}
