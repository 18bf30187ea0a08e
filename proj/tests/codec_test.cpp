#include <doctest.h>

#include <string>
#include <vector>

#include "kll/codec.hpp"
#include "kll/eval.hpp"
#include "kll/random.hpp"
#include "kll/sketch.hpp"

using kll::codec_error;
using kll::deserialize;
using kll::params;
using kll::serialize;
using kll::sketch;

namespace {

sketch<double> sample_sketch(uint32_t k, uint64_t n, uint64_t seed) {
  sketch<double> sk(params::exponential(k), seed);
  for (double x : kll::eval::make_stream(n, kll::eval::distribution::random_permutation, seed + 1)) {
    sk.update(x);
  }
  return sk;
}

}  // namespace

TEST_CASE("round trip preserves all query answers") {
  const sketch<double> sk = sample_sketch(64, 30000, 5);
  const std::string text = serialize(sk);
  const sketch<double> restored = deserialize(text, 999);

  CHECK(restored.n() == sk.n());
  CHECK(restored.config() == sk.config());
  CHECK(restored.height() == sk.height());
  CHECK(restored.sampler_height() == sk.sampler_height());
  CHECK(restored.stored_weight() == sk.stored_weight());
  for (int i = 0; i <= 1000; ++i) {
    const double q = static_cast<double>(i) * 30.5 - 100.0;
    CHECK(restored.rank(q) == sk.rank(q));
  }
  // re-serializing reproduces the exact bytes: the generator state is not
  // part of the format
  CHECK(serialize(restored) == text);
}

TEST_CASE("empty sketch serializes and parses") {
  const sketch<double> sk(params::exponential(200), 1);
  const std::string text = serialize(sk);
  CHECK(text.find("KLLv1\n") == 0);
  CHECK(text.find("n=0\n") != std::string::npos);
  CHECK(text.find("level h=1 count=0\n") != std::string::npos);
  const sketch<double> restored = deserialize(text, 2);
  CHECK(restored.n() == 0);
  CHECK(restored.stored_count() == 0);
}

TEST_CASE("fixed-top parameters survive the trip") {
  sketch<double> sk(params::fixed_top(32, 2), 7);
  for (int i = 0; i < 5000; ++i) sk.update(static_cast<double>(i % 97));
  const sketch<double> restored = deserialize(serialize(sk), 1);
  CHECK(restored.config() == sk.config());
  CHECK(restored.config().mode == kll::compactor_mode::fixed_top);
  CHECK(restored.config().s == 2);
}

TEST_CASE("items round-trip bit-exactly") {
  sketch<double> sk(params::exponential(200), 1);
  sk.update(0.1);  // not representable exactly in binary
  sk.update(-0.0);
  sk.update(1e-308);
  const sketch<double> restored = deserialize(serialize(sk), 1);
  CHECK(restored.rank(0.1) == sk.rank(0.1));
  CHECK(serialize(restored) == serialize(sk));
}

TEST_CASE("a restored sketch keeps working") {
  sketch<double> sk = sample_sketch(16, 20000, 11);
  sketch<double> restored = deserialize(serialize(sk), 123);
  for (int i = 0; i < 1000; ++i) restored.update(static_cast<double>(i));
  CHECK(restored.n() == 21000);
  CHECK(restored.stored_weight() == 21000);
}

TEST_CASE("deserialize rejects malformed input with a position") {
  const std::string good = serialize(sample_sketch(16, 1000, 3));

  SUBCASE("bad magic") {
    std::string bad = good;
    bad[0] = 'X';
    CHECK_THROWS_WITH_AS(deserialize(bad, 1), doctest::Contains("bad magic"), codec_error);
  }
  SUBCASE("truncated input") {
    const std::string bad = good.substr(0, good.size() / 2);
    try {
      deserialize(bad, 1);
      FAIL("expected codec_error");
    } catch (const codec_error& e) {
      CHECK(e.line() > 1);
      CHECK(std::string(e.what()).find("line ") == 0);
    }
  }
  SUBCASE("malformed numeric field") {
    std::string bad = good;
    const auto pos = bad.find("n=");
    bad.replace(pos, 2, "n=x");
    CHECK_THROWS_AS(deserialize(bad, 1), codec_error);
  }
  SUBCASE("malformed item line") {
    std::string bad = good;
    const auto pos = bad.find("END");
    bad.replace(pos - 17, 16, "zzzzzzzzzzzzzzzz");
    CHECK_THROWS_WITH_AS(deserialize(bad, 1), doctest::Contains("hex"), codec_error);
  }
  SUBCASE("trailing data after END") {
    const std::string bad = good + "more\n";
    CHECK_THROWS_WITH_AS(deserialize(bad, 1), doctest::Contains("trailing"), codec_error);
  }
  SUBCASE("missing END") {
    std::string bad = good;
    const auto pos = bad.find("END");
    bad.resize(pos);
    CHECK_THROWS_WITH_AS(deserialize(bad, 1), doctest::Contains("unexpected end"), codec_error);
  }
  SUBCASE("inconsistent sampler height") {
    std::string bad = good;
    const auto pos = bad.find("sampler h=");
    REQUIRE(pos != std::string::npos);
    // bump the sampler height without touching the levels
    bad.replace(pos, 11, "sampler h=9");
    CHECK_THROWS_AS(deserialize(bad, 1), codec_error);
  }
  SUBCASE("oversized level count is rejected before allocating") {
    std::string bad = good;
    const auto pos = bad.find("count=");
    REQUIRE(pos != std::string::npos);
    bad.replace(pos, 7, "count=999999999999999");
    CHECK_THROWS_AS(deserialize(bad, 1), codec_error);
  }
}

TEST_CASE("random single-byte corruption never escapes as a crash") {
  const std::string good = serialize(sample_sketch(16, 2000, 13));
  kll::rng64 rng(2024);
  const std::string alphabet = "0123456789abcdefxyzKLE =/-.\nn";
  int parsed = 0;
  int rejected = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    std::string mutant = good;
    const int edits = 1 + static_cast<int>(rng.bounded(3));
    for (int e = 0; e < edits; ++e) {
      mutant[rng.bounded(mutant.size())] = alphabet[rng.bounded(alphabet.size())];
    }
    try {
      const auto sk = deserialize(mutant, 1);
      (void)sk.rank(0.0);
      ++parsed;  // the mutation happened to keep the file valid
    } catch (const codec_error&) {
      ++rejected;
    }
  }
  CHECK(parsed + rejected == 2000);
  CHECK(rejected > 0);
}
