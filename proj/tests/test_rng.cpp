#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "sdmlmc/rng.hpp"

using namespace sdmlmc;

TEST_CASE("stream is deterministic and seed-sensitive") {
  CHECK(rng::stream_word(42, 0) == rng::stream_word(42, 0));
  CHECK(rng::stream_word(42, 0) != rng::stream_word(42, 1));
  CHECK(rng::stream_word(42, 0) != rng::stream_word(43, 0));
}

TEST_CASE("uniform01 lies strictly inside (0,1) with correct moments") {
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng::uniform01(7, i);
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    sum += u;
    sum2 += u * u;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::fabs(mean - 0.5) < 3.0 / std::sqrt(12.0 * n));
  CHECK(std::fabs(var - 1.0 / 12.0) < 5e-3);
}

TEST_CASE("inverse normal cdf hits tabulated quantiles") {
  // Reference values of Phi^{-1} to 15 digits.
  CHECK(rng::inverse_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(rng::inverse_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(rng::inverse_normal_cdf(0.84134474606854293) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rng::inverse_normal_cdf(0.0013498980316300933) == doctest::Approx(-3.0).epsilon(1e-12));
  CHECK(rng::inverse_normal_cdf(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-9));
}

TEST_CASE("inverse normal cdf round-trips the error function") {
  for (double x = -5.0; x <= 5.0; x += 0.25) {
    const double p = 0.5 * std::erfc(-x / std::sqrt(2.0));
    CHECK(rng::inverse_normal_cdf(p) == doctest::Approx(x).epsilon(1e-10));
  }
}

TEST_CASE("standard normal stream has unit variance") {
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng::standard_normal(123, i);
    sum += z;
    sum2 += z * z;
  }
  const double mean = sum / n;
  CHECK(std::fabs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::fabs(sum2 / n - mean * mean - 1.0) < 2e-2);
}

TEST_CASE("derived seeds are distinct over a realistic index box") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t t = 0; t < 8; ++t)
    for (std::uint64_t i = 0; i < 512; ++i) seen.insert(rng::derive_seed(99, t, i));
  CHECK(seen.size() == 8u * 512u);
}
