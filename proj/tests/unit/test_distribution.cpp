#include <cmath>
#include <vector>

#include <doctest.h>

#include "calibra/distribution.hpp"
#include "calibra/errors.hpp"
#include "test_util.hpp"

using namespace calibra;

TEST_CASE("from_atoms sorts, merges duplicates, drops zero mass") {
  const FiniteDistribution d =
      FiniteDistribution::from_atoms({0.5, 0.25, 0.5, 0.9}, {0.25, 0.5, 0.25, 0.0});
  CHECK(d.support == std::vector<double>{0.25, 0.5});
  CHECK(d.probs == std::vector<double>{0.5, 0.5});
}

TEST_CASE("from_atoms validation") {
  CHECK_THROWS_AS(FiniteDistribution::from_atoms({0.5}, {0.5, 0.5}), DataError);
  CHECK_THROWS_AS(FiniteDistribution::from_atoms({}, {}), DataError);
  CHECK_THROWS_AS(FiniteDistribution::from_atoms({0.5}, {0.9}), DataError);
  CHECK_THROWS_AS(FiniteDistribution::from_atoms({0.3, 0.6}, {1.5, -0.5}), DataError);
  CHECK_THROWS_AS(FiniteDistribution::from_atoms({0.3, 0.6}, {0.0, 0.0}), DataError);
}

TEST_CASE("fair coin moments") {
  const FiniteDistribution d = FiniteDistribution::from_atoms({0.0, 1.0}, {0.5, 0.5});
  CHECK(d.mean() == 0.5);
  CHECK(d.variance() == 0.25);
  CHECK(d.partial_expectation_above(0.5) == 0.25);
}

TEST_CASE("cdf is a right-continuous step function") {
  const FiniteDistribution d = FiniteDistribution::from_atoms({0.2, 0.6}, {0.3, 0.7});
  CHECK(d.cdf(0.1) == 0.0);
  CHECK(d.cdf(0.2) == 0.3);
  CHECK(d.cdf(0.59) == 0.3);
  CHECK(d.cdf(0.6) == 1.0);
  CHECK(d.cdf(1.0) == 1.0);
}

TEST_CASE("quantile is inf{y : F(y) >= tau}") {
  const FiniteDistribution d = FiniteDistribution::from_atoms({0.2, 0.6}, {0.3, 0.7});
  CHECK(d.quantile(0.5) == 0.6);
  CHECK(d.quantile(0.3) == 0.2);
  CHECK(d.quantile(0.31) == 0.6);
  CHECK(d.quantile(0.0) == 0.2);
  CHECK(d.quantile(-1.0) == 0.2);
}

TEST_CASE("cvar via the quantile-plus-tail identity") {
  const FiniteDistribution d = FiniteDistribution::from_atoms({0.0, 1.0}, {0.5, 0.5});
  CHECK(d.cvar(0.5) == 1.0);
  CHECK(d.cvar(0.0) == d.mean());
  CHECK_THROWS_AS(d.cvar(1.0), DataError);

  const FiniteDistribution e =
      FiniteDistribution::from_atoms({0.25, 0.75}, {0.75, 0.25});
  // q = 0.25, E[(Y-q)+] = 0.125, cvar = 0.25 + 0.125/0.5.
  CHECK(e.cvar(0.5) == 0.5);
}

TEST_CASE("mix renormalizes and validates weights") {
  const FiniteDistribution a = FiniteDistribution::from_atoms({0.0}, {1.0});
  const FiniteDistribution b = FiniteDistribution::from_atoms({1.0}, {1.0});
  const FiniteDistribution m = mix2(a, b, 0.5);
  CHECK(m.support == std::vector<double>{0.0, 1.0});
  CHECK(m.probs == std::vector<double>{0.5, 0.5});
  CHECK_THROWS_AS(mix({}, {}), EmptyRegionError);
  CHECK_THROWS_AS(mix({&a, &b}, {0.0, 0.0}), EmptyRegionError);
  CHECK_THROWS_AS(mix({&a, &b}, {-1.0, 2.0}), DataError);
}

TEST_CASE("mixing is associative up to float noise") {
  for (std::uint64_t s = 1; s <= 30; ++s) {
    const FiniteDistribution a = testutil::random_dist(3 * s);
    const FiniteDistribution b = testutil::random_dist(3 * s + 1);
    const FiniteDistribution c = testutil::random_dist(3 * s + 2);
    const FiniteDistribution left = mix({&a, &b, &c}, {0.2, 0.3, 0.5});
    const FiniteDistribution right = mix2(mix2(a, b, 0.4), c, 0.5);
    REQUIRE(left.support == right.support);
    for (std::size_t i = 0; i < left.size(); ++i)
      CHECK(std::abs(left.probs[i] - right.probs[i]) <= 1e-12);
  }
}

TEST_CASE("moment identities on random distributions") {
  for (std::uint64_t s = 100; s < 140; ++s) {
    const FiniteDistribution d = testutil::random_dist(s);
    CHECK(d.variance() >= 0.0);
    CHECK(d.cdf(1.0) == doctest::Approx(1.0).epsilon(1e-12));
    // E[(Y - 0)+] = mean on non-negative support.
    CHECK(d.partial_expectation_above(0.0) == doctest::Approx(d.mean()).epsilon(1e-12));
  }
}
