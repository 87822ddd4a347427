#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "diffmia/error.hpp"
#include "diffmia/schedule.hpp"

using namespace diffmia;

TEST_CASE("two-step constant-beta schedule matches hand-computed products") {
  const NoiseSchedule s = build_linear_schedule(2, 0.5, 0.5);
  CHECK(s.T == 2);
  CHECK(s.beta(1) == 0.5);
  CHECK(s.beta(2) == 0.5);
  CHECK(s.alpha(1) == 0.5);
  CHECK(s.alpha(2) == 0.5);
  CHECK(s.alpha_bar(0) == 1.0);
  CHECK(s.alpha_bar(1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.alpha_bar(2) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("single-step schedule") {
  const NoiseSchedule s = build_linear_schedule(1, 0.1, 0.1);
  CHECK(s.T == 1);
  CHECK(s.alpha_bar(0) == 1.0);
  CHECK(s.alpha_bar(1) == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("linear beta grid endpoints are inclusive") {
  const NoiseSchedule s = build_linear_schedule(5, 0.01, 0.05);
  CHECK(s.beta(1) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(s.beta(5) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(s.beta(3) == doctest::Approx(0.03).epsilon(1e-12));
}

TEST_CASE("cumulative products match an extended-precision oracle") {
  for (const int T : {100, 1000}) {
    const double bs = default_beta_start(T);
    const double be = default_beta_end(T);
    const NoiseSchedule s = build_linear_schedule(T, bs, be);

    long double prod = 1.0L;
    for (int t = 1; t <= T; ++t) {
      const long double beta_grid =
          (long double)bs +
          ((long double)be - (long double)bs) * (t - 1) / (long double)(T - 1);
      // Promote the double beta actually used by the schedule so the oracle
      // checks the cumulative product, not the grid rounding.
      const long double beta_used = (long double)s.beta(t);
      CHECK(std::abs((double)(beta_grid - beta_used)) < 1e-12);
      prod *= 1.0L - beta_used;
      const long double rel =
          std::abs(((long double)s.alpha_bar(t) - prod) / prod);
      CHECK((double)rel <= 1e-12);
    }
  }
}

TEST_CASE("alpha_bar is strictly decreasing and satisfies the recurrence") {
  const NoiseSchedule s = default_schedule(100);
  for (int t = 1; t <= s.T; ++t) {
    CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
    const double lhs = s.alpha_bar(t);
    const double rhs = s.alpha(t) * s.alpha_bar(t - 1);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::abs(rhs));
  }
  CHECK(s.alpha_bar(s.T) > 0.0);
}

TEST_CASE("default endpoints rescale the T=1000 convention") {
  CHECK(default_beta_start(1000) == doctest::Approx(1e-4).epsilon(1e-15));
  CHECK(default_beta_end(1000) == doctest::Approx(0.02).epsilon(1e-15));
  CHECK(default_beta_start(100) == doctest::Approx(1e-3).epsilon(1e-15));
  CHECK(default_beta_end(100) == doctest::Approx(0.2).epsilon(1e-15));
  // Small T would push beta past 1; the end is capped below it.
  CHECK(default_beta_end(10) == doctest::Approx(0.999).epsilon(1e-15));

  const NoiseSchedule d = default_schedule();
  CHECK(d.T == 100);
  CHECK(d.beta(1) == doctest::Approx(1e-3).epsilon(1e-15));
  CHECK(d.beta(100) == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("invalid schedule parameters are rejected") {
  CHECK_THROWS_AS(build_linear_schedule(0, 0.1, 0.2), ConfigError);
  CHECK_THROWS_AS(build_linear_schedule(-3, 0.1, 0.2), ConfigError);
  CHECK_THROWS_AS(build_linear_schedule(10, 0.0, 0.2), ConfigError);
  CHECK_THROWS_AS(build_linear_schedule(10, -0.1, 0.2), ConfigError);
  CHECK_THROWS_AS(build_linear_schedule(10, 0.1, 1.0), ConfigError);
  CHECK_THROWS_AS(build_linear_schedule(10, 0.3, 0.2), ConfigError);
}
