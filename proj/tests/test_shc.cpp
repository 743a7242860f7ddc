#include <cmath>

#include <boost/math/special_functions/gamma.hpp>

#include "doctest.h"

#include "cpe/error.hpp"
#include "cpe/parallel.hpp"
#include "cpe/shc.hpp"

using namespace cpe;

namespace {

ProcessSpec wide_uniform() { return ProcessSpec(1.0, JumpDensity::uniform_on(Domain::interval(-1.0, 1.0))); }

}  // namespace

TEST_CASE("heat content at t = 0 is the volume, exactly") {
  const Domain d = Domain::interval(0.0, 1.0);
  const ShcCurve c = estimate_Q(wide_uniform(), d, {0.0, 0.5}, 1000, 1);
  CHECK(c.estimates[0].mean == 1.0);
  CHECK(c.estimates[0].std_error == 0.0);
}

TEST_CASE("heat content matches exp(-t/2) when D - D fits in A") {
  // Each jump lands in D with probability |D|/|A| = 1/2 from anywhere in D.
  const Domain d = Domain::interval(0.0, 1.0);
  const std::vector<double> ts{0.25, 1.0, 3.0};
  const ShcCurve c = estimate_Q(wide_uniform(), d, ts, 40'000, 2);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double exact = std::exp(-ts[i] / 2.0);
    CHECK(std::abs(c.estimates[i].mean - exact) <= 3.0 * c.estimates[i].std_error);
  }
}

TEST_CASE("heat content is nonincreasing in t") {
  const ProcessSpec spec(1.0, JumpDensity::gaussian(2, 0.4));
  const Domain d = Domain::ball(make_vec({0, 0}), 0.7);
  const ShcCurve c = estimate_Q(spec, d, {0.0, 0.5, 1.0, 1.5, 2.0, 4.0}, 5000, 3);
  for (std::size_t i = 1; i < c.estimates.size(); ++i) CHECK(c.estimates[i].mean <= c.estimates[i - 1].mean);
  CHECK_THROWS_AS(estimate_Q(spec, d, {1.0}, 10, 3), PreconditionError);
  CHECK_THROWS_AS(estimate_Q(spec, d, {-1.0}, 1000, 3), PreconditionError);
}

TEST_CASE("stay integrals") {
  const Domain d = Domain::interval(0.0, 1.0);
  const auto q = QuadratureSpec::monte_carlo(100'000, 4);
  // n = 1 is alpha |D|; for jumps on (-1/4, 1/4) that is the band fraction 7/8.
  const auto one = stay_integral(d, JumpDensity::uniform_on(Domain::interval(-0.25, 0.25)), 1, q);
  CHECK(std::abs(one.mean - 0.875) <= 3.0 * one.std_error);
  // With D - D inside A every step keeps the chain with probability 1/2.
  const auto two = stay_integral(d, JumpDensity::uniform_on(Domain::interval(-1.0, 1.0)), 2, q);
  CHECK(std::abs(two.mean - 0.25) <= 3.0 * two.std_error);
  const auto zero = stay_integral(d, JumpDensity::gaussian(1, 0.5), 0, q);
  CHECK(zero.mean == 1.0);
  CHECK(zero.std_error == 0.0);
  CHECK_THROWS_AS(stay_integral(d, JumpDensity::gaussian(1, 0.5), 1, QuadratureSpec::grid(64)), PreconditionError);

  const auto profile = stay_integral_profile(d, JumpDensity::gaussian(1, 0.5), 8, 20'000, 5);
  for (std::size_t n = 1; n < profile.size(); ++n) CHECK(profile[n].mean <= profile[n - 1].mean);
}

TEST_CASE("binomial standard error never collapses to zero at the edges") {
  CHECK(binomial_stderr(0, 1000) > 0.0);
  CHECK(binomial_stderr(1000, 1000) > 0.0);
  CHECK(binomial_stderr(500, 1000) == doctest::Approx(std::sqrt(0.25 / 1000)));
  CHECK_THROWS_AS(binomial_stderr(0, 0), PreconditionError);
}

TEST_CASE("Poisson truncation against the regularized gamma tail") {
  for (double mean : {0.5, 2.0, 10.0, 50.0}) {
    const std::size_t n = poisson_truncation(mean, 1e-8);
    // P(N > n) = P(Gamma(n + 1) < mean).
    CHECK(boost::math::gamma_p(static_cast<double>(n + 1), mean) < 1e-8);
    if (n > 0) CHECK(boost::math::gamma_p(static_cast<double>(n), mean) >= 1e-8 * 0.999);
  }
  CHECK(poisson_truncation(0.0, 1e-6) == 0);
  CHECK_THROWS_AS(poisson_truncation(20'000.0, 1e-6), NumericalError);
}

TEST_CASE("series agrees with the closed form") {
  const Domain d = Domain::interval(0.0, 1.0);
  for (double t : {0.5, 2.0}) {
    const auto s = q_series(wide_uniform(), d, t, 1e-6, QuadratureSpec::monte_carlo(100'000, 6));
    CHECK(std::abs(s.value - std::exp(-t / 2.0)) <= 3.0 * s.std_error + s.truncation_bound);
  }
  CHECK_THROWS_AS(q_series(wide_uniform(), d, 1.0, 1e-2, QuadratureSpec::monte_carlo(1000, 6)), PreconditionError);
}

TEST_CASE("decay-rate fit") {
  ShcCurve c;
  c.volume = 2.0;
  for (double t : {0.0, 1.0, 2.0, 3.0, 4.0}) {
    c.times.push_back(t);
    c.estimates.push_back(EstimateCI{2.0 * std::exp(-0.3 * t), 1e-4, 1000, 0});
  }
  const LambdaFit fit = lambda_from_shc(c);
  CHECK(fit.lambda == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(fit.intercept == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(fit.points_used == 4);  // t = 0 is excluded

  ShcCurve short_curve = c;
  short_curve.times.resize(3);
  short_curve.estimates.resize(3);
  CHECK_THROWS_AS(lambda_from_shc(short_curve), NumericalError);
}

TEST_CASE("path simulation is independent of the worker count") {
  const ProcessSpec spec(2.0, JumpDensity::gaussian(2, 0.3));
  const Domain d = Domain::box(make_vec({0, 0}), make_vec({1, 2}));
  set_worker_count(1);
  const ShcCurve a = estimate_Q(spec, d, {0.5, 1.0, 2.0}, 20'000, 8);
  set_worker_count(3);
  const ShcCurve b = estimate_Q(spec, d, {0.5, 1.0, 2.0}, 20'000, 8);
  set_worker_count(1);
  for (std::size_t i = 0; i < a.estimates.size(); ++i) {
    CHECK(a.estimates[i].mean == b.estimates[i].mean);
    CHECK(a.estimates[i].std_error == b.estimates[i].std_error);
  }
}
