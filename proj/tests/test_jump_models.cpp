#include <cmath>
#include <numbers>

#include "doctest.h"

#include "cpe/error.hpp"
#include "cpe/jump_models.hpp"

using namespace cpe;

TEST_CASE("uniform jump density") {
  const JumpDensity j = JumpDensity::uniform_on(Domain::interval(-0.25, 0.25));
  CHECK(j.density(make_vec({0.1})) == doctest::Approx(2.0));
  CHECK(j.density(make_vec({0.3})) == 0.0);
  CHECK(j.sup() == doctest::Approx(2.0));
  CHECK_THROWS_AS(j.density(make_vec({0.1, 0.1})), DimensionMismatch);
  Engine eng(3);
  for (int i = 0; i < 1000; ++i) CHECK(std::abs(j.sample(eng)[0]) < 0.25);
}

TEST_CASE("gaussian density and moments") {
  const JumpDensity j = JumpDensity::gaussian(2, 0.5);
  CHECK(j.density(make_vec({0, 0})) == doctest::Approx(1.0 / (2.0 * std::numbers::pi * 0.25)));
  Engine eng(4);
  double s2 = 0.0;
  const int n = 100'000;
  for (int i = 0; i < n; ++i) s2 += j.sample(eng).squaredNorm();
  // E|J|^2 = d sigma^2 = 0.5, Var |J|^2 = 2 d sigma^4 = 0.25.
  CHECK(std::abs(s2 / n - 0.5) < 4.0 * std::sqrt(0.25 / n));
  CHECK_THROWS_AS(JumpDensity::gaussian(2, 0.0), PreconditionError);
}

TEST_CASE("radial exponential profile") {
  const auto profile = jump::RadialDecreasing::exponential(1, 0.3);
  // In 1D the normalizer is 2 * scale.
  CHECK(profile.normalizer() == doctest::Approx(0.6).epsilon(1e-6));
  const JumpDensity j = JumpDensity::radial(profile);
  CHECK(j.density(make_vec({0.0})) == doctest::Approx(1.0 / 0.6).epsilon(1e-6));
  Engine eng(5);
  double mean_abs = 0.0;
  const int n = 100'000;
  for (int i = 0; i < n; ++i) mean_abs += std::abs(j.sample(eng)[0]);
  // |J| ~ Exp(mean 0.3), standard deviation 0.3.
  CHECK(std::abs(mean_abs / n - 0.3) < 4.0 * 0.3 / std::sqrt(n));
}

TEST_CASE("radial profile must be nonincreasing") {
  CHECK_THROWS_AS(jump::RadialDecreasing(1, [](double r) { return r; }, 1.0, "ramp"), PreconditionError);
}

TEST_CASE("condition validation") {
  const auto ok = validate_condition(ProcessSpec(1.0, JumpDensity::gaussian(1, 0.5)));
  CHECK(ok.passed());
  CHECK(ok.variance == doctest::Approx(0.25).epsilon(0.02));

  const auto skewed = validate_condition(ProcessSpec(1.0, JumpDensity::uniform_on(Domain::interval(0.0, 1.0))));
  CHECK_FALSE(skewed.symmetry.passed);
  CHECK_FALSE(skewed.mean_zero.passed);
  CHECK_FALSE(skewed.passed());

  CHECK_THROWS_AS(ProcessSpec(0.0, JumpDensity::gaussian(1, 1.0)), PreconditionError);
}

TEST_CASE("rearranged and transformed densities") {
  const JumpDensity j = JumpDensity::uniform_on(Domain::box(make_vec({-1, -1}), make_vec({3, 0})));
  const JumpDensity js = rearranged_density(j);
  const auto* u = std::get_if<jump::UniformOnSet>(&js.kind());
  REQUIRE(u != nullptr);
  CHECK(u->support.volume() == doctest::Approx(4.0));
  CHECK(js.density(make_vec({0, 0})) == doctest::Approx(0.25));

  Mat rot(2, 2);
  rot << 0.0, -1.0, 1.0, 0.0;
  const JumpDensity g = transformed_density(JumpDensity::gaussian(2, 0.5), rot);
  CHECK(g.density(make_vec({0.1, 0.2})) == doctest::Approx(JumpDensity::gaussian(2, 0.5).density(make_vec({0.1, 0.2}))));

  Mat shear(2, 2);
  shear << 1.0, 1.0, 0.0, 1.0;
  CHECK_THROWS_AS(transformed_density(JumpDensity::gaussian(2, 0.5), shear), PreconditionError);
  const JumpDensity ju = transformed_density(j, shear);
  CHECK(ju.density(shear * make_vec({1.0, -0.5})) == doctest::Approx(0.25));
}
