#include <cmath>
#include <numbers>

#include "doctest.h"

#include "cpe/eigenvalue.hpp"
#include "cpe/error.hpp"
#include "cpe/parallel.hpp"

using namespace cpe;

namespace {

/// alpha for D = (0, L) and uniform jumps on (-a, a): the band
/// {|y - x| < a} inside the square has area 2aL - a^2 (a <= L) or L^2.
double band_alpha(double length, double a) {
  const double area = a <= length ? 2.0 * a * length - a * a : length * length;
  return area / (2.0 * a * length);
}

/// alpha for D = (0, L) and N(0, sigma^2) jumps:
/// (2/L) ∫_0^L (L - u) phi_sigma(u) du in closed form.
double gaussian_interval_alpha(double length, double sigma) {
  const double phi_mass = 0.5 * std::erf(length / (sigma * std::sqrt(2.0)));
  const double first_moment = sigma / std::sqrt(2.0 * std::numbers::pi) *
                              (1.0 - std::exp(-length * length / (2.0 * sigma * sigma)));
  return 2.0 / length * (length * phi_mass - first_moment);
}

}  // namespace

TEST_CASE("alpha for uniform jumps on an interval") {
  const Domain d = Domain::interval(0.0, 1.0);
  const auto wide = alpha(d, JumpDensity::uniform_on(Domain::interval(-1, 1)), QuadratureSpec::grid(512));
  CHECK(wide.alpha == doctest::Approx(band_alpha(1.0, 1.0)).epsilon(1e-4));
  CHECK(wide.alpha == doctest::Approx(0.5).epsilon(1e-4));
  const auto narrow = alpha(d, JumpDensity::uniform_on(Domain::interval(-0.25, 0.25)), QuadratureSpec::grid(2048));
  CHECK(std::abs(narrow.alpha - band_alpha(1.0, 0.25)) < 1e-3);
  CHECK(std::abs(narrow.alpha - 0.875) < 1e-3);
}

TEST_CASE("principal eigenvalue against the band oracle") {
  const ProcessSpec spec(1.0, JumpDensity::uniform_on(Domain::interval(-0.25, 0.25)));
  const auto e = principal_eigenvalue(spec, Domain::interval(0.0, 1.0), QuadratureSpec::grid(2048));
  CHECK(std::abs(e.lambda1 - 0.125) < 1e-3);
  CHECK_FALSE(e.waived);
  CHECK(e.method == "grid-midpoint");
}

TEST_CASE("gaussian alpha: grid and Monte Carlo against the erf closed form") {
  const Domain d = Domain::interval(0.0, 1.0);
  const JumpDensity j = JumpDensity::gaussian(1, 0.5);
  const double exact = gaussian_interval_alpha(1.0, 0.5);
  const auto g = alpha(d, j, QuadratureSpec::grid(1024));
  CHECK(std::abs(g.alpha - exact) < 1e-5);
  const auto mc = alpha(d, j, QuadratureSpec::monte_carlo(200'000, 9));
  CHECK(std::abs(mc.alpha - exact) <= 3.0 * mc.error);
}

TEST_CASE("grid error shrinks with resolution") {
  const Domain d = Domain::ball(make_vec({0, 0}), 0.6);
  const JumpDensity j = JumpDensity::gaussian(2, 0.5);
  const auto coarse = alpha(d, j, QuadratureSpec::grid(16));
  const auto fine = alpha(d, j, QuadratureSpec::grid(64));
  CHECK(fine.error < coarse.error);
  const auto mc = alpha(d, j, QuadratureSpec::monte_carlo(400'000, 2));
  CHECK(std::abs(fine.alpha - mc.alpha) <= 3.0 * mc.error + fine.error);
}

TEST_CASE("closed form in the large-support regime") {
  const Domain a = Domain::box(make_vec({-4, -4}), make_vec({4, 4}));
  const auto one = closed_form_uniform(1.0, Domain::box(make_vec({0, 0}), make_vec({1, 1})), a);
  const auto two = closed_form_uniform(1.0, Domain::box(make_vec({0, 0}), make_vec({2, 0.5})), a);
  REQUIRE(one.has_value());
  REQUIRE(two.has_value());
  CHECK(*one == 63.0 / 64.0);
  CHECK(*one == *two);
  CHECK_FALSE(closed_form_uniform(1.0, Domain::box(make_vec({0, 0}), make_vec({8, 0.125})), a).has_value());

  // Quadrature agrees with the closed form.
  const ProcessSpec spec(1.0, JumpDensity::uniform_on(a));
  const auto e = principal_eigenvalue(spec, Domain::box(make_vec({0, 0}), make_vec({1, 1})), QuadratureSpec::grid(32));
  CHECK(std::abs(e.lambda1 - 63.0 / 64.0) < 1e-9 + e.error);
}

TEST_CASE("translation invariance") {
  const ProcessSpec spec(1.0, JumpDensity::gaussian(2, 0.5));
  const Domain d = Domain::box(make_vec({0, 0}), make_vec({1.5, 0.5}));
  const auto q = QuadratureSpec::grid(48);
  const auto base = principal_eigenvalue(spec, d, q);
  Engine eng(17);
  for (int i = 0; i < 5; ++i) {
    const Vec shift = make_vec({10.0 * uniform01(eng) - 5.0, 10.0 * uniform01(eng) - 5.0});
    const auto moved = principal_eigenvalue(spec, Domain::translate(d, shift), q);
    CHECK(std::abs(moved.lambda1 - base.lambda1) <= base.error + moved.error + 1e-12);
  }
}

TEST_CASE("Monte Carlo alpha does not depend on the worker count") {
  const Domain d = Domain::ball(make_vec({0, 0}), 0.5);
  const JumpDensity j = JumpDensity::gaussian(2, 0.3);
  set_worker_count(1);
  const auto a1 = alpha(d, j, QuadratureSpec::monte_carlo(50'000, 4));
  set_worker_count(4);
  const auto a4 = alpha(d, j, QuadratureSpec::monte_carlo(50'000, 4));
  const auto g4 = alpha(d, j, QuadratureSpec::grid(32));
  set_worker_count(1);
  const auto g1 = alpha(d, j, QuadratureSpec::grid(32));
  CHECK(a1.alpha == a4.alpha);
  CHECK(a1.error == a4.error);
  CHECK(g1.alpha == g4.alpha);
}

TEST_CASE("condition waiver") {
  const ProcessSpec skewed(1.0, JumpDensity::uniform_on(Domain::interval(0.0, 0.5)));
  const Domain d = Domain::interval(0.0, 1.0);
  CHECK_THROWS_AS(principal_eigenvalue(skewed, d, QuadratureSpec::grid(64)), PreconditionError);
  const auto w = principal_eigenvalue(skewed, d, QuadratureSpec::grid(64), ConditionWaiver::waived);
  CHECK(w.waived);
  CHECK(w.interpretation.find("unverified") != std::string::npos);
}

TEST_CASE("quadrature spec validation") {
  CHECK_THROWS_AS(QuadratureSpec::grid(8).validate(), PreconditionError);
  CHECK_THROWS_AS(QuadratureSpec::monte_carlo(10, 0).validate(), PreconditionError);
  CHECK_THROWS_AS(alpha(Domain::interval(0, 1), JumpDensity::gaussian(2, 1.0), QuadratureSpec::grid(32)),
                  DimensionMismatch);
}

TEST_CASE("Faber-Krahn gap on a ball is zero") {
  const ProcessSpec spec(1.0, JumpDensity::gaussian(2, 0.5));
  const auto g = faber_krahn_gap(spec, Domain::ball(make_vec({0, 0}), 0.5), QuadratureSpec::grid(32));
  CHECK(g.gap == 0.0);
  const auto sq = faber_krahn_gap(spec, Domain::box(make_vec({0, 0}), make_vec({2, 0.5})), QuadratureSpec::grid(48));
  CHECK(sq.gap > 3.0 * sq.error);
}
