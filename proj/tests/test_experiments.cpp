#include <cmath>
#include <numbers>

#include "doctest.h"

#include "cpe/error.hpp"
#include "cpe/experiments.hpp"

using namespace cpe;

namespace {

Domain square() { return Domain::box(make_vec({0, 0}), make_vec({1, 1})); }
Domain big_a() { return Domain::box(make_vec({-4, -4}), make_vec({4, 4})); }

}  // namespace

TEST_CASE("equality case invariants") {
  const Mat unit = Mat::Identity(2, 2);
  const auto ell = EqualityCaseSpec::ellipsoid(unit, make_vec({3, 0}), 0.5, 0.9);
  CHECK(ell.d.volume() == doctest::Approx(0.25 * std::numbers::pi));
  CHECK(ell.a.volume() == doctest::Approx(0.81 * std::numbers::pi));
  // |A| >= 4 |D| belongs to the other regime.
  CHECK_THROWS_AS(EqualityCaseSpec::ellipsoid(unit, make_vec({0, 0}), 0.5, 1.2), PreconditionError);
  CHECK_THROWS_AS(EqualityCaseSpec::ellipsoid(unit, make_vec({0, 0}), -0.5, 0.9), PreconditionError);
  CHECK_THROWS_AS(EqualityCaseSpec::large_support(square(), Domain::box(make_vec({-0.9, -0.9}), make_vec({0.9, 0.9}))),
                  PreconditionError);
  // Volume is large enough but D - D is not inside A.
  CHECK_THROWS_AS(
      EqualityCaseSpec::large_support(Domain::box(make_vec({0, 0}), make_vec({8, 0.125})), big_a()),
      PreconditionError);

  EqualityCaseSpec bad{EqualityRegime::ellipsoid_congruent, square(), Domain::ball(make_vec({0, 0}), 0.7)};
  CHECK_THROWS_AS(bad.validate(), PreconditionError);
  CHECK(parse_regime(regime_name(EqualityRegime::large_support)) == EqualityRegime::large_support);
  CHECK_THROWS_AS(parse_regime("ellipse"), PreconditionError);
}

TEST_CASE("ellipsoid regime: D and D* share the heat content") {
  const auto spec = EqualityCaseSpec::ellipsoid(Mat::Identity(2, 2), make_vec({3, 0}), 0.5, 0.9);
  const auto report = equality_case_check(spec, 1.0, {0.0, 0.5, 1.0, 2.0}, 20'000, 1);
  CHECK(report.passed);
  CHECK(report.rows[0].gap == 0.0);
}

TEST_CASE("large-support regime matches the closed form") {
  const auto spec = EqualityCaseSpec::large_support(square(), big_a());
  const auto report = equality_case_check(spec, 1.0, {0.5, 1.0, 2.0}, 20'000, 2);
  CHECK(report.passed);
  for (const auto& row : report.rows) {
    REQUIRE(row.closed_form.has_value());
    CHECK(*row.closed_form == doctest::Approx(std::exp(-63.0 * row.t / 64.0)));
  }
}

TEST_CASE("square control shows a strict gap") {
  const auto spec = EqualityCaseSpec::control(square(), Domain::box(make_vec({-0.4, -0.4}), make_vec({0.4, 0.4})));
  const auto report = equality_case_check(spec, 1.0, {1.0, 2.0}, 100'000, 3);
  CHECK(report.passed);
}

TEST_CASE("non-uniqueness preconditions") {
  CHECK_THROWS_AS(nonuniqueness_counterexample(1.0, big_a(), square(),
                                               Domain::box(make_vec({0, 0}), make_vec({8, 0.125})), 1),
                  PreconditionError);
  CHECK_THROWS_AS(
      nonuniqueness_counterexample(1.0, big_a(), square(), Domain::box(make_vec({0, 0}), make_vec({2, 0.6})), 1),
      PreconditionError);
}

TEST_CASE("non-uniqueness: two rectangles share the minimal eigenvalue") {
  NonuniquenessOptions opt;
  opt.n_paths = 20'000;
  const auto r = nonuniqueness_counterexample(1.0, big_a(), square(),
                                              Domain::box(make_vec({0, 0}), make_vec({2, 0.5})), 4, opt);
  CHECK(r.closed_forms_equal);
  CHECK(r.first.closed_form == 63.0 / 64.0);
  CHECK(r.passed);
}

TEST_CASE("Faber-Krahn sweep") {
  const ProcessSpec spec(1.0, JumpDensity::gaussian(2, 0.5));
  const double r = std::sqrt(1.0 / std::numbers::pi);
  const std::vector<Domain> shapes{Domain::box(make_vec({0, 0}), make_vec({2, 0.5})), square(),
                                   Domain::ball(make_vec({0, 0}), r)};
  const auto rows = fk_sweep(spec, shapes, QuadratureSpec::grid(32));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].input_index == 2);
  CHECK(rows[0].gap == 0.0);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].gap >= rows[i - 1].gap);
    CHECK(rows[i].strict);
  }

  const ProcessSpec line(1.0, JumpDensity::gaussian(1, 0.5));
  const auto single = fk_sweep(line, {Domain::interval(2.0, 3.0)}, QuadratureSpec::grid(256));
  CHECK(std::abs(single[0].gap) <= single[0].error + 1e-12);

  CHECK_THROWS_AS(fk_sweep(spec, {square(), Domain::ball(make_vec({0, 0}), 0.5)}, QuadratureSpec::grid(32)),
                  PreconditionError);
}
