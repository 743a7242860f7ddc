#include <cmath>
#include <numbers>

#include "doctest.h"

#include "cpe/asymptotics.hpp"
#include "cpe/error.hpp"
#include "cpe/parallel.hpp"

using namespace cpe;

namespace {

constexpr double kPi = std::numbers::pi;

/// Midpoint-rule transform of 1_D over its bounding box, the quadrature oracle.
std::complex<double> fourier_by_grid(const Domain& d, const Vec& xi, int n) {
  const BoundingBox& b = d.bounds();
  std::complex<double> sum = 0.0;
  std::size_t inside = 0;
  Vec p(2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      p[0] = b.lo[0] + (i + 0.5) * (b.hi[0] - b.lo[0]) / n;
      p[1] = b.lo[1] + (j + 0.5) * (b.hi[1] - b.lo[1]) / n;
      if (!d.contains(p)) continue;
      sum += std::polar(1.0, xi.dot(p));
      ++inside;
    }
  }
  return sum / static_cast<double>(inside);
}

}  // namespace

TEST_CASE("normalized Fourier transform of indicators") {
  const Domain iv = Domain::interval(-1.0, 1.0);
  CHECK(std::abs(uniform_fourier(iv, make_vec({0.0})) - 1.0) < 1e-15);
  CHECK(std::abs(uniform_fourier(iv, make_vec({kPi}))) < 1e-15);
  CHECK(uniform_fourier(iv, make_vec({kPi / 2})).real() == doctest::Approx(2.0 / kPi));

  Mat q(2, 2);
  q << 3.0, 0.5, 0.5, 1.0;
  Mat shear(2, 2);
  shear << 1.0, 0.8, 0.0, 1.0;
  const std::vector<Domain> shapes{
      Domain::box(make_vec({0, 0}), make_vec({2, 0.5})),
      Domain::ball(make_vec({0.5, -0.3}), 0.8),
      Domain::ellipsoid(make_vec({1, 1}), q),
      Domain::translate(Domain::ball(make_vec({0, 0}), 0.5), make_vec({2, 0})),
      apply_linear(Domain::box(make_vec({0, 0}), make_vec({1, 1})), shear),
  };
  const Vec xi = make_vec({2.3, -1.1});
  for (const Domain& d : shapes) {
    INFO(d.describe());
    CHECK(std::abs(uniform_fourier(d, make_vec({0, 0})) - 1.0) < 1e-12);
    CHECK(std::abs(uniform_fourier(d, xi) - fourier_by_grid(d, xi, 800)) < 5e-3);
  }

  // A cell-aligned grid set is the same set as the box.
  const Domain g = rasterize(Domain::box(make_vec({0, 0}), make_vec({2, 0.5})), 16);
  CHECK(std::abs(uniform_fourier(g, xi) - uniform_fourier(shapes[0], xi)) < 1e-12);

  // 3D ball against the closed form at |ξ| R = 1.
  const Domain b3 = Domain::ball(make_vec({0, 0, 0}), 0.5);
  const double u = 1.0;
  CHECK(uniform_fourier(b3, make_vec({2.0, 0, 0})).real() ==
        doctest::Approx(3.0 * (std::sin(u) - u * std::cos(u)) / (u * u * u)));
}

TEST_CASE("conditional characteristic function") {
  const Domain d = Domain::interval(0.0, 1.0);
  const JumpDensity wide = JumpDensity::uniform_on(Domain::interval(-1.0, 1.0));
  const auto one = conditional_charfun(wide, d, make_vec({0.0}), 1, make_vec({0.0}), 5000, 1);
  CHECK(one.mean == std::complex<double>(1.0, 0.0));
  CHECK(one.std_error == 0.0);

  // S_1 given S_1 in D is uniform on (0,1): ∫_0^1 e^{iπw} dw = 2i/π.
  const auto est = conditional_charfun(wide, d, make_vec({0.0}), 1, make_vec({kPi}), 20'000, 2);
  CHECK(std::abs(est.mean - std::complex<double>(0.0, 2.0 / kPi)) <= 3.0 * est.std_error);
  CHECK(est.acceptance_rate == doctest::Approx(0.5).epsilon(0.03));
  CHECK(std::abs(est.mean) <= 1.0 + est.std_error);

  CHECK_THROWS_AS(conditional_charfun(wide, d, make_vec({0.0}), 0, make_vec({kPi}), 100, 2), PreconditionError);
  // Ending inside a tiny window is too rare for rejection sampling.
  CHECK_THROWS_AS(conditional_charfun(JumpDensity::gaussian(1, 1.0), Domain::interval(0.0, 1e-5), make_vec({0.0}),
                                      3, make_vec({kPi}), 100, 2),
                  NumericalError);
}

TEST_CASE("conditional containment") {
  const Domain d = Domain::interval(0.0, 1.0);
  const JumpDensity wide = JumpDensity::uniform_on(Domain::interval(-1.0, 1.0));
  const auto start = conditional_containment(wide, d, make_vec({0.0}), 0, 20'000, 3);
  CHECK(std::abs(start.estimate.mean - 0.5) <= 3.0 * start.estimate.std_error);

  // With D - D inside A the conditional probability is |D|/|A| at every depth.
  for (std::size_t n : {1, 3, 6}) {
    const auto pop = conditional_containment(wide, d, make_vec({0.5}), n, 32'000, 4 + n);
    CHECK(std::abs(pop.estimate.mean - 0.5) <= 3.0 * pop.estimate.std_error);
    CHECK(pop.acceptance_rate == doctest::Approx(std::pow(0.5, n)).epsilon(0.1));
  }
  const auto rej = conditional_containment(wide, d, make_vec({0.5}), 3, 20'000, 9, ContainmentMethod::rejection);
  CHECK(std::abs(rej.estimate.mean - 0.5) <= 3.0 * rej.estimate.std_error);
  CHECK(rej.acceptance_rate == doctest::Approx(0.125).epsilon(0.05));

  const JumpDensity far = JumpDensity::uniform_on(Domain::interval(-64.0, 64.0));
  CHECK_THROWS_AS(conditional_containment(far, d, make_vec({0.5}), 3, 1000, 1, ContainmentMethod::rejection),
                  NumericalError);
}

TEST_CASE("lemma estimators do not depend on the worker count") {
  const Domain d = Domain::interval(0.0, 1.0);
  const JumpDensity g = JumpDensity::gaussian(1, 0.5);
  set_worker_count(1);
  const auto a = conditional_charfun(g, d, make_vec({0.5}), 5, make_vec({kPi}), 3000, 4);
  const auto c = conditional_containment(g, d, make_vec({0.5}), 5, 3200, 4);
  set_worker_count(4);
  const auto b = conditional_charfun(g, d, make_vec({0.5}), 5, make_vec({kPi}), 3000, 4);
  const auto e = conditional_containment(g, d, make_vec({0.5}), 5, 3200, 4);
  set_worker_count(1);
  CHECK(a.mean == b.mean);
  CHECK(a.std_error == b.std_error);
  CHECK(c.estimate.mean == e.estimate.mean);
}

TEST_CASE("start points and lemma report") {
  const Domain d = Domain::interval(0.0, 1.0);
  const auto starts = default_start_points(d);
  REQUIRE(starts.size() == 2);
  CHECK(starts[0][0] == doctest::Approx(0.5));
  CHECK(starts[1][0] == doctest::Approx(0.05));

  LemmaPlan plan;
  plan.charfun_steps = {2};
  plan.containment_steps = {0, 2};
  plan.n_accepted = 2000;
  const auto rows = lemma_report(JumpDensity::gaussian(1, 0.5), d, plan, 5);
  CHECK(rows.size() == 3 + 2);
  CHECK(rows.front().xi.has_value());
  CHECK_FALSE(rows.back().xi.has_value());

  plan.charfun_steps = {60};
  CHECK_THROWS_AS(lemma_report(JumpDensity::gaussian(1, 0.5), d, plan, 5), PreconditionError);
}
