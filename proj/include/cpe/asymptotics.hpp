#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cpe/geometry.hpp"
#include "cpe/jump_models.hpp"
#include "cpe/shc.hpp"

namespace cpe {

/// (1/|D|) ∫_D e^{iξ·w} dw, in closed form for every shape.
std::complex<double> uniform_fourier(const Domain& d, const Vec& xi);

struct ComplexEstimate {
  std::complex<double> mean;
  /// sqrt(Var cos + Var sin) / sqrt(n): the radius scale of the complex error.
  double std_error = 0.0;
  std::size_t n_accepted = 0;
  std::size_t n_simulated = 0;
  double acceptance_rate = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr double kMinAcceptanceRate = 1e-4;
inline constexpr std::size_t kDefaultMaxSteps = 50;
inline constexpr std::size_t kDefaultAccepted = 10'000;

/// Endpoints S_n of chains from x that satisfy S_n ∈ D, by rejection. The
/// first n_accepted acceptances in block order are kept, so the sample set
/// does not depend on the worker count. Throws NumericalError when the
/// acceptance rate falls below kMinAcceptanceRate.
struct ConditionedEndpoints {
  std::vector<Vec> points;
  std::size_t n_simulated = 0;
  double acceptance_rate = 0.0;
};
ConditionedEndpoints conditioned_endpoints(const JumpDensity& j, const Domain& d, const Vec& x, std::size_t n,
                                           std::size_t n_accepted, std::uint64_t seed);

/// E_x[e^{iξ·S_n} | S_n ∈ D] by rejection.
ComplexEstimate conditional_charfun(const JumpDensity& j, const Domain& d, const Vec& x, std::size_t n,
                                    const Vec& xi, std::size_t n_accepted, std::uint64_t seed);

/// Same estimate for several frequencies from one set of endpoints.
std::vector<ComplexEstimate> conditional_charfun(const JumpDensity& j, const Domain& d, const Vec& x,
                                                 std::size_t n, const std::vector<Vec>& xis,
                                                 std::size_t n_accepted, std::uint64_t seed);

enum class ContainmentMethod {
  /// Independent populations of chains. Chains that leave D are replaced by
  /// copies of survivors after every step; the spread over populations gives
  /// the standard error.
  population,
  /// Plain rejection on the event {S_1, ..., S_n ∈ D}; aborts below
  /// kMinAcceptanceRate.
  rejection,
};

struct ContainmentEstimate {
  EstimateCI estimate;
  /// Rejection: accepted / simulated. Population: the estimated probability
  /// that a chain stays n steps, as a product of per-step survival fractions.
  double acceptance_rate = 0.0;
  ContainmentMethod method = ContainmentMethod::population;
};

inline constexpr std::size_t kPopulationReplicates = 16;

/// P_x(S_{n+1} ∈ D | S_1, ..., S_n ∈ D). With the population method,
/// n_accepted is the total particle count over all replicates.
ContainmentEstimate conditional_containment(const JumpDensity& j, const Domain& d, const Vec& x, std::size_t n,
                                            std::size_t n_accepted, std::uint64_t seed,
                                            ContainmentMethod method = ContainmentMethod::population);

/// Starting points for the lemma harness: the bounding-box center and the
/// center moved to 5% of the extent from the low face on the first axis.
/// Points outside D are dropped.
std::vector<Vec> default_start_points(const Domain& d);

struct LemmaRow {
  std::string lemma;
  std::size_t n = 0;
  std::optional<double> xi;
  double estimate_re = 0.0;
  double estimate_im = 0.0;
  double std_error = 0.0;
  double target_re = 0.0;
  double target_im = 0.0;
  double acceptance_rate = 0.0;
  /// Largest |estimate - target| over the start points; the row reports that point.
  double deviation = 0.0;
};

struct LemmaPlan {
  std::vector<std::size_t> charfun_steps{2, 5, 20, 50};
  std::vector<double> frequencies;  // scalar frequencies along the first axis; default {π, 2π, 3π}
  std::vector<std::size_t> containment_steps{0, 2, 5, 20};
  std::size_t n_accepted = kDefaultAccepted;
  std::size_t max_steps = kDefaultMaxSteps;
};

/// Rows for both lemmas, reporting the worst start point for each (lemma, n, ξ).
std::vector<LemmaRow> lemma_report(const JumpDensity& j, const Domain& d, const LemmaPlan& plan,
                                   std::uint64_t seed);

}  // namespace cpe
