#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpe/eigenvalue.hpp"
#include "cpe/geometry.hpp"
#include "cpe/jump_models.hpp"

namespace cpe {

/// A Monte Carlo estimate with its standard error.
struct EstimateCI {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
};

/// Standard error of a binomial proportion k/n. Uses the Wald form when
/// 0 < k < n and the Agresti-Coull form when k is 0 or n, where the Wald
/// form degenerates to zero.
double binomial_stderr(std::size_t k, std::size_t n);

/// Spectral heat content t -> ∫_D P_x(τ_D > t) dx sampled on a time grid.
struct ShcCurve {
  std::vector<double> times;
  std::vector<EstimateCI> estimates;
  double volume = 0.0;
  std::string process;
  std::string domain;
  std::string method;
};

inline constexpr std::size_t kMinPaths = 100;

/// One path from a uniform start in D: true iff every jump chain position
/// visited by time t stays in D.
bool survive_one_path(const ProcessSpec& spec, const Domain& d, double t, Engine& eng);

/// Q_D(t) by path simulation. Each path is simulated once up to max(times)
/// and its exit time is compared with every t, so the curve is exactly
/// nonincreasing in t.
ShcCurve estimate_Q(const ProcessSpec& spec, const Domain& d, const std::vector<double>& times,
                    std::size_t n_paths, std::uint64_t seed);

/// ∫_D A(x, n, D) dx for n = 0..n_max from one set of jump chains (chain
/// counts are shared across n, so the profile is exactly nonincreasing).
std::vector<EstimateCI> stay_integral_profile(const Domain& d, const JumpDensity& j, std::size_t n_max,
                                              std::size_t n_chains, std::uint64_t seed,
                                              StreamSalt salt = StreamSalt::stay_chains);

/// ∫_D A(x, n, D) dx, where A(x, n, D) is the probability that the first n
/// chain positions from x stay in D. Requires Monte Carlo quadrature.
EstimateCI stay_integral(const Domain& d, const JumpDensity& j, std::size_t n, const QuadratureSpec& q);

/// Smallest N whose Poisson(mean) tail mass P(N' > N) is below tail_tol.
std::size_t poisson_truncation(double mean, double tail_tol);

inline constexpr std::size_t kMaxSeriesTerms = 10'000;

struct SeriesEstimate {
  double value = 0.0;
  double std_error = 0.0;
  /// |D| * tail_tol, a bound on the bias from dropping terms beyond `terms`.
  double truncation_bound = 0.0;
  std::size_t terms = 0;
  std::size_t n_chains = 0;

  double error() const { return std_error + truncation_bound; }
};

/// Q_D(t) from the jump decomposition, truncated once the Poisson tail falls
/// below tail_tol. The stay integrals share one set of chains.
SeriesEstimate q_series(const ProcessSpec& spec, const Domain& d, double t, double tail_tol,
                        const QuadratureSpec& q);

struct LambdaFit {
  double lambda = 0.0;
  double lambda_stderr = 0.0;
  double intercept = 0.0;
  double chi2 = 0.0;
  std::size_t points_used = 0;
  double max_rel_ci_width = 0.0;
  bool weighted = false;
  std::vector<double> times_used;
  std::vector<double> residuals;
};

inline constexpr double kDefaultCiWindow = 0.2;
inline constexpr std::size_t kMinFitPoints = 4;

/// Decay rate of an SHC curve: weighted least-squares slope of
/// -log(Q/|D|) against t over the points with t > 0 whose 95% interval is
/// narrower than max_rel_ci_width of the estimate.
LambdaFit lambda_from_shc(const ShcCurve& curve, double max_rel_ci_width = kDefaultCiWindow);

}  // namespace cpe
