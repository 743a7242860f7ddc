#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "cpe/geometry.hpp"
#include "cpe/jump_models.hpp"

namespace cpe {

enum class QuadratureMethod { grid_midpoint, monte_carlo };

/// How a double integral over D x D is evaluated.
///
/// Grid: midpoint rule on `resolution` cells per axis of the bounding box (a
/// GridSet uses its own lattice). Each cell is weighted by the fraction of
/// `coverage_subsamples`^d sub-cell centers inside D, and the kernel between
/// two cells is averaged over `kernel_subsamples` offsets per axis. The error
/// estimate is the change under halving the resolution.
///
/// Monte Carlo: `resolution` uniform pairs, drawn from streams keyed by `seed`.
struct QuadratureSpec {
  QuadratureMethod method = QuadratureMethod::grid_midpoint;
  std::size_t resolution = 128;
  std::uint64_t seed = 0;
  int coverage_subsamples = 4;
  int kernel_subsamples = 4;

  static constexpr std::size_t kMinGridCells = 16;
  static constexpr std::size_t kMinSamples = 1000;

  static QuadratureSpec grid(std::size_t cells_per_axis);
  static QuadratureSpec monte_carlo(std::size_t samples, std::uint64_t seed);

  void validate() const;
  std::string method_name() const;
};

struct AlphaResult {
  double alpha = 0.0;
  /// Halving difference (grid) or standard error (Monte Carlo).
  double error = 0.0;
  /// Volume of D as seen by the quadrature (coverage-weighted for grids).
  double volume = 0.0;
  bool saturated = false;
};

/// Mean probability that one jump started uniformly in D lands in D:
/// alpha = (1/|D|) ∫_D ∫_D j(y - x) dy dx.
AlphaResult alpha(const Domain& d, const JumpDensity& j, const QuadratureSpec& q);

enum class ConditionWaiver { none, waived };

struct EigenvalueResult {
  double lambda1 = 0.0;
  double alpha = 0.0;
  double error = 0.0;
  double rate = 0.0;
  std::string method;
  bool waived = false;
  bool saturated = false;
  std::string interpretation;
};

/// λ1 = (r/|D|) ∫_D ∫_{D^c} j(y - x) dy dx, evaluated as r (1 - alpha).
/// Unless waived, the jump law must pass validate_condition.
EigenvalueResult principal_eigenvalue(const ProcessSpec& spec, const Domain& d, const QuadratureSpec& q,
                                      ConditionWaiver waiver = ConditionWaiver::none);

/// r (1 - |D|/|A|) when D - D ⊂ A; empty otherwise.
std::optional<double> closed_form_uniform(double rate, const Domain& d, const Domain& a);

struct FaberKrahnGap {
  EigenvalueResult original;
  EigenvalueResult symmetrized;
  double gap = 0.0;
  double error = 0.0;

  /// gap >= -error, the inequality up to quadrature error.
  bool consistent(double sigmas = 1.0) const { return gap >= -sigmas * error; }
};

/// Compares λ1 of (X, D) with λ1 of the symmetrized problem (X*, D*).
FaberKrahnGap faber_krahn_gap(const ProcessSpec& spec, const Domain& d, const QuadratureSpec& q,
                              ConditionWaiver waiver = ConditionWaiver::none);

}  // namespace cpe
