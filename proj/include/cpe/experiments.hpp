#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cpe/eigenvalue.hpp"
#include "cpe/geometry.hpp"
#include "cpe/jump_models.hpp"
#include "cpe/shc.hpp"

namespace cpe {

enum class EqualityRegime {
  /// D = a + b E and A = c E for one centered ellipsoid E, with |A| < 2^d |D|.
  ellipsoid_congruent,
  /// |A| >= 2^d |D| and D - D ⊂ A: closed-form heat content.
  large_support,
  /// A declared non-equality pair; the check expects a strict gap.
  control,
};

std::string regime_name(EqualityRegime regime);
EqualityRegime parse_regime(const std::string& name);

/// A domain D and a jump support A, with the uniform jump law on A.
struct EqualityCaseSpec {
  EqualityRegime regime = EqualityRegime::control;
  Domain d;
  Domain a;

  /// D = shift + d_scale E, A = a_scale E, where E = {x : x^T form x < 1}.
  static EqualityCaseSpec ellipsoid(const Mat& form, const Vec& shift, double d_scale, double a_scale);
  static EqualityCaseSpec large_support(const Domain& d, const Domain& a);
  static EqualityCaseSpec control(const Domain& d, const Domain& a);

  /// Throws PreconditionError when the regime's volume condition fails.
  void validate() const;
};

struct EqualityRow {
  double t = 0.0;
  EstimateCI original;
  EstimateCI symmetrized;
  double gap = 0.0;    // Q_{D*}(t) - Q_D(t)
  double sigma = 0.0;  // combined standard error
  std::optional<double> closed_form;
  bool passed = false;
};

struct EqualityReport {
  EqualityRegime regime = EqualityRegime::control;
  std::vector<EqualityRow> rows;
  bool passed = false;
  std::string summary;
};

/// Estimates Q for (X, D) and (X*, D*) at every t. Equality regimes pass when
/// every row agrees within 3 sigma (and, for large support, both sides match
/// the closed form within 3 sigma). Controls pass when some row has a gap
/// beyond 3 sigma.
EqualityReport equality_case_check(const EqualityCaseSpec& spec, double rate, const std::vector<double>& times,
                                   std::size_t n_paths, std::uint64_t seed);

struct NonuniquenessOptions {
  std::vector<double> times{0.5, 1.0, 2.0, 3.0, 4.0};
  std::size_t n_paths = 100'000;
  double tolerance = 0.05;  // relative, for the simulated decay rates
};

struct NonuniquenessSide {
  std::string domain;
  double closed_form = 0.0;
  LambdaFit fit;
  double relative_error = 0.0;
};

struct NonuniquenessReport {
  NonuniquenessSide first;
  NonuniquenessSide second;
  bool closed_forms_equal = false;
  bool passed = false;
};

/// Two domains of equal volume whose differences fit in A share the minimal
/// eigenvalue r (1 - |D|/|A|). Throws PreconditionError when the volumes
/// differ by more than 1e-9 (relative) or either self-difference check fails.
NonuniquenessReport nonuniqueness_counterexample(double rate, const Domain& a, const Domain& d1, const Domain& d2,
                                                 std::uint64_t seed,
                                                 const NonuniquenessOptions& options = NonuniquenessOptions{});

struct FkRow {
  std::size_t input_index = 0;
  std::string domain;
  double lambda = 0.0;
  double lambda_symmetrized = 0.0;
  double gap = 0.0;
  double error = 0.0;
  bool consistent = false;  // gap >= -3 error
  bool strict = false;      // gap > 3 error
};

/// λ1 of each shape against the symmetrized problem, sorted by gap (ties keep
/// input order). All shapes must share one volume within 1e-6 relative.
std::vector<FkRow> fk_sweep(const ProcessSpec& spec, const std::vector<Domain>& shapes, const QuadratureSpec& q,
                            ConditionWaiver waiver = ConditionWaiver::none);

}  // namespace cpe
