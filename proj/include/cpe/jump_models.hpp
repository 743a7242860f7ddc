#pragma once

#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "cpe/geometry.hpp"

namespace cpe {

namespace jump {

/// Jumps uniform on a bounded set A: density 1/|A| on A.
struct UniformOnSet {
  Domain support;
};

struct GaussianIsotropic {
  int dim;
  double sigma;
};

/// j(x) = profile(|x|) / normalizer for |x| < cutoff, zero beyond. The radius
/// is sampled through a monotone inverse-CDF table with linear interpolation.
class RadialDecreasing {
 public:
  static constexpr std::size_t kTableKnots = 1024;

  /// `profile` must be nonincreasing on [0, cutoff). `label` names the profile in output records.
  RadialDecreasing(int dim, std::function<double(double)> profile, double cutoff, std::string label);

  /// exp(-|x| / scale), truncated where the excluded mass is below 1e-12.
  static RadialDecreasing exponential(int dim, double scale);
  /// max(0, 1 - |x| / radius).
  static RadialDecreasing cone(int dim, double radius);

  int dim() const { return dim_; }
  double cutoff() const { return cutoff_; }
  double normalizer() const { return normalizer_; }
  const std::string& label() const { return label_; }

  double density(double radius) const;
  double sample_radius(Engine& eng) const;

 private:
  int dim_;
  std::shared_ptr<const std::function<double(double)>> profile_;
  double cutoff_;
  std::string label_;
  double normalizer_ = 0.0;
  std::vector<double> radius_knots_;
  std::vector<double> cdf_knots_;
};

}  // namespace jump

/// Probability density j of a single jump J_1.
class JumpDensity {
 public:
  using Kind = std::variant<jump::UniformOnSet, jump::GaussianIsotropic, jump::RadialDecreasing>;

  static JumpDensity uniform_on(const Domain& support);
  static JumpDensity gaussian(int dim, double sigma);
  static JumpDensity radial(jump::RadialDecreasing profile);

  int dim() const;
  const Kind& kind() const { return kind_; }

  double density(const Vec& x) const;
  /// Density without the dimension check.
  double density_unchecked(const Vec& x) const;

  Vec sample(Engine& eng) const;

  /// Radius outside of which the density carries less than 1e-12 of its mass.
  double support_radius() const;

  /// Upper bound of j, or +inf if unbounded.
  double sup() const;

  std::string describe() const;

 private:
  explicit JumpDensity(Kind kind) : kind_(std::move(kind)) {}
  Kind kind_;
};

/// Compound Poisson process: jumps distributed as `jump`, arriving at rate `rate`.
struct ProcessSpec {
  ProcessSpec(double rate, JumpDensity jump);

  double rate;
  JumpDensity jump;

  std::string describe() const;
};

/// j*: UniformOnSet(A) becomes UniformOnSet(A*); radial kinds are already symmetric decreasing.
JumpDensity rearranged_density(const JumpDensity& j);

/// Density of M J when J ~ j, for |det M| = 1. Supported for uniform jumps
/// and, when M is orthogonal, for radial kinds.
JumpDensity transformed_density(const JumpDensity& j, const Mat& m);

struct ConditionItem {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  std::string note;
};

struct ConditionReport {
  ConditionItem symmetry;
  ConditionItem mean_zero;
  ConditionItem finite_variance;
  ConditionItem bounded;
  /// Discrete spectrum is never computed; it is implied when j is bounded.
  std::string discrete_spectrum;
  std::vector<double> mean;
  double variance = 0.0;

  bool passed() const { return symmetry.passed && mean_zero.passed && finite_variance.passed && bounded.passed; }
};

inline constexpr std::size_t kValidationSamples = 200'000;

/// Checks the standing assumptions for the eigenvalue formula: symmetric
/// density, zero mean with finite variance, bounded density.
ConditionReport validate_condition(const ProcessSpec& spec, std::size_t samples = kValidationSamples,
                                   std::uint64_t seed = 0x5eed);

}  // namespace cpe
