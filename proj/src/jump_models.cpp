#include "cpe/jump_models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>

#include "cpe/error.hpp"
#include "cpe/parallel.hpp"

namespace cpe {

namespace {

constexpr double kExcludedMass = 1e-12;

double sphere_area(int d) { return d * unit_ball_volume(d); }

Vec random_direction(int d, Engine& eng) {
  std::normal_distribution<double> normal;
  Vec v(d);
  if (d == 1) {
    v[0] = uniform01(eng) < 0.5 ? -1.0 : 1.0;
    return v;
  }
  double norm = 0.0;
  do {
    for (int k = 0; k < d; ++k) v[k] = normal(eng);
    norm = v.norm();
  } while (norm == 0.0);
  return v / norm;
}

}  // namespace

namespace jump {

RadialDecreasing::RadialDecreasing(int dim, std::function<double(double)> profile, double cutoff, std::string label)
    : dim_(dim),
      profile_(std::make_shared<const std::function<double(double)>>(std::move(profile))),
      cutoff_(cutoff),
      label_(std::move(label)) {
  if (dim < 1 || dim > kMaxDim) throw PreconditionError("radial profile dimension out of range");
  if (!(cutoff > 0.0) || !std::isfinite(cutoff)) throw PreconditionError("radial profile cutoff must be positive");

  const auto& phi = *profile_;
  radius_knots_.resize(kTableKnots);
  cdf_knots_.resize(kTableKnots);
  const double surface = sphere_area(dim);
  auto radial_mass = [&](double rho) { return surface * phi(rho) * std::pow(rho, dim - 1); };

  double previous = phi(0.0);
  if (!(previous >= 0.0) || !std::isfinite(previous)) {
    throw PreconditionError("radial profile must be finite and nonnegative at the origin");
  }
  double cumulative = 0.0;
  radius_knots_[0] = 0.0;
  cdf_knots_[0] = 0.0;
  for (std::size_t k = 1; k < kTableKnots; ++k) {
    const double a = cutoff * static_cast<double>(k - 1) / (kTableKnots - 1);
    const double b = cutoff * static_cast<double>(k) / (kTableKnots - 1);
    const double value = phi(b);
    if (value < 0.0 || value > previous * (1.0 + 1e-12)) {
      throw PreconditionError(fmt::format("radial profile '{}' must be nonnegative and nonincreasing", label_));
    }
    previous = value;
    cumulative += boost::math::quadrature::gauss<double, 15>::integrate(radial_mass, a, b);
    radius_knots_[k] = b;
    cdf_knots_[k] = cumulative;
  }
  if (!(cumulative > 0.0)) throw PreconditionError("radial profile has zero mass");
  normalizer_ = cumulative;
  for (double& c : cdf_knots_) c /= cumulative;
  cdf_knots_.back() = 1.0;
}

RadialDecreasing RadialDecreasing::exponential(int dim, double scale) {
  if (!(scale > 0.0)) throw PreconditionError("exponential profile scale must be positive");
  // The radius of an exp(-rho/s) profile is Gamma(d, s) distributed.
  const double cutoff = scale * boost::math::gamma_q_inv(static_cast<double>(dim), kExcludedMass);
  return RadialDecreasing(
      dim, [scale](double rho) { return std::exp(-rho / scale); }, cutoff,
      fmt::format("exponential(scale={:.17g})", scale));
}

RadialDecreasing RadialDecreasing::cone(int dim, double radius) {
  if (!(radius > 0.0)) throw PreconditionError("cone profile radius must be positive");
  return RadialDecreasing(
      dim, [radius](double rho) { return std::max(0.0, 1.0 - rho / radius); }, radius,
      fmt::format("cone(radius={:.17g})", radius));
}

double RadialDecreasing::density(double radius) const {
  if (radius >= cutoff_) return 0.0;
  return (*profile_)(radius) / normalizer_;
}

double RadialDecreasing::sample_radius(Engine& eng) const {
  const double u = uniform01(eng);
  const auto it = std::upper_bound(cdf_knots_.begin(), cdf_knots_.end(), u);
  const std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - cdf_knots_.begin()), kTableKnots - 1);
  const std::size_t lo = hi - 1;
  const double span = cdf_knots_[hi] - cdf_knots_[lo];
  const double w = span > 0.0 ? (u - cdf_knots_[lo]) / span : 0.0;
  return radius_knots_[lo] + w * (radius_knots_[hi] - radius_knots_[lo]);
}

}  // namespace jump

JumpDensity JumpDensity::uniform_on(const Domain& support) { return JumpDensity(jump::UniformOnSet{support}); }

JumpDensity JumpDensity::gaussian(int dim, double sigma) {
  if (dim < 1 || dim > kMaxDim) throw PreconditionError("gaussian dimension out of range");
  if (!(sigma > 0.0)) throw PreconditionError("gaussian sigma must be positive");
  return JumpDensity(jump::GaussianIsotropic{dim, sigma});
}

JumpDensity JumpDensity::radial(jump::RadialDecreasing profile) { return JumpDensity(std::move(profile)); }

int JumpDensity::dim() const {
  return std::visit(
      [](const auto& k) -> int {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, jump::UniformOnSet>) {
          return k.support.dim();
        } else if constexpr (std::is_same_v<K, jump::GaussianIsotropic>) {
          return k.dim;
        } else {
          return k.dim();
        }
      },
      kind_);
}

double JumpDensity::density(const Vec& x) const {
  if (x.size() != dim()) throw DimensionMismatch(dim(), static_cast<int>(x.size()));
  return density_unchecked(x);
}

double JumpDensity::density_unchecked(const Vec& x) const {
  return std::visit(
      [&x](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, jump::UniformOnSet>) {
          return k.support.contains_unchecked(x) ? 1.0 / k.support.volume() : 0.0;
        } else if constexpr (std::is_same_v<K, jump::GaussianIsotropic>) {
          const double s2 = k.sigma * k.sigma;
          return std::exp(-0.5 * x.squaredNorm() / s2) / std::pow(2.0 * std::numbers::pi * s2, 0.5 * k.dim);
        } else {
          return k.density(x.norm());
        }
      },
      kind_);
}

Vec JumpDensity::sample(Engine& eng) const {
  return std::visit(
      [&eng](const auto& k) -> Vec {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, jump::UniformOnSet>) {
          return k.support.sample_uniform(eng);
        } else if constexpr (std::is_same_v<K, jump::GaussianIsotropic>) {
          std::normal_distribution<double> normal(0.0, k.sigma);
          Vec v(k.dim);
          for (int i = 0; i < k.dim; ++i) v[i] = normal(eng);
          return v;
        } else {
          const double radius = k.sample_radius(eng);
          return radius * random_direction(k.dim(), eng);
        }
      },
      kind_);
}

double JumpDensity::support_radius() const {
  return std::visit(
      [](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, jump::UniformOnSet>) {
          const BoundingBox& b = k.support.bounds();
          return b.lo.cwiseAbs().cwiseMax(b.hi.cwiseAbs()).norm();
        } else if constexpr (std::is_same_v<K, jump::GaussianIsotropic>) {
          const boost::math::chi_squared chi2(k.dim);
          return k.sigma * std::sqrt(boost::math::quantile(boost::math::complement(chi2, kExcludedMass)));
        } else {
          return k.cutoff();
        }
      },
      kind_);
}

double JumpDensity::sup() const {
  return std::visit(
      [](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, jump::UniformOnSet>) {
          return 1.0 / k.support.volume();
        } else if constexpr (std::is_same_v<K, jump::GaussianIsotropic>) {
          return std::pow(2.0 * std::numbers::pi * k.sigma * k.sigma, -0.5 * k.dim);
        } else {
          return k.density(0.0);
        }
      },
      kind_);
}

std::string JumpDensity::describe() const {
  return std::visit(
      [](const auto& k) -> std::string {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, jump::UniformOnSet>) {
          return fmt::format("uniform({})", k.support.describe());
        } else if constexpr (std::is_same_v<K, jump::GaussianIsotropic>) {
          return fmt::format("gaussian(d={},sigma={:.17g})", k.dim, k.sigma);
        } else {
          return fmt::format("radial(d={},{})", k.dim(), k.label());
        }
      },
      kind_);
}

ProcessSpec::ProcessSpec(double rate_, JumpDensity jump_) : rate(rate_), jump(std::move(jump_)) {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw PreconditionError("jump rate must be positive and finite");
}

std::string ProcessSpec::describe() const { return fmt::format("cpp(rate={:.17g},{})", rate, jump.describe()); }

JumpDensity rearranged_density(const JumpDensity& j) {
  if (const auto* u = std::get_if<jump::UniformOnSet>(&j.kind())) {
    return JumpDensity::uniform_on(symmetric_rearrangement(u->support));
  }
  return j;
}

JumpDensity transformed_density(const JumpDensity& j, const Mat& m) {
  if (m.rows() != j.dim() || m.cols() != j.dim()) throw DimensionMismatch(j.dim(), static_cast<int>(m.rows()));
  if (const auto* u = std::get_if<jump::UniformOnSet>(&j.kind())) {
    return JumpDensity::uniform_on(apply_linear(u->support, m));
  }
  const Mat gram = m.transpose() * m;
  if (!gram.isApprox(Mat::Identity(j.dim(), j.dim()), 1e-12)) {
    throw PreconditionError("radial jump densities can only be transformed by orthogonal maps");
  }
  return j;
}

ConditionReport validate_condition(const ProcessSpec& spec, std::size_t samples, std::uint64_t seed) {
  if (samples < 2) throw PreconditionError("validation needs at least two samples");
  const JumpDensity& j = spec.jump;
  const int d = j.dim();

  struct Partial {
    std::size_t asymmetric = 0;
    Eigen::Matrix<double, kMaxDim, 1> sum = Eigen::Matrix<double, kMaxDim, 1>::Zero();
    Eigen::Matrix<double, kMaxDim, 1> sum_sq = Eigen::Matrix<double, kMaxDim, 1>::Zero();
  };
  const std::size_t blocks = block_count(samples, kBlockSize);
  std::vector<Partial> partials(blocks);
  for_each_block(blocks, [&](std::size_t b) {
    Engine eng = make_stream(seed, StreamSalt::validation, b);
    Partial p;
    const std::size_t end = std::min(samples, (b + 1) * kBlockSize);
    for (std::size_t i = b * kBlockSize; i < end; ++i) {
      const Vec x = j.sample(eng);
      const double fx = j.density_unchecked(x);
      const double fm = j.density_unchecked(-x);
      if (std::abs(fx - fm) > 1e-12 * std::max(fx, fm)) ++p.asymmetric;
      for (int k = 0; k < d; ++k) {
        p.sum[k] += x[k];
        p.sum_sq[k] += x[k] * x[k];
      }
    }
    partials[b] = p;
  });
  Partial total;
  for (const auto& p : partials) {
    total.asymmetric += p.asymmetric;
    total.sum += p.sum;
    total.sum_sq += p.sum_sq;
  }

  ConditionReport report;
  const double n = static_cast<double>(samples);
  report.symmetry = {"symmetric density", total.asymmetric == 0, static_cast<double>(total.asymmetric) / n,
                     "fraction of sampled points x with j(x) != j(-x)"};

  double worst_z = 0.0;
  double worst_mean = 0.0;
  double variance_sum = 0.0;
  bool finite = true;
  report.mean.resize(d);
  for (int k = 0; k < d; ++k) {
    const double mean = total.sum[k] / n;
    const double var = std::max(0.0, (total.sum_sq[k] / n - mean * mean) * n / (n - 1.0));
    report.mean[k] = mean;
    variance_sum += var;
    finite = finite && std::isfinite(var);
    const double se = std::sqrt(var / n);
    const double z = se > 0.0 ? std::abs(mean) / se : (mean == 0.0 ? 0.0 : INFINITY);
    if (z > worst_z) {
      worst_z = z;
      worst_mean = mean;
    }
  }
  report.variance = variance_sum / d;
  report.mean_zero = {"zero mean", worst_z <= 4.0, worst_mean, fmt::format("largest |z| = {:.3g}, limit 4", worst_z)};
  report.finite_variance = {"finite variance", finite && report.variance > 0.0, report.variance,
                            "mean per-axis sample variance"};
  const double bound = j.sup();
  report.bounded = {"bounded density", std::isfinite(bound), bound, "sup of j"};
  report.discrete_spectrum = report.bounded.passed ? "implied by boundedness of j (not computed)"
                                                   : "not established: j is unbounded";
  return report;
}

}  // namespace cpe
