#include "cpe/shc.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "cpe/error.hpp"
#include "cpe/parallel.hpp"

namespace cpe {

namespace {

constexpr double kNeverExits = std::numeric_limits<double>::infinity();
constexpr double kZ95 = 1.959963984540054;

std::size_t poisson_draw(double mean, Engine& eng) {
  if (mean <= 0.0) return 0;
  return static_cast<std::size_t>(std::poisson_distribution<long long>(mean)(eng));
}

/// First exit time of a path started uniformly in D, or +inf if it is still
/// inside at `horizon`. Arrival times are sorted uniforms on (0, horizon]
/// given the Poisson count.
double exit_time(const ProcessSpec& spec, const Domain& d, double horizon, Engine& eng,
                 std::vector<double>& arrivals) {
  Vec x = d.sample_uniform(eng);
  const std::size_t jumps = poisson_draw(spec.rate * horizon, eng);
  arrivals.resize(jumps);
  for (double& a : arrivals) a = horizon * (1.0 - uniform01(eng));
  std::sort(arrivals.begin(), arrivals.end());
  for (std::size_t k = 0; k < jumps; ++k) {
    x += spec.jump.sample(eng);
    if (!d.contains_unchecked(x)) return arrivals[k];
  }
  return kNeverExits;
}

/// Index of the first chain position outside D, or n_max + 1 if all n_max stay.
std::size_t exit_index(const Domain& d, const JumpDensity& j, std::size_t n_max, Engine& eng) {
  Vec x = d.sample_uniform(eng);
  for (std::size_t k = 1; k <= n_max; ++k) {
    x += j.sample(eng);
    if (!d.contains_unchecked(x)) return k;
  }
  return n_max + 1;
}

void check_dims(const Domain& d, const JumpDensity& j) {
  if (d.dim() != j.dim()) throw DimensionMismatch(d.dim(), j.dim());
}

double poisson_pmf(std::size_t n, double mean) {
  if (mean == 0.0) return n == 0 ? 1.0 : 0.0;
  const double nn = static_cast<double>(n);
  return std::exp(nn * std::log(mean) - mean - std::lgamma(nn + 1.0));
}

}  // namespace

double binomial_stderr(std::size_t k, std::size_t n) {
  if (n == 0) throw PreconditionError("binomial standard error needs n > 0");
  const double nn = static_cast<double>(n);
  if (k > 0 && k < n) {
    const double p = static_cast<double>(k) / nn;
    return std::sqrt(p * (1.0 - p) / nn);
  }
  const double z2 = kZ95 * kZ95;
  const double adj_n = nn + z2;
  const double p = (static_cast<double>(k) + 0.5 * z2) / adj_n;
  return std::sqrt(p * (1.0 - p) / adj_n);
}

bool survive_one_path(const ProcessSpec& spec, const Domain& d, double t, Engine& eng) {
  check_dims(d, spec.jump);
  if (!(t >= 0.0)) throw PreconditionError("survival time must be nonnegative");
  std::vector<double> arrivals;
  return exit_time(spec, d, t, eng, arrivals) > t || t == 0.0;
}

ShcCurve estimate_Q(const ProcessSpec& spec, const Domain& d, const std::vector<double>& times,
                    std::size_t n_paths, std::uint64_t seed) {
  check_dims(d, spec.jump);
  if (n_paths < kMinPaths) throw PreconditionError(fmt::format("estimate_Q needs at least {} paths", kMinPaths));
  if (times.empty()) throw PreconditionError("estimate_Q needs at least one time");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] >= 0.0) || !std::isfinite(times[i])) throw PreconditionError("times must be finite and >= 0");
    if (i > 0 && !(times[i] > times[i - 1])) throw PreconditionError("times must be strictly increasing");
  }
  const double horizon = times.back();
  const std::size_t nt = times.size();
  const std::size_t blocks = block_count(n_paths, kBlockSize);
  std::vector<std::vector<std::size_t>> partial(blocks);
  for_each_block(blocks, [&](std::size_t b) {
    Engine eng = make_stream(seed, StreamSalt::shc_paths, b);
    std::vector<std::size_t> survivors(nt, 0);
    std::vector<double> arrivals;
    const std::size_t end = std::min(n_paths, (b + 1) * kBlockSize);
    for (std::size_t i = b * kBlockSize; i < end; ++i) {
      const double exit = exit_time(spec, d, horizon, eng, arrivals);
      for (std::size_t k = 0; k < nt && exit > times[k]; ++k) ++survivors[k];
    }
    partial[b] = std::move(survivors);
  });

  ShcCurve curve;
  curve.times = times;
  curve.volume = d.volume();
  curve.process = spec.describe();
  curve.domain = d.describe();
  curve.method = "path";
  for (std::size_t k = 0; k < nt; ++k) {
    std::size_t survivors = 0;
    for (const auto& p : partial) survivors += p[k];
    EstimateCI e;
    e.n_samples = n_paths;
    e.seed = seed;
    if (times[k] == 0.0) {
      e.mean = curve.volume;
      e.std_error = 0.0;
    } else {
      e.mean = curve.volume * static_cast<double>(survivors) / static_cast<double>(n_paths);
      e.std_error = curve.volume * binomial_stderr(survivors, n_paths);
    }
    curve.estimates.push_back(e);
  }
  return curve;
}

std::vector<EstimateCI> stay_integral_profile(const Domain& d, const JumpDensity& j, std::size_t n_max,
                                              std::size_t n_chains, std::uint64_t seed, StreamSalt salt) {
  check_dims(d, j);
  if (n_chains == 0) throw PreconditionError("stay integral needs at least one chain");
  const std::size_t blocks = block_count(n_chains, kBlockSize);
  std::vector<std::vector<std::size_t>> partial(blocks);
  for_each_block(blocks, [&](std::size_t b) {
    Engine eng = make_stream(seed, salt, b);
    // histogram of exit indices 1..n_max+1
    std::vector<std::size_t> hist(n_max + 2, 0);
    const std::size_t end = std::min(n_chains, (b + 1) * kBlockSize);
    for (std::size_t i = b * kBlockSize; i < end; ++i) ++hist[exit_index(d, j, n_max, eng)];
    partial[b] = std::move(hist);
  });
  std::vector<std::size_t> hist(n_max + 2, 0);
  for (const auto& p : partial) {
    for (std::size_t k = 0; k < hist.size(); ++k) hist[k] += p[k];
  }
  const double vol = d.volume();
  std::vector<EstimateCI> out(n_max + 1);
  std::size_t staying = n_chains;
  for (std::size_t n = 0; n <= n_max; ++n) {
    // chains still inside after n steps are those exiting at index > n
    if (n > 0) staying -= hist[n];
    EstimateCI& e = out[n];
    e.n_samples = n_chains;
    e.seed = seed;
    if (n == 0) {
      e.mean = vol;
      e.std_error = 0.0;
    } else {
      e.mean = vol * static_cast<double>(staying) / static_cast<double>(n_chains);
      e.std_error = vol * binomial_stderr(staying, n_chains);
    }
  }
  return out;
}

EstimateCI stay_integral(const Domain& d, const JumpDensity& j, std::size_t n, const QuadratureSpec& q) {
  if (q.method != QuadratureMethod::monte_carlo) {
    throw PreconditionError("stay_integral is estimated over jump chains; use monte-carlo quadrature");
  }
  q.validate();
  return stay_integral_profile(d, j, n, q.resolution, q.seed).back();
}

std::size_t poisson_truncation(double mean, double tail_tol) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw PreconditionError("Poisson mean must be finite and >= 0");
  if (!(tail_tol > 0.0 && tail_tol < 1.0)) throw PreconditionError("tail tolerance must lie in (0, 1)");
  long double cdf = 0.0L;
  for (std::size_t n = 0; n <= kMaxSeriesTerms; ++n) {
    cdf += static_cast<long double>(poisson_pmf(n, mean));
    if (1.0L - cdf < static_cast<long double>(tail_tol)) return n;
  }
  throw NumericalError(fmt::format(
      "series truncation for rate*t = {:.6g} needs more than {} terms; use path simulation instead", mean,
      kMaxSeriesTerms));
}

SeriesEstimate q_series(const ProcessSpec& spec, const Domain& d, double t, double tail_tol,
                        const QuadratureSpec& q) {
  check_dims(d, spec.jump);
  if (!(t >= 0.0)) throw PreconditionError("series time must be nonnegative");
  if (!(tail_tol > 0.0 && tail_tol <= 1e-3)) throw PreconditionError("tail tolerance must lie in (0, 1e-3]");
  if (q.method != QuadratureMethod::monte_carlo) {
    throw PreconditionError("q_series estimates stay integrals over jump chains; use monte-carlo quadrature");
  }
  q.validate();
  const double mean = spec.rate * t;
  const std::size_t terms = poisson_truncation(mean, tail_tol);
  const double vol = d.volume();

  SeriesEstimate out;
  out.terms = terms;
  out.n_chains = q.resolution;
  out.truncation_bound = vol * tail_tol;
  // cumulative[k] = sum of Poisson weights for n = 0..k
  std::vector<double> cumulative(terms + 1);
  double acc = 0.0;
  for (std::size_t n = 0; n <= terms; ++n) {
    acc += poisson_pmf(n, mean);
    cumulative[n] = acc;
  }
  if (terms == 0) {
    out.value = vol * cumulative[0];
    return out;
  }

  const std::size_t n_chains = q.resolution;
  const std::size_t blocks = block_count(n_chains, kBlockSize);
  std::vector<std::array<double, 2>> partial(blocks);
  for_each_block(blocks, [&](std::size_t b) {
    Engine eng = make_stream(q.seed, StreamSalt::series_chains, b);
    double s = 0.0;
    double s2 = 0.0;
    const std::size_t end = std::min(n_chains, (b + 1) * kBlockSize);
    for (std::size_t i = b * kBlockSize; i < end; ++i) {
      // a chain leaving at index e contributes to the terms n = 0..e-1
      const std::size_t e = exit_index(d, spec.jump, terms, eng);
      const double v = cumulative[std::min(e - 1, terms)];
      s += v;
      s2 += v * v;
    }
    partial[b] = {s, s2};
  });
  double s = 0.0;
  double s2 = 0.0;
  for (const auto& p : partial) {
    s += p[0];
    s2 += p[1];
  }
  const double nn = static_cast<double>(n_chains);
  const double m = s / nn;
  const double var = std::max(0.0, (s2 / nn - m * m) * nn / (nn - 1.0));
  out.value = vol * m;
  out.std_error = vol * std::sqrt(var / nn);
  return out;
}

LambdaFit lambda_from_shc(const ShcCurve& curve, double max_rel_ci_width) {
  if (curve.times.size() != curve.estimates.size()) throw PreconditionError("curve times and estimates differ in length");
  if (!(curve.volume > 0.0)) throw PreconditionError("curve volume must be positive");
  if (!(max_rel_ci_width > 0.0)) throw PreconditionError("CI window must be positive");

  std::vector<double> ts;
  std::vector<double> ys;
  std::vector<double> vars;
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    const double t = curve.times[i];
    const EstimateCI& e = curve.estimates[i];
    if (!(t > 0.0) || !(e.mean > 0.0) || !std::isfinite(e.std_error)) continue;
    const double rel_width = 2.0 * kZ95 * e.std_error / e.mean;
    if (!(rel_width < max_rel_ci_width)) continue;
    ts.push_back(t);
    ys.push_back(-std::log(e.mean / curve.volume));
    const double rel = e.std_error / e.mean;
    vars.push_back(rel * rel);
  }
  if (ts.size() < kMinFitPoints) {
    throw NumericalError(fmt::format("lambda fit needs at least {} usable points, found {} (CI window {:.3g})",
                                     kMinFitPoints, ts.size(), max_rel_ci_width));
  }

  LambdaFit fit;
  fit.max_rel_ci_width = max_rel_ci_width;
  fit.points_used = ts.size();
  fit.times_used = ts;
  double min_positive = std::numeric_limits<double>::infinity();
  for (double v : vars) {
    if (v > 0.0) min_positive = std::min(min_positive, v);
  }
  fit.weighted = std::isfinite(min_positive);
  std::vector<double> w(ts.size(), 1.0);
  if (fit.weighted) {
    // exact points (zero variance) get the weight of the most precise estimate
    for (std::size_t i = 0; i < ts.size(); ++i) w[i] = 1.0 / (vars[i] > 0.0 ? vars[i] : min_positive);
  }
  double sw = 0.0;
  double st = 0.0;
  double sy = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    sw += w[i];
    st += w[i] * ts[i];
    sy += w[i] * ys[i];
  }
  const double tbar = st / sw;
  const double ybar = sy / sw;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    sxx += w[i] * (ts[i] - tbar) * (ts[i] - tbar);
    sxy += w[i] * (ts[i] - tbar) * (ys[i] - ybar);
  }
  if (!(sxx > 0.0)) throw NumericalError("lambda fit needs at least two distinct times");
  fit.lambda = sxy / sxx;
  fit.intercept = ybar - fit.lambda * tbar;
  double rss = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double r = ys[i] - fit.intercept - fit.lambda * ts[i];
    fit.residuals.push_back(r);
    rss += w[i] * r * r;
  }
  fit.chi2 = rss;
  const double dof = static_cast<double>(ts.size()) - 2.0;
  fit.lambda_stderr = fit.weighted ? std::sqrt(1.0 / sxx) : std::sqrt(rss / dof / sxx);
  return fit;
}

}  // namespace cpe
