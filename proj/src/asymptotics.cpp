#include "cpe/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/LU>
#include <fmt/format.h>

#include "cpe/error.hpp"
#include "cpe/parallel.hpp"

namespace cpe {

namespace {

/// Blocks simulated per rejection wave. Fixed, so the set of simulated chains
/// depends only on the seed.
constexpr std::size_t kWaveBlocks = 16;
/// The acceptance-rate abort is only armed once this many chains have run.
constexpr std::size_t kAbortAfterChains = 100'000;

double sinc(double u) { return std::abs(u) < 1e-8 ? 1.0 - u * u / 6.0 : std::sin(u) / u; }

/// Normalized transform of the unit ball at radius |ξ| = u.
double unit_ball_profile(int dim, double u) {
  switch (dim) {
    case 1:
      return sinc(u);
    case 2:
      return std::abs(u) < 1e-8 ? 1.0 - u * u / 8.0 : 2.0 * std::cyl_bessel_j(1.0, u) / u;
    default:
      if (std::abs(u) < 1e-4) return 1.0 - u * u / 10.0;
      return 3.0 * (std::sin(u) - u * std::cos(u)) / (u * u * u);
  }
}

std::complex<double> phase(double angle) { return {std::cos(angle), std::sin(angle)}; }

void check_dims(const JumpDensity& j, const Domain& d, const Vec& x) {
  if (d.dim() != j.dim()) throw DimensionMismatch(d.dim(), j.dim());
  if (x.size() != d.dim()) throw DimensionMismatch(d.dim(), static_cast<int>(x.size()));
}

/// Runs waves of rejection blocks until `target` acceptances exist. block(b, out)
/// appends the accepted items of block b to out.
template <class Item, class Block>
std::vector<Item> rejection_waves(std::size_t target, Block&& block, std::size_t& simulated, const char* what) {
  std::vector<Item> kept;
  kept.reserve(target);
  simulated = 0;
  std::size_t accepted_total = 0;
  for (std::size_t wave = 0; kept.size() < target; ++wave) {
    std::vector<std::vector<Item>> slots(kWaveBlocks);
    for_each_block(kWaveBlocks, [&](std::size_t w) { block(wave * kWaveBlocks + w, slots[w]); });
    for (auto& slot : slots) {
      for (auto& item : slot) {
        if (kept.size() < target) kept.push_back(std::move(item));
      }
      accepted_total += slot.size();
      simulated += kBlockSize;
      if (kept.size() >= target) break;
    }
    const double rate = static_cast<double>(accepted_total) / static_cast<double>(simulated);
    if (simulated >= kAbortAfterChains && rate < kMinAcceptanceRate) {
      throw NumericalError(fmt::format("{}: acceptance rate {:.3g} after {} chains is below {:g}; "
                                       "the conditioning event is too rare for rejection sampling",
                                       what, rate, simulated, kMinAcceptanceRate));
    }
  }
  return kept;
}

EstimateCI mean_and_stderr(const std::vector<double>& xs, std::uint64_t seed) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : xs) ss += (v - mean) * (v - mean);
  const double se = xs.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return EstimateCI{mean, se, xs.size(), seed};
}

}  // namespace

std::complex<double> uniform_fourier(const Domain& d, const Vec& xi) {
  if (xi.size() != d.dim()) throw DimensionMismatch(d.dim(), static_cast<int>(xi.size()));
  return std::visit(
      [&](const auto& s) -> std::complex<double> {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, shape::Interval>) {
          return phase(xi[0] * 0.5 * (s.lo + s.hi)) * sinc(0.5 * xi[0] * (s.hi - s.lo));
        } else if constexpr (std::is_same_v<S, shape::Box>) {
          std::complex<double> out = 1.0;
          for (int k = 0; k < d.dim(); ++k) {
            out *= phase(xi[k] * 0.5 * (s.lo[k] + s.hi[k])) * sinc(0.5 * xi[k] * (s.hi[k] - s.lo[k]));
          }
          return out;
        } else if constexpr (std::is_same_v<S, shape::Ball>) {
          return phase(xi.dot(s.center)) * unit_ball_profile(d.dim(), s.radius * xi.norm());
        } else if constexpr (std::is_same_v<S, shape::Ellipsoid>) {
          // x = c + Q^{-1/2} u with u in the unit ball.
          const double u = std::sqrt(std::max(0.0, xi.dot(s.form.inverse() * xi)));
          return phase(xi.dot(s.center)) * unit_ball_profile(d.dim(), u);
        } else if constexpr (std::is_same_v<S, shape::Translate>) {
          return phase(xi.dot(s.shift)) * uniform_fourier(*s.base, xi);
        } else if constexpr (std::is_same_v<S, shape::LinearImage>) {
          const Vec pulled = s.map.transpose() * xi;
          return uniform_fourier(*s.base, pulled);
        } else {
          // Sum of exact cell transforms.
          const int dim = d.dim();
          double cell_factor = 1.0;
          for (int k = 0; k < dim; ++k) cell_factor *= sinc(0.5 * xi[k] * s.h);
          std::complex<double> sum = 0.0;
          std::size_t occupied = 0;
          int idx[kMaxDim] = {0, 0, 0};
          for (std::size_t lin = 0; lin < s.mask.size(); ++lin) {
            if (s.mask[lin]) {
              double angle = 0.0;
              for (int k = 0; k < dim; ++k) angle += xi[k] * (s.origin[k] + (idx[k] + 0.5) * s.h);
              sum += phase(angle);
              ++occupied;
            }
            for (int k = dim - 1; k >= 0; --k) {
              if (++idx[k] < s.counts[k]) break;
              idx[k] = 0;
            }
          }
          if (occupied == 0) throw PreconditionError("empty grid set");
          return sum * (cell_factor / static_cast<double>(occupied));
        }
      },
      d.shape());
}

ConditionedEndpoints conditioned_endpoints(const JumpDensity& j, const Domain& d, const Vec& x, std::size_t n,
                                           std::size_t n_accepted, std::uint64_t seed) {
  check_dims(j, d, x);
  if (n < 1) throw PreconditionError("conditioning needs n >= 1");
  if (n_accepted < 1) throw PreconditionError("need at least one accepted sample");
  ConditionedEndpoints out;
  auto block = [&](std::size_t b, std::vector<Vec>& slot) {
    Engine eng = make_stream(seed, StreamSalt::charfun, b);
    for (std::size_t c = 0; c < kBlockSize; ++c) {
      Vec s = x;
      for (std::size_t k = 0; k < n; ++k) s += j.sample(eng);
      if (d.contains_unchecked(s)) slot.push_back(s);
    }
  };
  out.points = rejection_waves<Vec>(n_accepted, block, out.n_simulated, "conditional_charfun");
  out.acceptance_rate = static_cast<double>(out.points.size()) / static_cast<double>(out.n_simulated);
  return out;
}

std::vector<ComplexEstimate> conditional_charfun(const JumpDensity& j, const Domain& d, const Vec& x,
                                                 std::size_t n, const std::vector<Vec>& xis,
                                                 std::size_t n_accepted, std::uint64_t seed) {
  for (const Vec& xi : xis) {
    if (xi.size() != d.dim()) throw DimensionMismatch(d.dim(), static_cast<int>(xi.size()));
  }
  const ConditionedEndpoints ends = conditioned_endpoints(j, d, x, n, n_accepted, seed);
  const double m = static_cast<double>(ends.points.size());
  std::vector<ComplexEstimate> out;
  out.reserve(xis.size());
  for (const Vec& xi : xis) {
    double sc = 0.0, ss = 0.0;
    for (const Vec& p : ends.points) {
      const double a = xi.dot(p);
      sc += std::cos(a);
      ss += std::sin(a);
    }
    const double mc = sc / m, ms = ss / m;
    double vc = 0.0, vs = 0.0;
    for (const Vec& p : ends.points) {
      const double a = xi.dot(p);
      vc += (std::cos(a) - mc) * (std::cos(a) - mc);
      vs += (std::sin(a) - ms) * (std::sin(a) - ms);
    }
    const double var = m > 1.0 ? (vc + vs) / (m - 1.0) : 0.0;
    out.push_back(ComplexEstimate{{mc, ms}, std::sqrt(var / m), ends.points.size(), ends.n_simulated,
                                  ends.acceptance_rate, seed});
  }
  return out;
}

ComplexEstimate conditional_charfun(const JumpDensity& j, const Domain& d, const Vec& x, std::size_t n,
                                    const Vec& xi, std::size_t n_accepted, std::uint64_t seed) {
  return conditional_charfun(j, d, x, n, std::vector<Vec>{xi}, n_accepted, seed).front();
}

ContainmentEstimate conditional_containment(const JumpDensity& j, const Domain& d, const Vec& x, std::size_t n,
                                            std::size_t n_accepted, std::uint64_t seed,
                                            ContainmentMethod method) {
  check_dims(j, d, x);
  if (n_accepted < 100) throw PreconditionError("conditional_containment needs at least 100 samples");
  ContainmentEstimate out;
  out.method = method;

  if (n == 0) {
    // No conditioning: one jump from x.
    const std::size_t blocks = block_count(n_accepted, kBlockSize);
    std::vector<std::size_t> hits(blocks, 0);
    for_each_block(blocks, [&](std::size_t b) {
      Engine eng = make_stream(seed, StreamSalt::containment, b);
      const std::size_t end = std::min(n_accepted, (b + 1) * kBlockSize);
      for (std::size_t c = b * kBlockSize; c < end; ++c) hits[b] += d.contains_unchecked(x + j.sample(eng));
    });
    const std::size_t k = std::accumulate(hits.begin(), hits.end(), std::size_t{0});
    out.estimate = EstimateCI{static_cast<double>(k) / static_cast<double>(n_accepted),
                              binomial_stderr(k, n_accepted), n_accepted, seed};
    out.acceptance_rate = 1.0;
    return out;
  }

  if (method == ContainmentMethod::rejection) {
    std::size_t simulated = 0;
    auto block = [&](std::size_t b, std::vector<std::uint8_t>& slot) {
      Engine eng = make_stream(seed, StreamSalt::containment, b);
      for (std::size_t c = 0; c < kBlockSize; ++c) {
        Vec s = x;
        bool stayed = true;
        for (std::size_t k = 0; k < n && stayed; ++k) {
          s += j.sample(eng);
          stayed = d.contains_unchecked(s);
        }
        if (stayed) slot.push_back(d.contains_unchecked(s + j.sample(eng)) ? 1 : 0);
      }
    };
    const auto kept = rejection_waves<std::uint8_t>(n_accepted, block, simulated, "conditional_containment");
    const std::size_t k = std::accumulate(kept.begin(), kept.end(), std::size_t{0});
    out.estimate = EstimateCI{static_cast<double>(k) / static_cast<double>(kept.size()),
                              binomial_stderr(k, kept.size()), kept.size(), seed};
    out.acceptance_rate = static_cast<double>(kept.size()) / static_cast<double>(simulated);
    return out;
  }

  const std::size_t per = n_accepted / kPopulationReplicates;
  std::vector<double> fractions(kPopulationReplicates, 0.0);
  std::vector<double> stay_prob(kPopulationReplicates, 0.0);
  for_each_block(kPopulationReplicates, [&](std::size_t r) {
    Engine eng = make_stream(seed, StreamSalt::resample, r);
    std::vector<Vec> particles(per, x);
    std::vector<std::size_t> alive;
    alive.reserve(per);
    double log_stay = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      alive.clear();
      for (std::size_t p = 0; p < per; ++p) {
        particles[p] += j.sample(eng);
        if (d.contains_unchecked(particles[p])) alive.push_back(p);
      }
      if (alive.empty()) {
        throw NumericalError(fmt::format("conditional_containment: a population of {} died out at step {}; "
                                         "increase n_accepted",
                                         per, k + 1));
      }
      log_stay += std::log(static_cast<double>(alive.size()) / static_cast<double>(per));
      // Replace every exited particle by a uniformly chosen survivor.
      std::uniform_int_distribution<std::size_t> pick(0, alive.size() - 1);
      std::vector<Vec> next;
      next.reserve(per);
      std::size_t a = 0;
      for (std::size_t p = 0; p < per; ++p) {
        if (a < alive.size() && alive[a] == p) {
          next.push_back(particles[p]);
          ++a;
        } else {
          next.push_back(particles[alive[pick(eng)]]);
        }
      }
      particles.swap(next);
    }
    std::size_t hits = 0;
    for (const Vec& p : particles) hits += d.contains_unchecked(p + j.sample(eng));
    fractions[r] = static_cast<double>(hits) / static_cast<double>(per);
    stay_prob[r] = std::exp(log_stay);
  });
  out.estimate = mean_and_stderr(fractions, seed);
  out.estimate.n_samples = per * kPopulationReplicates;
  out.acceptance_rate = std::accumulate(stay_prob.begin(), stay_prob.end(), 0.0) / kPopulationReplicates;
  return out;
}

std::vector<Vec> default_start_points(const Domain& d) {
  const BoundingBox& b = d.bounds();
  Vec center = 0.5 * (b.lo + b.hi);
  Vec near = center;
  near[0] = b.lo[0] + 0.05 * (b.hi[0] - b.lo[0]);
  std::vector<Vec> out;
  for (const Vec& p : {center, near}) {
    if (d.contains(p)) out.push_back(p);
  }
  if (out.empty()) throw PreconditionError("no default start point lies inside the domain");
  return out;
}

std::vector<LemmaRow> lemma_report(const JumpDensity& j, const Domain& d, const LemmaPlan& plan,
                                   std::uint64_t seed) {
  const auto cap = [&](std::size_t n) {
    if (n > plan.max_steps) {
      throw PreconditionError(fmt::format("n = {} exceeds the step cap of {}", n, plan.max_steps));
    }
  };
  std::vector<double> freqs = plan.frequencies;
  if (freqs.empty()) freqs = {std::numbers::pi, 2.0 * std::numbers::pi, 3.0 * std::numbers::pi};
  std::vector<Vec> xis;
  for (double f : freqs) {
    Vec xi = Vec::Zero(d.dim());
    xi[0] = f;
    xis.push_back(xi);
  }
  const auto starts = default_start_points(d);
  std::vector<LemmaRow> rows;

  for (std::size_t n : plan.charfun_steps) {
    cap(n);
    std::vector<LemmaRow> worst(xis.size());
    for (std::size_t s = 0; s < starts.size(); ++s) {
      const auto est = conditional_charfun(j, d, starts[s], n, xis, plan.n_accepted, sibling_seed(seed, s));
      for (std::size_t f = 0; f < xis.size(); ++f) {
        const auto target = uniform_fourier(d, xis[f]);
        const double dev = std::abs(est[f].mean - target);
        if (s == 0 || dev > worst[f].deviation) {
          worst[f] = LemmaRow{"conditional_uniformity", n, freqs[f], est[f].mean.real(), est[f].mean.imag(),
                              est[f].std_error, target.real(), target.imag(), est[f].acceptance_rate, dev};
        }
      }
    }
    rows.insert(rows.end(), worst.begin(), worst.end());
  }

  const std::size_t cells = d.dim() == 1 ? 1024 : d.dim() == 2 ? 64 : 16;
  const double a = alpha(d, j, QuadratureSpec::grid(cells)).alpha;
  for (std::size_t n : plan.containment_steps) {
    cap(n);
    LemmaRow worst;
    for (std::size_t s = 0; s < starts.size(); ++s) {
      const auto est = conditional_containment(j, d, starts[s], n, plan.n_accepted, sibling_seed(seed, s));
      const double dev = std::abs(est.estimate.mean - a);
      if (s == 0 || dev > worst.deviation) {
        worst = LemmaRow{"conditional_containment", n, std::nullopt, est.estimate.mean, 0.0,
                         est.estimate.std_error, a, 0.0, est.acceptance_rate, dev};
      }
    }
    rows.push_back(worst);
  }
  return rows;
}

}  // namespace cpe
