#include "cpe/eigenvalue.hpp"

#include <array>
#include <cmath>

#include <fmt/format.h>

#include "cpe/error.hpp"
#include "cpe/parallel.hpp"

namespace cpe {

namespace {

constexpr double kSaturation = 1e-12;
constexpr std::size_t kPairBlock = 256;

/// Occupied cells of a regular lattice with per-axis spacing and fractional weights.
struct Lattice {
  int dim = 1;
  std::array<int, kMaxDim> counts{1, 1, 1};
  std::array<double, kMaxDim> spacing{1.0, 1.0, 1.0};
  std::vector<std::array<int, kMaxDim>> cells;
  std::vector<double> weights;

  double cell_volume() const {
    double v = 1.0;
    for (int k = 0; k < dim; ++k) v *= spacing[k];
    return v;
  }
};

template <class Fn>
void for_each_multi_index(int dim, const std::array<int, kMaxDim>& counts, Fn&& fn) {
  std::array<int, kMaxDim> idx{0, 0, 0};
  std::size_t total = 1;
  for (int k = 0; k < dim; ++k) total *= static_cast<std::size_t>(counts[k]);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat;
    for (int k = dim - 1; k >= 0; --k) {
      idx[k] = static_cast<int>(rem % counts[k]);
      rem /= counts[k];
    }
    fn(idx);
  }
}

Lattice analytic_lattice(const Domain& d, int cells_per_axis, int coverage) {
  Lattice lat;
  lat.dim = d.dim();
  const BoundingBox& b = d.bounds();
  for (int k = 0; k < lat.dim; ++k) {
    lat.counts[k] = cells_per_axis;
    lat.spacing[k] = (b.hi[k] - b.lo[k]) / cells_per_axis;
  }
  std::array<int, kMaxDim> sub_counts{1, 1, 1};
  for (int k = 0; k < lat.dim; ++k) sub_counts[k] = coverage;
  const double sub_total = std::pow(coverage, lat.dim);

  for_each_multi_index(lat.dim, lat.counts, [&](const std::array<int, kMaxDim>& idx) {
    int inside = 0;
    Vec p(lat.dim);
    for_each_multi_index(lat.dim, sub_counts, [&](const std::array<int, kMaxDim>& sub) {
      for (int k = 0; k < lat.dim; ++k) {
        p[k] = b.lo[k] + (idx[k] + (sub[k] + 0.5) / coverage) * lat.spacing[k];
      }
      inside += d.contains_unchecked(p) ? 1 : 0;
    });
    if (inside > 0) {
      lat.cells.push_back(idx);
      lat.weights.push_back(inside / sub_total);
    }
  });
  return lat;
}

/// Native lattice of a grid set, optionally merged into factor^d super-cells.
Lattice grid_lattice(const shape::GridSet& g, int factor) {
  Lattice lat;
  lat.dim = static_cast<int>(g.counts.size());
  std::array<int, kMaxDim> fine{1, 1, 1};
  for (int k = 0; k < lat.dim; ++k) {
    fine[k] = g.counts[k];
    lat.counts[k] = (g.counts[k] + factor - 1) / factor;
    lat.spacing[k] = g.h * factor;
  }
  std::size_t coarse_total = 1;
  for (int k = 0; k < lat.dim; ++k) coarse_total *= static_cast<std::size_t>(lat.counts[k]);
  std::vector<int> occupied(coarse_total, 0);
  std::size_t flat = 0;
  for_each_multi_index(lat.dim, fine, [&](const std::array<int, kMaxDim>& idx) {
    if (g.mask[flat++]) {
      std::size_t c = 0;
      for (int k = 0; k < lat.dim; ++k) c = c * lat.counts[k] + static_cast<std::size_t>(idx[k] / factor);
      ++occupied[c];
    }
  });
  const double per_cell = std::pow(factor, lat.dim);
  std::size_t c = 0;
  for_each_multi_index(lat.dim, lat.counts, [&](const std::array<int, kMaxDim>& idx) {
    if (occupied[c] > 0) {
      lat.cells.push_back(idx);
      lat.weights.push_back(occupied[c] / per_cell);
    }
    ++c;
  });
  return lat;
}

/// alpha on a lattice: cell-pair sums of j averaged over the distribution of
/// the offset between two uniform points in the two cells.
double lattice_alpha(const Lattice& lat, const JumpDensity& j, int kernel_sub) {
  const int d = lat.dim;
  std::array<std::size_t, kMaxDim> stride{1, 1, 1};
  std::array<int, kMaxDim> span{1, 1, 1};
  std::size_t table_size = 1;
  for (int k = d - 1; k >= 0; --k) {
    span[k] = 2 * lat.counts[k] - 1;
    stride[k] = table_size;
    table_size *= static_cast<std::size_t>(span[k]);
  }

  // Offset u - v for u, v uniform on the unit interval, discretized on kernel_sub points each.
  std::vector<double> offsets;
  std::vector<double> offset_weights;
  for (int e = -(kernel_sub - 1); e <= kernel_sub - 1; ++e) {
    offsets.push_back(static_cast<double>(e) / kernel_sub);
    offset_weights.push_back(static_cast<double>(kernel_sub - std::abs(e)) / (kernel_sub * kernel_sub));
  }
  std::array<int, kMaxDim> offset_counts{1, 1, 1};
  for (int k = 0; k < d; ++k) offset_counts[k] = static_cast<int>(offsets.size());

  std::vector<double> table(table_size, 0.0);
  const std::size_t rows = static_cast<std::size_t>(span[0]);
  const std::size_t row_size = table_size / rows;
  for_each_block(rows, [&](std::size_t row) {
    std::array<int, kMaxDim> rest_counts{1, 1, 1};
    for (int k = 1; k < d; ++k) rest_counts[k - 1] = span[k];
    std::size_t pos = row * row_size;
    Vec x(d);
    for_each_multi_index(std::max(d - 1, 1), rest_counts, [&](const std::array<int, kMaxDim>& rest) {
      std::array<int, kMaxDim> diff{static_cast<int>(row) - (lat.counts[0] - 1), 0, 0};
      for (int k = 1; k < d; ++k) diff[k] = rest[k - 1] - (lat.counts[k] - 1);
      double value = 0.0;
      for_each_multi_index(d, offset_counts, [&](const std::array<int, kMaxDim>& o) {
        double w = 1.0;
        for (int k = 0; k < d; ++k) {
          x[k] = (diff[k] + offsets[o[k]]) * lat.spacing[k];
          w *= offset_weights[o[k]];
        }
        value += w * j.density_unchecked(x);
      });
      table[pos++] = value;
    });
  });

  const std::size_t m = lat.cells.size();
  std::vector<std::ptrdiff_t> linear(m);
  std::ptrdiff_t center = 0;
  for (int k = 0; k < d; ++k) center += static_cast<std::ptrdiff_t>((lat.counts[k] - 1) * stride[k]);
  for (std::size_t i = 0; i < m; ++i) {
    std::ptrdiff_t l = 0;
    for (int k = 0; k < d; ++k) l += static_cast<std::ptrdiff_t>(lat.cells[i][k] * stride[k]);
    linear[i] = l;
  }

  const std::size_t blocks = block_count(m, kPairBlock);
  std::vector<double> partial(blocks, 0.0);
  for_each_block(blocks, [&](std::size_t b) {
    const std::size_t end = std::min(m, (b + 1) * kPairBlock);
    double acc = 0.0;
    for (std::size_t p = b * kPairBlock; p < end; ++p) {
      const double* row = table.data() + center - linear[p];
      double inner = 0.0;
      for (std::size_t q = 0; q < m; ++q) inner += lat.weights[q] * row[linear[q]];
      acc += lat.weights[p] * inner;
    }
    partial[b] = acc;
  });
  double pair_sum = 0.0;
  for (double v : partial) pair_sum += v;
  double weight_sum = 0.0;
  for (double w : lat.weights) weight_sum += w;
  return lat.cell_volume() * pair_sum / weight_sum;
}

double lattice_volume(const Lattice& lat) {
  double w = 0.0;
  for (double v : lat.weights) w += v;
  return w * lat.cell_volume();
}

AlphaResult grid_alpha(const Domain& d, const JumpDensity& j, const QuadratureSpec& q) {
  Lattice fine;
  Lattice coarse;
  if (const auto* g = std::get_if<shape::GridSet>(&d.shape())) {
    fine = grid_lattice(*g, 1);
    coarse = grid_lattice(*g, 2);
  } else {
    const int n = static_cast<int>(q.resolution);
    fine = analytic_lattice(d, n, q.coverage_subsamples);
    coarse = analytic_lattice(d, std::max(1, n / 2), q.coverage_subsamples);
  }
  if (fine.cells.empty()) throw NumericalError("quadrature lattice contains no cells of " + d.describe());
  AlphaResult r;
  r.alpha = lattice_alpha(fine, j, q.kernel_subsamples);
  const double coarse_alpha = coarse.cells.empty() ? r.alpha : lattice_alpha(coarse, j, q.kernel_subsamples);
  r.error = std::abs(r.alpha - coarse_alpha);
  r.volume = lattice_volume(fine);
  return r;
}

AlphaResult monte_carlo_alpha(const Domain& d, const JumpDensity& j, const QuadratureSpec& q) {
  const std::size_t n = q.resolution;
  const std::size_t blocks = block_count(n, kBlockSize);
  std::vector<std::array<double, 2>> partial(blocks);
  const double vol = d.volume();
  for_each_block(blocks, [&](std::size_t b) {
    Engine eng = make_stream(q.seed, StreamSalt::alpha_pairs, b);
    const std::size_t end = std::min(n, (b + 1) * kBlockSize);
    double s = 0.0;
    double s2 = 0.0;
    for (std::size_t i = b * kBlockSize; i < end; ++i) {
      const Vec x = d.sample_uniform(eng);
      const Vec y = d.sample_uniform(eng);
      const double v = vol * j.density_unchecked(y - x);
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
  const double nn = static_cast<double>(n);
  const double mean = s / nn;
  const double var = std::max(0.0, (s2 / nn - mean * mean) * nn / (nn - 1.0));
  return AlphaResult{mean, std::sqrt(var / nn), vol, false};
}

}  // namespace

QuadratureSpec QuadratureSpec::grid(std::size_t cells_per_axis) {
  QuadratureSpec q;
  q.method = QuadratureMethod::grid_midpoint;
  q.resolution = cells_per_axis;
  return q;
}

QuadratureSpec QuadratureSpec::monte_carlo(std::size_t samples, std::uint64_t seed) {
  QuadratureSpec q;
  q.method = QuadratureMethod::monte_carlo;
  q.resolution = samples;
  q.seed = seed;
  return q;
}

void QuadratureSpec::validate() const {
  if (method == QuadratureMethod::grid_midpoint && resolution < kMinGridCells) {
    throw PreconditionError(fmt::format("grid quadrature needs at least {} cells per axis, got {}", kMinGridCells,
                                        resolution));
  }
  if (method == QuadratureMethod::monte_carlo && resolution < kMinSamples) {
    throw PreconditionError(
        fmt::format("Monte Carlo quadrature needs at least {} samples, got {}", kMinSamples, resolution));
  }
  if (coverage_subsamples < 1 || kernel_subsamples < 1) {
    throw PreconditionError("quadrature subsample counts must be positive");
  }
}

std::string QuadratureSpec::method_name() const {
  return method == QuadratureMethod::grid_midpoint ? "grid-midpoint" : "monte-carlo";
}

AlphaResult alpha(const Domain& d, const JumpDensity& j, const QuadratureSpec& q) {
  if (d.dim() != j.dim()) throw DimensionMismatch(d.dim(), j.dim());
  q.validate();
  AlphaResult r = q.method == QuadratureMethod::grid_midpoint ? grid_alpha(d, j, q) : monte_carlo_alpha(d, j, q);
  if (r.alpha >= 1.0 - kSaturation) {
    r.alpha = 1.0;
    r.saturated = true;
  }
  r.alpha = std::max(0.0, r.alpha);
  return r;
}

EigenvalueResult principal_eigenvalue(const ProcessSpec& spec, const Domain& d, const QuadratureSpec& q,
                                      ConditionWaiver waiver) {
  EigenvalueResult out;
  out.waived = waiver == ConditionWaiver::waived;
  if (!out.waived) {
    const ConditionReport report = validate_condition(spec);
    if (!report.passed()) {
      std::string failed;
      for (const ConditionItem* item : {&report.symmetry, &report.mean_zero, &report.finite_variance, &report.bounded}) {
        if (!item->passed) failed += (failed.empty() ? "" : ", ") + item->name;
      }
      throw PreconditionError("jump law fails the eigenvalue formula's assumptions (" + failed +
                              "); pass a waiver to compute the formula value anyway");
    }
  }
  const AlphaResult a = alpha(d, spec.jump, q);
  out.alpha = a.alpha;
  out.rate = spec.rate;
  out.lambda1 = spec.rate * (1.0 - a.alpha);
  out.error = spec.rate * a.error;
  out.method = q.method_name();
  out.saturated = a.saturated;
  if (out.waived) {
    out.interpretation = "formula value, spectral interpretation unverified";
  } else if (a.saturated) {
    out.interpretation = "alpha saturated at 1 under discretization; lambda1 reported as 0";
  } else {
    out.interpretation = "principal eigenvalue";
  }
  return out;
}

std::optional<double> closed_form_uniform(double rate, const Domain& d, const Domain& a) {
  if (!(rate > 0.0)) throw PreconditionError("jump rate must be positive");
  if (!self_difference_subset(d, a).contained) return std::nullopt;
  return rate * (1.0 - d.volume() / a.volume());
}

FaberKrahnGap faber_krahn_gap(const ProcessSpec& spec, const Domain& d, const QuadratureSpec& q,
                              ConditionWaiver waiver) {
  FaberKrahnGap g;
  g.original = principal_eigenvalue(spec, d, q, waiver);
  const ProcessSpec symmetrized(spec.rate, rearranged_density(spec.jump));
  g.symmetrized = principal_eigenvalue(symmetrized, symmetric_rearrangement(d), q, waiver);
  g.gap = g.original.lambda1 - g.symmetrized.lambda1;
  g.error = g.original.error + g.symmetrized.error;
  return g;
}

}  // namespace cpe
