#include "cpe/rearrangement.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "cpe/error.hpp"

namespace cpe {

namespace {

std::size_t cell_total(int dim, const std::array<int, 2>& counts) {
  return dim == 1 ? static_cast<std::size_t>(counts[0])
                  : static_cast<std::size_t>(counts[0]) * static_cast<std::size_t>(counts[1]);
}

void require_compatible(const GridField& a, const GridField& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch(a.dim(), b.dim());
  if (std::abs(a.h() - b.h()) > 1e-12 * std::max(a.h(), b.h())) {
    throw PreconditionError(fmt::format("cell size mismatch: {} vs {}", a.h(), b.h()));
  }
}

}  // namespace

GridField::GridField(int dim, double h, std::array<double, 2> origin, std::array<int, 2> counts,
                     std::vector<double> values)
    : dim_(dim), h_(h), origin_(origin), counts_(counts), values_(std::move(values)) {
  if (dim_ != 1 && dim_ != 2) throw PreconditionError(fmt::format("grid fields are 1D or 2D, got d = {}", dim_));
  if (!(h_ > 0.0) || !std::isfinite(h_)) throw PreconditionError("cell size must be positive and finite");
  if (dim_ == 1) counts_[1] = 1, origin_[1] = 0.0;
  for (int k = 0; k < dim_; ++k) {
    if (counts_[k] < 1) throw PreconditionError("every axis needs at least one cell");
  }
  if (values_.size() != cell_total(dim_, counts_)) {
    throw PreconditionError(
        fmt::format("expected {} cell values, got {}", cell_total(dim_, counts_), values_.size()));
  }
  for (double v : values_) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw PreconditionError("cell values must be finite and nonnegative");
  }
}

GridField GridField::indicator(const Domain& d, double h, std::array<double, 2> origin,
                               std::array<int, 2> counts) {
  const int dim = d.dim();
  if (dim != 1 && dim != 2) throw PreconditionError("grid fields are 1D or 2D");
  if (dim == 1) counts[1] = 1;
  std::vector<double> values(cell_total(dim, counts), 0.0);
  Vec p(dim);
  for (int i = 0; i < counts[0]; ++i) {
    for (int j = 0; j < counts[1]; ++j) {
      p[0] = origin[0] + (i + 0.5) * h;
      if (dim == 2) p[1] = origin[1] + (j + 0.5) * h;
      const std::size_t at = dim == 1 ? i : static_cast<std::size_t>(i) * counts[1] + j;
      values[at] = d.contains(p) ? 1.0 : 0.0;
    }
  }
  return GridField(dim, h, origin, counts, std::move(values));
}

GridField GridField::centered(int dim, double h, std::array<int, 2> counts) {
  if (dim == 1) counts[1] = 1;
  std::array<double, 2> origin{-0.5 * counts[0] * h, dim == 2 ? -0.5 * counts[1] * h : 0.0};
  return GridField(dim, h, origin, counts, std::vector<double>(cell_total(dim, counts), 0.0));
}

std::array<double, 2> GridField::center(int i, int j) const {
  return {origin_[0] + (i + 0.5) * h_, dim_ == 2 ? origin_[1] + (j + 0.5) * h_ : 0.0};
}

double GridField::cell_volume() const { return dim_ == 1 ? h_ : h_ * h_; }

// Sums run over the sorted values so they do not depend on cell order; a
// field and its rearrangement then have bit-identical mass and L2 norm.
double GridField::mass() const {
  std::vector<double> v = values_;
  std::sort(v.begin(), v.end());
  return std::accumulate(v.begin(), v.end(), 0.0) * cell_volume();
}

double GridField::sum_of_squares() const {
  std::vector<double> v = values_;
  std::sort(v.begin(), v.end());
  return std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
}

double GridField::max_value() const { return *std::max_element(values_.begin(), values_.end()); }

double GridField::support_measure() const {
  const auto n = std::count_if(values_.begin(), values_.end(), [](double v) { return v > 0.0; });
  return static_cast<double>(n) * cell_volume();
}

double GridField::boundary_measure() const {
  // Each face between a support cell and a non-support cell (or the grid edge) counts once.
  auto positive = [&](int i, int j) {
    if (i < 0 || i >= counts_[0] || j < 0 || j >= counts_[1]) return false;
    return at(i, j) > 0.0;
  };
  std::size_t faces = 0;
  for (int i = 0; i < counts_[0]; ++i) {
    for (int j = 0; j < counts_[1]; ++j) {
      if (!positive(i, j)) continue;
      faces += !positive(i - 1, j);
      faces += !positive(i + 1, j);
      if (dim_ == 2) {
        faces += !positive(i, j - 1);
        faces += !positive(i, j + 1);
      }
    }
  }
  const double face = dim_ == 1 ? 1.0 : h_;
  return static_cast<double>(faces) * face;
}

double GridField::interpolate(std::array<double, 2> x) const {
  // Position in cell-center coordinates, then a tensor-product hat.
  double u[2] = {(x[0] - origin_[0]) / h_ - 0.5, dim_ == 2 ? (x[1] - origin_[1]) / h_ - 0.5 : 0.0};
  int base[2];
  double frac[2];
  for (int k = 0; k < 2; ++k) {
    const double f = std::floor(u[k]);
    base[k] = static_cast<int>(f);
    frac[k] = u[k] - f;
  }
  auto value = [&](int i, int j) {
    if (i < 0 || i >= counts_[0] || j < 0 || j >= counts_[1]) return 0.0;
    return at(i, j);
  };
  if (dim_ == 1) {
    return (1.0 - frac[0]) * value(base[0], 0) + frac[0] * value(base[0] + 1, 0);
  }
  return (1.0 - frac[0]) * (1.0 - frac[1]) * value(base[0], base[1]) +
         frac[0] * (1.0 - frac[1]) * value(base[0] + 1, base[1]) +
         (1.0 - frac[0]) * frac[1] * value(base[0], base[1] + 1) + frac[0] * frac[1] * value(base[0] + 1, base[1] + 1);
}

GridField decreasing_rearrangement(const GridField& f) {
  const int n = std::max(f.counts()[0], f.dim() == 2 ? f.counts()[1] : 1);
  GridField shape = GridField::centered(f.dim(), f.h(), {n, f.dim() == 2 ? n : 1});

  std::vector<std::size_t> order(shape.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> dist2(shape.size());
  for (int i = 0; i < shape.counts()[0]; ++i) {
    for (int j = 0; j < shape.counts()[1]; ++j) {
      const auto c = shape.center(i, j);
      dist2[shape.index(i, j)] = c[0] * c[0] + c[1] * c[1];
    }
  }
  // Linear index order is lexicographic, so a stable sort breaks ties by index.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist2[a] < dist2[b]; });

  std::vector<double> sorted = f.values();
  std::sort(sorted.begin(), sorted.end(), std::greater<>());

  std::vector<double> out(shape.size(), 0.0);
  for (std::size_t k = 0; k < sorted.size(); ++k) out[order[k]] = sorted[k];
  return GridField(f.dim(), f.h(), shape.origin(), shape.counts(), std::move(out));
}

GridField convolve(const GridField& f, const GridField& g) {
  require_compatible(f, g);
  const int dim = f.dim();
  const double h = f.h();
  std::array<int, 2> counts{f.counts()[0] + g.counts()[0] - 1, dim == 2 ? f.counts()[1] + g.counts()[1] - 1 : 1};
  std::array<double, 2> origin{f.origin()[0] + g.origin()[0] + 0.5 * h,
                               dim == 2 ? f.origin()[1] + g.origin()[1] + 0.5 * h : 0.0};
  std::vector<double> out(cell_total(dim, counts), 0.0);
  const double w = f.cell_volume();
  // Scatter in a fixed loop order so every output cell sums its terms in the same order.
  for (int i = 0; i < f.counts()[0]; ++i) {
    for (int j = 0; j < f.counts()[1]; ++j) {
      const double fv = f.at(i, j);
      if (fv == 0.0) continue;
      for (int k = 0; k < g.counts()[0]; ++k) {
        for (int l = 0; l < g.counts()[1]; ++l) {
          const double gv = g.at(k, l);
          if (gv == 0.0) continue;
          const std::size_t at = dim == 1 ? static_cast<std::size_t>(i + k)
                                          : static_cast<std::size_t>(i + k) * counts[1] + (j + l);
          out[at] += fv * gv * w;
        }
      }
    }
  }
  return GridField(dim, h, origin, counts, std::move(out));
}

double riesz_functional(const GridField& f, const GridField& g, const GridField& h) {
  require_compatible(f, g);
  require_compatible(f, h);
  const GridField fg = convolve(f, g);
  double total = 0.0;
  for (int i = 0; i < fg.counts()[0]; ++i) {
    for (int j = 0; j < fg.counts()[1]; ++j) {
      const double v = fg.at(i, j);
      if (v == 0.0) continue;
      total += v * h.interpolate(fg.center(i, j));
    }
  }
  return total * fg.cell_volume();
}

RieszCheck check_riesz(const GridField& f, const GridField& g, const GridField& h) {
  RieszCheck out;
  out.lhs = riesz_functional(f, g, h);
  out.rhs = riesz_functional(decreasing_rearrangement(f), decreasing_rearrangement(g), decreasing_rearrangement(h));
  out.margin = out.rhs - out.lhs;
  const double perimeter = f.boundary_measure() + g.boundary_measure() + h.boundary_measure();
  const double support = std::max({f.support_measure(), g.support_measure(), h.support_measure()});
  out.tolerance = 2.0 * f.h() * perimeter * support * f.max_value() * g.max_value() * h.max_value();
  return out;
}

SymmetrizationGap stay_integral_symmetrization_gap(const Domain& d, const JumpDensity& j, std::size_t n,
                                                   const QuadratureSpec& q) {
  if (n > kMaxSymmetrizationSteps) {
    throw PreconditionError(fmt::format("n = {} exceeds the cap of {}", n, kMaxSymmetrizationSteps));
  }
  SymmetrizationGap out;
  if (n == 0) {
    // Both sides are |D| = |D*| by definition.
    out.original = EstimateCI{d.volume(), 0.0, 0, q.seed};
    out.symmetrized = out.original;
    return out;
  }
  const Domain ds = symmetric_rearrangement(d);
  const JumpDensity js = rearranged_density(j);
  QuadratureSpec qs = q;
  qs.seed = sibling_seed(q.seed, 1);
  out.original = stay_integral(d, j, n, q);
  out.symmetrized = stay_integral(ds, js, n, qs);
  out.gap = out.symmetrized.mean - out.original.mean;
  out.error = std::hypot(out.original.std_error, out.symmetrized.std_error);
  return out;
}

GridField parse_grid_field(const std::string& text) {
  std::istringstream in(text);
  std::string token;
  std::vector<std::string> tokens;
  while (in >> token) tokens.push_back(token);

  std::size_t pos = 0;
  auto next_number = [&](const char* what) {
    if (pos >= tokens.size()) throw PreconditionError(fmt::format("grid field: missing {}", what));
    const std::string& s = tokens[pos++];
    double v = 0.0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size()) {
      throw PreconditionError(fmt::format("grid field: bad number '{}' for {}", s, what));
    }
    return v;
  };

  const double dv = next_number("dimension");
  if (dv != 1.0 && dv != 2.0) throw PreconditionError("grid field: dimension must be 1 or 2");
  const int dim = static_cast<int>(dv);
  const double h = next_number("cell size");
  std::array<double, 2> origin{0.0, 0.0};
  std::array<int, 2> counts{1, 1};
  for (int k = 0; k < dim; ++k) origin[k] = next_number("origin");
  for (int k = 0; k < dim; ++k) {
    const double c = next_number("cell count");
    if (c < 1.0 || c != std::floor(c)) throw PreconditionError("grid field: cell counts must be positive integers");
    counts[k] = static_cast<int>(c);
  }
  std::vector<double> values;
  values.reserve(cell_total(dim, counts));
  while (pos < tokens.size()) values.push_back(next_number("cell value"));
  return GridField(dim, h, origin, counts, std::move(values));
}

GridField load_grid_field(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError(fmt::format("cannot open grid field '{}'", path));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_grid_field(buf.str());
}

std::string format_grid_field(const GridField& f) {
  std::string out = fmt::format("{} {:.17g}", f.dim(), f.h());
  for (int k = 0; k < f.dim(); ++k) out += fmt::format(" {:.17g}", f.origin()[k]);
  for (int k = 0; k < f.dim(); ++k) out += fmt::format(" {}", f.counts()[k]);
  out += '\n';
  for (int i = 0; i < f.counts()[0]; ++i) {
    for (int j = 0; j < f.counts()[1]; ++j) {
      if (j > 0) out += ' ';
      out += fmt::format("{:.17g}", f.at(i, j));
    }
    out += '\n';
  }
  return out;
}

GridField random_indicator(int dim, double h, int cells_per_axis, Engine& eng) {
  if (cells_per_axis < 2) throw PreconditionError("need at least two cells per axis");
  std::array<int, 2> counts{cells_per_axis, dim == 2 ? cells_per_axis : 1};
  std::vector<double> values(cell_total(dim, counts), 0.0);
  std::uniform_int_distribution<int> pieces(1, 3);
  std::uniform_int_distribution<int> coord(0, cells_per_axis - 1);
  const int n = pieces(eng);
  for (int p = 0; p < n; ++p) {
    int lo[2] = {0, 0}, hi[2] = {1, 1};
    for (int k = 0; k < dim; ++k) {
      int a = coord(eng), b = coord(eng);
      if (a > b) std::swap(a, b);
      lo[k] = a;
      hi[k] = b + 1;
    }
    for (int i = lo[0]; i < hi[0]; ++i) {
      for (int j = lo[1]; j < hi[1]; ++j) {
        values[dim == 1 ? i : static_cast<std::size_t>(i) * counts[1] + j] = 1.0;
      }
    }
  }
  return GridField(dim, h, {0.0, 0.0}, counts, std::move(values));
}

}  // namespace cpe
