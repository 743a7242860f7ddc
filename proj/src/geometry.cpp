#include "cpe/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <locale>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "cpe/error.hpp"
#include "cpe/parallel.hpp"

namespace cpe {

namespace {

constexpr std::size_t kMaxConsecutiveRejections = 10'000'000;

std::string format_vec(const Vec& v) {
  std::string out = "[";
  for (int i = 0; i < v.size(); ++i) out += fmt::format("{}{:.17g}", i ? "," : "", v[i]);
  return out + "]";
}

std::string format_mat(const Mat& m) {
  std::string out = "[";
  for (int i = 0; i < m.rows(); ++i) {
    out += i ? ",[" : "[";
    for (int j = 0; j < m.cols(); ++j) out += fmt::format("{}{:.17g}", j ? "," : "", m(i, j));
    out += "]";
  }
  return out + "]";
}

void check_dim(int d) {
  if (d < 1 || d > kMaxDim) {
    throw PreconditionError(fmt::format("dimension {} outside supported range [1, {}]", d, kMaxDim));
  }
}

std::size_t flat_index(const std::vector<int>& counts, const int* idx) {
  std::size_t flat = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) flat = flat * counts[k] + static_cast<std::size_t>(idx[k]);
  return flat;
}

bool grid_cell_occupied(const shape::GridSet& g, const int* idx) {
  for (std::size_t k = 0; k < g.counts.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= g.counts[k]) return false;
  }
  return g.mask[flat_index(g.counts, idx)] != 0;
}

bool grid_contains(const shape::GridSet& g, const Vec& p) {
  const int d = static_cast<int>(g.counts.size());
  std::array<int, kMaxDim> idx{};
  std::array<bool, kMaxDim> on_face{};
  for (int k = 0; k < d; ++k) {
    const double u = (p[k] - g.origin[k]) / g.h;
    const double fl = std::floor(u);
    idx[k] = static_cast<int>(fl);
    on_face[k] = (u == fl);
  }
  if (!grid_cell_occupied(g, idx.data())) return false;
  // A point on a lattice face is interior only if the cell across the face is occupied too.
  for (int k = 0; k < d; ++k) {
    if (!on_face[k]) continue;
    auto below = idx;
    --below[k];
    if (!grid_cell_occupied(g, below.data())) return false;
  }
  return true;
}

double ellipsoid_volume(const Mat& form) {
  return unit_ball_volume(static_cast<int>(form.rows())) / std::sqrt(form.determinant());
}

}  // namespace

double unit_ball_volume(int d) {
  return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(1.0 + 0.5 * d);
}

double BoundingBox::volume() const {
  double v = 1.0;
  for (int k = 0; k < dim(); ++k) v *= hi[k] - lo[k];
  return v;
}

Vec make_vec(std::initializer_list<double> values) {
  Vec v(static_cast<Eigen::Index>(values.size()));
  int i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

Domain::Domain(Shape shape, int dim) : shape_(std::move(shape)), dim_(dim) {
  check_dim(dim_);
  std::visit(
      [this](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, shape::Interval>) {
          volume_ = s.hi - s.lo;
          bounds_ = {make_vec({s.lo}), make_vec({s.hi})};
        } else if constexpr (std::is_same_v<S, shape::Box>) {
          volume_ = 1.0;
          for (int k = 0; k < dim_; ++k) volume_ *= s.hi[k] - s.lo[k];
          bounds_ = {s.lo, s.hi};
        } else if constexpr (std::is_same_v<S, shape::Ball>) {
          volume_ = unit_ball_volume(dim_) * std::pow(s.radius, dim_);
          bounds_ = {s.center.array() - s.radius, s.center.array() + s.radius};
        } else if constexpr (std::is_same_v<S, shape::Ellipsoid>) {
          volume_ = ellipsoid_volume(s.form);
          const Mat inv = s.form.inverse();
          Vec half(dim_);
          for (int k = 0; k < dim_; ++k) half[k] = std::sqrt(inv(k, k));
          bounds_ = {s.center - half, s.center + half};
        } else if constexpr (std::is_same_v<S, shape::Translate>) {
          volume_ = s.base->volume();
          bounds_ = {s.base->bounds().lo + s.shift, s.base->bounds().hi + s.shift};
        } else if constexpr (std::is_same_v<S, shape::LinearImage>) {
          volume_ = s.base->volume() * std::abs(s.map.determinant());
          const BoundingBox& b = s.base->bounds();
          Vec lo = Vec::Constant(dim_, std::numeric_limits<double>::infinity());
          Vec hi = -lo;
          for (int corner = 0; corner < (1 << dim_); ++corner) {
            Vec c(dim_);
            for (int k = 0; k < dim_; ++k) c[k] = (corner >> k & 1) ? b.hi[k] : b.lo[k];
            const Vec img = s.map * c;
            lo = lo.cwiseMin(img);
            hi = hi.cwiseMax(img);
          }
          bounds_ = {lo, hi};
        } else if constexpr (std::is_same_v<S, shape::GridSet>) {
          const auto occupied = std::count_if(s.mask.begin(), s.mask.end(), [](auto m) { return m != 0; });
          volume_ = static_cast<double>(occupied) * std::pow(s.h, dim_);
          Vec hi = s.origin;
          for (int k = 0; k < dim_; ++k) hi[k] += s.counts[k] * s.h;
          bounds_ = {s.origin, hi};
        }
      },
      shape_);
  if (!(volume_ > 0.0) || !std::isfinite(volume_)) {
    throw PreconditionError(fmt::format("domain volume must be positive and finite, got {}", volume_));
  }
}

Domain Domain::interval(double lo, double hi) {
  if (!(lo < hi)) throw PreconditionError("interval requires lo < hi");
  return Domain(shape::Interval{lo, hi}, 1);
}

Domain Domain::box(Vec lo, Vec hi) {
  if (lo.size() != hi.size()) throw DimensionMismatch(static_cast<int>(lo.size()), static_cast<int>(hi.size()));
  for (int k = 0; k < lo.size(); ++k) {
    if (!(lo[k] < hi[k])) throw PreconditionError("box requires lo < hi on every axis");
  }
  const int d = static_cast<int>(lo.size());
  return Domain(shape::Box{std::move(lo), std::move(hi)}, d);
}

Domain Domain::ball(Vec center, double radius) {
  if (!(radius > 0.0)) throw PreconditionError("ball radius must be positive");
  const int d = static_cast<int>(center.size());
  return Domain(shape::Ball{std::move(center), radius}, d);
}

Domain Domain::ellipsoid(Vec center, Mat form) {
  if (form.rows() != center.size() || form.cols() != center.size()) {
    throw DimensionMismatch(static_cast<int>(center.size()), static_cast<int>(form.rows()));
  }
  if ((form - form.transpose()).cwiseAbs().maxCoeff() > 1e-12 * form.cwiseAbs().maxCoeff()) {
    throw PreconditionError("ellipsoid form must be symmetric");
  }
  Eigen::LLT<Mat> llt(form);
  if (llt.info() != Eigen::Success) throw PreconditionError("ellipsoid form must be positive definite");
  const int d = static_cast<int>(center.size());
  return Domain(shape::Ellipsoid{std::move(center), std::move(form)}, d);
}

Domain Domain::translate(const Domain& base, Vec shift) {
  if (shift.size() != base.dim()) throw DimensionMismatch(base.dim(), static_cast<int>(shift.size()));
  return Domain(shape::Translate{std::make_shared<const Domain>(base), std::move(shift)}, base.dim());
}

Domain Domain::linear_image(const Domain& base, Mat map) {
  if (map.rows() != base.dim() || map.cols() != base.dim()) {
    throw DimensionMismatch(base.dim(), static_cast<int>(map.rows()));
  }
  const double det = map.determinant();
  if (!(std::abs(det) > 0.0)) throw PreconditionError("linear map must be invertible");
  Mat inverse = map.inverse();
  return Domain(shape::LinearImage{std::make_shared<const Domain>(base), std::move(map), std::move(inverse)},
                base.dim());
}

Domain Domain::grid(Vec origin, double h, std::vector<int> counts, std::vector<std::uint8_t> mask) {
  if (static_cast<std::size_t>(origin.size()) != counts.size()) {
    throw DimensionMismatch(static_cast<int>(counts.size()), static_cast<int>(origin.size()));
  }
  if (!(h > 0.0)) throw PreconditionError("grid cell size must be positive");
  std::size_t cells = 1;
  for (int c : counts) {
    if (c <= 0) throw PreconditionError("grid counts must be positive");
    cells *= static_cast<std::size_t>(c);
  }
  if (mask.size() != cells) {
    throw PreconditionError(fmt::format("grid mask has {} cells, expected {}", mask.size(), cells));
  }
  const int d = static_cast<int>(counts.size());
  return Domain(shape::GridSet{std::move(origin), h, std::move(counts), std::move(mask)}, d);
}

bool Domain::contains(const Vec& p) const {
  if (p.size() != dim_) throw DimensionMismatch(dim_, static_cast<int>(p.size()));
  return contains_unchecked(p);
}

bool Domain::contains_unchecked(const Vec& p) const {
  return std::visit(
      [&p](const auto& s) -> bool {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, shape::Interval>) {
          return p[0] > s.lo && p[0] < s.hi;
        } else if constexpr (std::is_same_v<S, shape::Box>) {
          return (p.array() > s.lo.array()).all() && (p.array() < s.hi.array()).all();
        } else if constexpr (std::is_same_v<S, shape::Ball>) {
          return (p - s.center).squaredNorm() < s.radius * s.radius;
        } else if constexpr (std::is_same_v<S, shape::Ellipsoid>) {
          const Vec q = p - s.center;
          return q.dot(s.form * q) < 1.0;
        } else if constexpr (std::is_same_v<S, shape::Translate>) {
          return s.base->contains_unchecked(p - s.shift);
        } else if constexpr (std::is_same_v<S, shape::LinearImage>) {
          return s.base->contains_unchecked(s.inverse * p);
        } else {
          return grid_contains(s, p);
        }
      },
      shape_);
}

Vec Domain::sample_uniform(Engine& eng) const {
  if (const auto* t = std::get_if<shape::Translate>(&shape_)) return t->base->sample_uniform(eng) + t->shift;
  if (const auto* l = std::get_if<shape::LinearImage>(&shape_)) return l->map * l->base->sample_uniform(eng);
  if (const auto* g = std::get_if<shape::GridSet>(&shape_)) {
    // Pick an occupied cell by rejection over the mask, then a point inside it.
    const int d = dim_;
    std::array<int, kMaxDim> idx{};
    for (std::size_t attempt = 0; attempt < kMaxConsecutiveRejections; ++attempt) {
      for (int k = 0; k < d; ++k) {
        idx[k] = std::uniform_int_distribution<int>(0, g->counts[k] - 1)(eng);
      }
      if (!g->mask[flat_index(g->counts, idx.data())]) continue;
      Vec p(d);
      for (int k = 0; k < d; ++k) p[k] = g->origin[k] + (idx[k] + uniform01(eng)) * g->h;
      if (grid_contains(*g, p)) return p;
    }
    throw NumericalError("grid sampling acceptance rate below 1e-6");
  }
  const Vec extent = bounds_.hi - bounds_.lo;
  Vec p(dim_);
  for (std::size_t attempt = 0; attempt < kMaxConsecutiveRejections; ++attempt) {
    for (int k = 0; k < dim_; ++k) p[k] = bounds_.lo[k] + uniform01(eng) * extent[k];
    if (contains_unchecked(p)) return p;
  }
  throw NumericalError("rejection sampling acceptance rate below 1e-6 for " + describe());
}

std::string Domain::describe() const {
  return std::visit(
      [this](const auto& s) -> std::string {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, shape::Interval>) {
          return fmt::format("interval({:.17g},{:.17g})", s.lo, s.hi);
        } else if constexpr (std::is_same_v<S, shape::Box>) {
          return fmt::format("box({},{})", format_vec(s.lo), format_vec(s.hi));
        } else if constexpr (std::is_same_v<S, shape::Ball>) {
          return fmt::format("ball({},{:.17g})", format_vec(s.center), s.radius);
        } else if constexpr (std::is_same_v<S, shape::Ellipsoid>) {
          return fmt::format("ellipsoid({},{})", format_vec(s.center), format_mat(s.form));
        } else if constexpr (std::is_same_v<S, shape::Translate>) {
          return fmt::format("translate({},{})", s.base->describe(), format_vec(s.shift));
        } else if constexpr (std::is_same_v<S, shape::LinearImage>) {
          return fmt::format("linear({},{})", s.base->describe(), format_mat(s.map));
        } else {
          return fmt::format("grid(d={},h={:.17g},volume={:.17g})", dim_, s.h, volume_);
        }
      },
      shape_);
}

Domain ball_with_volume(int dim, double volume) {
  if (!(volume > 0.0) || !std::isfinite(volume)) throw PreconditionError("volume must be positive and finite");
  const double radius = std::pow(volume / unit_ball_volume(dim), 1.0 / dim);
  if (dim == 1) return Domain::interval(-radius, radius);
  return Domain::ball(Vec::Zero(dim), radius);
}

Domain symmetric_rearrangement(const Domain& d) {
  if (const auto* b = std::get_if<shape::Ball>(&d.shape()); b && b->center.isZero(0.0)) return d;
  return ball_with_volume(d.dim(), d.volume());
}

SelfDifferenceReport self_difference_subset(const Domain& d, const Domain& a, double tolerance,
                                            std::size_t n_pairs, std::uint64_t seed) {
  if (d.dim() != a.dim()) throw DimensionMismatch(d.dim(), a.dim());
  if (!(tolerance >= 0.0 && tolerance < 1.0)) throw PreconditionError("tolerance must lie in [0, 1)");
  SelfDifferenceReport report;
  report.tolerance = tolerance;

  if (const auto* g = std::get_if<shape::GridSet>(&d.shape())) {
    std::vector<Vec> centers;
    const int dim = d.dim();
    std::array<int, kMaxDim> idx{};
    const std::size_t cells = g->mask.size();
    for (std::size_t flat = 0; flat < cells; ++flat) {
      if (!g->mask[flat]) continue;
      std::size_t rem = flat;
      for (int k = dim - 1; k >= 0; --k) {
        idx[k] = static_cast<int>(rem % g->counts[k]);
        rem /= g->counts[k];
      }
      Vec c(dim);
      for (int k = 0; k < dim; ++k) c[k] = g->origin[k] + (idx[k] + 0.5) * g->h;
      centers.push_back(c);
    }
    std::vector<std::size_t> violations(centers.size(), 0);
    for_each_block(centers.size(), [&](std::size_t i) {
      std::size_t v = 0;
      for (const Vec& other : centers) v += a.contains_unchecked(centers[i] - other) ? 0 : 1;
      violations[i] = v;
    });
    std::size_t total = 0;
    for (auto v : violations) total += v;
    report.pairs = centers.size() * centers.size();
    report.violating_fraction = static_cast<double>(total) / static_cast<double>(report.pairs);
  } else {
    if (n_pairs == 0) throw PreconditionError("self-difference check needs at least one pair");
    const std::size_t blocks = block_count(n_pairs, kBlockSize);
    std::vector<std::size_t> violations(blocks, 0);
    for_each_block(blocks, [&](std::size_t b) {
      Engine eng = make_stream(seed, StreamSalt::self_difference, b);
      const std::size_t end = std::min(n_pairs, (b + 1) * kBlockSize);
      std::size_t v = 0;
      for (std::size_t i = b * kBlockSize; i < end; ++i) {
        const Vec x = d.sample_uniform(eng);
        const Vec y = d.sample_uniform(eng);
        if (!a.contains_unchecked(x - y)) ++v;
      }
      violations[b] = v;
    });
    std::size_t total = 0;
    for (auto v : violations) total += v;
    report.pairs = n_pairs;
    report.violating_fraction = static_cast<double>(total) / static_cast<double>(n_pairs);
  }
  report.contained = report.violating_fraction <= tolerance;
  return report;
}

Domain apply_linear(const Domain& d, const Mat& m) {
  if (m.rows() != d.dim() || m.cols() != d.dim()) throw DimensionMismatch(d.dim(), static_cast<int>(m.rows()));
  const double det = m.determinant();
  if (std::abs(std::abs(det) - 1.0) > 1e-12) {
    throw PreconditionError(fmt::format("linear map must satisfy |det M| = 1, got det = {:.17g}", det));
  }
  return std::visit(
      [&](const auto& s) -> Domain {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, shape::Interval>) {
          const double a = m(0, 0) * s.lo;
          const double b = m(0, 0) * s.hi;
          return Domain::interval(std::min(a, b), std::max(a, b));
        } else if constexpr (std::is_same_v<S, shape::Box>) {
          const bool signed_diagonal = m.isDiagonal(0.0) && (m.diagonal().cwiseAbs().array() == 1.0).all();
          if (!signed_diagonal) return Domain::linear_image(d, m);
          Vec lo = m * s.lo;
          Vec hi = m * s.hi;
          return Domain::box(lo.cwiseMin(hi), lo.cwiseMax(hi));
        } else if constexpr (std::is_same_v<S, shape::Ball>) {
          const Mat inv = m.inverse();
          const Mat form = inv.transpose() * inv / (s.radius * s.radius);
          return Domain::ellipsoid(m * s.center, 0.5 * (form + form.transpose()));
        } else if constexpr (std::is_same_v<S, shape::Ellipsoid>) {
          const Mat inv = m.inverse();
          const Mat form = inv.transpose() * s.form * inv;
          return Domain::ellipsoid(m * s.center, 0.5 * (form + form.transpose()));
        } else if constexpr (std::is_same_v<S, shape::Translate>) {
          return Domain::translate(apply_linear(*s.base, m), m * s.shift);
        } else if constexpr (std::is_same_v<S, shape::LinearImage>) {
          return Domain::linear_image(*s.base, m * s.map);
        } else {
          throw PreconditionError("apply_linear does not support grid sets");
        }
      },
      d.shape());
}

Domain rasterize(const Domain& d, int cells_per_axis) {
  if (cells_per_axis < 1) throw PreconditionError("rasterize needs at least one cell per axis");
  const BoundingBox& b = d.bounds();
  const int dim = d.dim();
  double extent = 0.0;
  for (int k = 0; k < dim; ++k) extent = std::max(extent, b.hi[k] - b.lo[k]);
  const double h = extent / cells_per_axis;
  std::vector<int> counts(dim);
  std::size_t cells = 1;
  for (int k = 0; k < dim; ++k) {
    counts[k] = std::max(1, static_cast<int>(std::ceil((b.hi[k] - b.lo[k]) / h - 1e-9)));
    cells *= counts[k];
  }
  std::vector<std::uint8_t> mask(cells, 0);
  std::array<int, kMaxDim> idx{};
  for (std::size_t flat = 0; flat < cells; ++flat) {
    std::size_t rem = flat;
    for (int k = dim - 1; k >= 0; --k) {
      idx[k] = static_cast<int>(rem % counts[k]);
      rem /= counts[k];
    }
    Vec c(dim);
    for (int k = 0; k < dim; ++k) c[k] = b.lo[k] + (idx[k] + 0.5) * h;
    mask[flat] = d.contains_unchecked(c) ? 1 : 0;
  }
  return Domain::grid(b.lo, h, std::move(counts), std::move(mask));
}

Domain parse_grid_mask(const std::string& text) {
  std::istringstream in(text);
  in.imbue(std::locale::classic());
  std::string header;
  if (!std::getline(in, header)) throw PreconditionError("grid mask: missing header line");
  std::istringstream hs(header);
  hs.imbue(std::locale::classic());
  int d = 0;
  double h = 0.0;
  if (!(hs >> d >> h)) throw PreconditionError("grid mask: header must start with 'd h'");
  check_dim(d);
  Vec origin(d);
  std::vector<int> counts(d);
  for (int k = 0; k < d; ++k) {
    if (!(hs >> origin[k])) throw PreconditionError("grid mask: header is missing an origin coordinate");
  }
  for (int k = 0; k < d; ++k) {
    if (!(hs >> counts[k])) throw PreconditionError("grid mask: header is missing a cell count");
  }
  std::vector<std::uint8_t> mask;
  char c = 0;
  std::size_t line = 2;
  while (in.get(c)) {
    if (c == '\n') {
      ++line;
    } else if (c == '0' || c == '1') {
      mask.push_back(c == '1' ? 1 : 0);
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      throw PreconditionError(fmt::format("grid mask: unexpected character '{}' on line {}", c, line));
    }
  }
  return Domain::grid(origin, h, std::move(counts), std::move(mask));
}

Domain load_grid_mask(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw PreconditionError("cannot open grid mask file: " + path);
  std::stringstream buffer;
  buffer << file.rdbuf();
  return parse_grid_mask(buffer.str());
}

std::string format_grid_mask(const Domain& grid) {
  const auto* g = std::get_if<shape::GridSet>(&grid.shape());
  if (!g) throw PreconditionError("format_grid_mask expects a grid set");
  std::string out = fmt::format("{} {:.17g}", grid.dim(), g->h);
  for (int k = 0; k < grid.dim(); ++k) out += fmt::format(" {:.17g}", g->origin[k]);
  for (int c : g->counts) out += fmt::format(" {}", c);
  out += '\n';
  const std::size_t row = static_cast<std::size_t>(g->counts.back());
  for (std::size_t i = 0; i < g->mask.size(); ++i) {
    out += g->mask[i] ? '1' : '0';
    if ((i + 1) % row == 0) out += '\n';
  }
  return out;
}

}  // namespace cpe
