#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "cpe/random.hpp"

namespace cpe {

/// Highest supported spatial dimension. Points and matrices live on the stack.
inline constexpr int kMaxDim = 3;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

/// Volume of the unit ball in R^d.
double unit_ball_volume(int d);

struct BoundingBox {
  Vec lo;
  Vec hi;
  int dim() const { return static_cast<int>(lo.size()); }
  double volume() const;
};

class Domain;

namespace shape {

struct Interval {
  double lo;
  double hi;
};

struct Box {
  Vec lo;
  Vec hi;
};

struct Ball {
  Vec center;
  double radius;
};

/// The open set {x : (x - c)^T form (x - c) < 1}.
struct Ellipsoid {
  Vec center;
  Mat form;
};

struct Translate {
  std::shared_ptr<const Domain> base;
  Vec shift;
};

/// Image of a base domain under an invertible linear map.
struct LinearImage {
  std::shared_ptr<const Domain> base;
  Mat map;
  Mat inverse;
};

/// Union of lattice cells. Cell i along axis k spans
/// [origin_k + i h, origin_k + (i + 1) h). Mask is C-ordered (last axis fastest).
struct GridSet {
  Vec origin;
  double h;
  std::vector<int> counts;
  std::vector<std::uint8_t> mask;
};

}  // namespace shape

/// A bounded open set in R^d. Immutable once built; copies share structure.
class Domain {
 public:
  using Shape = std::variant<shape::Interval, shape::Box, shape::Ball, shape::Ellipsoid, shape::Translate,
                             shape::LinearImage, shape::GridSet>;

  static Domain interval(double lo, double hi);
  static Domain box(Vec lo, Vec hi);
  static Domain ball(Vec center, double radius);
  static Domain ellipsoid(Vec center, Mat form);
  static Domain translate(const Domain& base, Vec shift);
  static Domain linear_image(const Domain& base, Mat map);
  static Domain grid(Vec origin, double h, std::vector<int> counts, std::vector<std::uint8_t> mask);

  int dim() const { return dim_; }
  double volume() const { return volume_; }
  const BoundingBox& bounds() const { return bounds_; }
  const Shape& shape() const { return shape_; }

  /// Strict membership: boundary points are outside.
  bool contains(const Vec& p) const;

  /// Membership without the dimension check, for hot loops that already validated.
  bool contains_unchecked(const Vec& p) const;

  /// Uniform draw from the domain.
  Vec sample_uniform(Engine& eng) const;

  /// Short human-readable description, also used in output records.
  std::string describe() const;

  bool is_grid() const { return std::holds_alternative<shape::GridSet>(shape_); }

 private:
  Domain(Shape shape, int dim);

  Shape shape_;
  int dim_;
  double volume_ = 0.0;
  BoundingBox bounds_;
};

Vec make_vec(std::initializer_list<double> values);

/// Centered ball with the same volume.
Domain symmetric_rearrangement(const Domain& d);

/// Centered ball in R^dim of the given volume.
Domain ball_with_volume(int dim, double volume);

struct SelfDifferenceReport {
  bool contained = false;
  double violating_fraction = 0.0;
  std::size_t pairs = 0;
  double tolerance = 0.0;
};

/// Default tolerance on the violating pair mass.
inline constexpr double kSelfDifferenceTolerance = 1e-3;
inline constexpr std::size_t kSelfDifferencePairs = 200'000;

/// Tests D - D ⊂ A up to a pair-mass tolerance. Analytic D is sampled with
/// n_pairs uniform pairs; a GridSet D is checked exhaustively on cell centers.
SelfDifferenceReport self_difference_subset(const Domain& d, const Domain& a,
                                            double tolerance = kSelfDifferenceTolerance,
                                            std::size_t n_pairs = kSelfDifferencePairs, std::uint64_t seed = 0);

/// Image of D under a map with |det M| = 1. GridSet inputs are rejected.
Domain apply_linear(const Domain& d, const Mat& m);

/// Rasterizes an analytic domain: a cell is occupied when its center is inside.
Domain rasterize(const Domain& d, int cells_per_axis);

/// Loads a GridSet from the plain-text mask format: a header line
/// "d h origin_1..origin_d n_1..n_d" followed by the 0/1 cell characters in
/// C order. Whitespace between characters is ignored.
Domain load_grid_mask(const std::string& path);
Domain parse_grid_mask(const std::string& text);
std::string format_grid_mask(const Domain& grid);

}  // namespace cpe
