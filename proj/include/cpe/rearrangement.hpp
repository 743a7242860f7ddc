#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cpe/eigenvalue.hpp"
#include "cpe/geometry.hpp"
#include "cpe/jump_models.hpp"
#include "cpe/shc.hpp"

namespace cpe {

/// A nonnegative function sampled on a uniform lattice in one or two
/// dimensions. Cell i along axis k is centered at origin_k + (i + 1/2) h and
/// values are C-ordered (last axis fastest).
class GridField {
 public:
  GridField(int dim, double h, std::array<double, 2> origin, std::array<int, 2> counts, std::vector<double> values);

  /// Indicator of a domain, sampled at cell centers.
  static GridField indicator(const Domain& d, double h, std::array<double, 2> origin, std::array<int, 2> counts);

  /// All-zero field on a grid centered at the origin.
  static GridField centered(int dim, double h, std::array<int, 2> counts);

  int dim() const { return dim_; }
  double h() const { return h_; }
  const std::array<double, 2>& origin() const { return origin_; }
  const std::array<int, 2>& counts() const { return counts_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  double at(int i, int j = 0) const { return values_[index(i, j)]; }
  std::size_t index(int i, int j = 0) const {
    return dim_ == 1 ? static_cast<std::size_t>(i) : static_cast<std::size_t>(i) * counts_[1] + j;
  }
  /// Center of cell (i, j); the second coordinate is unused in 1D.
  std::array<double, 2> center(int i, int j = 0) const;

  double cell_volume() const;
  double mass() const;
  double sum_of_squares() const;
  double max_value() const;
  /// Measure of the set where the field is positive.
  double support_measure() const;
  /// Measure of the faces separating support cells from non-support cells.
  double boundary_measure() const;

  /// Multilinear interpolation of the cell-center values; zero outside the grid.
  double interpolate(std::array<double, 2> x) const;

 private:
  int dim_;
  double h_;
  std::array<double, 2> origin_;
  std::array<int, 2> counts_;
  std::vector<double> values_;
};

/// f*: the values of f sorted in decreasing order and placed on the cells of
/// a centered grid by increasing distance of the cell center from the origin
/// (ties broken by lexicographic cell index).
GridField decreasing_rearrangement(const GridField& f);

/// Riemann-sum convolution (f * g)(z) = sum_x f(x) g(z - x) h^d. The output
/// cells are centered on the sums of input cell centers.
GridField convolve(const GridField& f, const GridField& g);

/// J(f, g, h) = ∫ (f * g)(x) h(x) dx, with h interpolated at the convolution points.
double riesz_functional(const GridField& f, const GridField& g, const GridField& h);

struct RieszCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  /// Grid tolerance: 2 h (boundary measure sum) (largest support measure) (product of maxima).
  double tolerance = 0.0;

  bool holds() const { return margin >= -tolerance; }
};

/// Compares J(f, g, h) with J(f*, g*, h*).
RieszCheck check_riesz(const GridField& f, const GridField& g, const GridField& h);

struct SymmetrizationGap {
  EstimateCI original;
  EstimateCI symmetrized;
  double gap = 0.0;
  double error = 0.0;

  bool holds(double sigmas = 3.0) const { return gap >= -sigmas * error; }
};

inline constexpr std::size_t kMaxSymmetrizationSteps = 6;

/// ∫_D A(x, n, D) dx against its symmetrized counterpart on D* with j*.
SymmetrizationGap stay_integral_symmetrization_gap(const Domain& d, const JumpDensity& j, std::size_t n,
                                                   const QuadratureSpec& q);

/// Plain-text field format: header "d h origin... counts...", then the
/// values in C order separated by whitespace.
GridField parse_grid_field(const std::string& text);
GridField load_grid_field(const std::string& path);
std::string format_grid_field(const GridField& f);

/// Random union of one to three cell-aligned intervals (1D) or rectangles
/// (2D) on an n-cell-per-axis grid, used by the Riesz property suite.
GridField random_indicator(int dim, double h, int cells_per_axis, Engine& eng);

}  // namespace cpe
