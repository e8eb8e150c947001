#pragma once

#include <array>
#include <functional>
#include <utility>
#include <vector>

#include "saf/rng.hpp"

namespace saf {

// Spline degree. Cubic throughout; the basis matrix is pluggable but only the
// Catmull-Rom instance ships.
inline constexpr int kSplineOrder = 3;

// Maps the power basis of the local abscissa u to blending weights over one
// span of control points.
struct SplineBasis {
  int order = kSplineOrder;
  std::array<double, 16> coeff{};  // row-major (order+1) x (order+1)

  double at(int r, int c) const { return coeff[static_cast<std::size_t>(r) * 4 + c]; }

  static const SplineBasis& catmull_rom();
};

// Uniform sampling of one activation function: abscissas are fixed and
// symmetric around the origin, ordinates are the trainable control points.
struct KnotGrid {
  double delta_x = 0.0;
  std::vector<double> ordinates;

  KnotGrid() = default;
  KnotGrid(double dx, std::vector<double> q);  // validates invariants

  int size() const { return static_cast<int>(ordinates.size()); }
  int half() const { return (size() - 1) / 2; }
  double abscissa(int k) const { return (k - half()) * delta_x; }
  int span_count() const { return size() - kSplineOrder; }
};

// Which span of control points an activation falls in. `u` is the local
// abscissa, in [0,1) unless the span had to be clamped to the grid boundary
// (extrapolation), in which case u runs past that range.
struct SpanAddress {
  int span_index = 0;
  double u = 0.0;
  bool clamped = false;
};

SpanAddress locate(double s, const KnotGrid& grid);

// [u^3, u^2, u, 1] and its derivative in u.
std::array<double, 4> reference_vector(double u);
std::array<double, 4> reference_vector_derivative(double u);

double eval(double s, const KnotGrid& grid, const SplineBasis& basis);
double eval_input_derivative(double s, const KnotGrid& grid, const SplineBasis& basis);

// Gradient of eval(s) with respect to the four ordinates of the active span;
// all other ordinates have zero gradient.
std::pair<int, std::array<double, 4>> span_gradient(double s, const KnotGrid& grid,
                                                    const SplineBasis& basis);

// Samples f on the symmetric abscissa grid.
KnotGrid init_from_function(const std::function<double(double)>& f, double delta_x, int knot_count);

// Adds N(0, sigma^2) noise to a uniformly random subset of the ordinates. The
// subset size is fraction*Q rounded half up, at least 1 when fraction > 0.
KnotGrid perturb(const KnotGrid& grid, double fraction, double sigma, Rng& rng);

}  // namespace saf
