#include "saf/spline.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace saf {

const SplineBasis& SplineBasis::catmull_rom() {
  static const SplineBasis basis{kSplineOrder,
                                 {-0.5, 1.5, -1.5, 0.5,    //
                                  1.0, -2.5, 2.0, -0.5,    //
                                  -0.5, 0.0, 0.5, 0.0,     //
                                  0.0, 1.0, 0.0, 0.0}};
  return basis;
}

KnotGrid::KnotGrid(double dx, std::vector<double> q) : delta_x(dx), ordinates(std::move(q)) {
  if (!(delta_x > 0.0)) throw std::invalid_argument("KnotGrid: delta_x must be positive");
  const int n = size();
  if (n < kSplineOrder + 1) throw std::invalid_argument("KnotGrid: too few knots");
  if (n % 2 == 0) throw std::invalid_argument("KnotGrid: knot count must be odd");
  for (double v : ordinates)
    if (!std::isfinite(v)) throw std::invalid_argument("KnotGrid: non-finite ordinate");
}

SpanAddress locate(double s, const KnotGrid& grid) {
  if (!std::isfinite(s)) throw std::domain_error("locate: non-finite activation");
  const double t = s / grid.delta_x;
  const int half = grid.half();
  // Span i runs between knots i+1 and i+2, so u = 0 lands exactly on a knot.
  double tf = std::floor(t);
  // Keep the integer cast safe for activations far outside the grid.
  if (tf > 1e12) tf = 1e12;
  if (tf < -1e12) tf = -1e12;
  const long long raw = static_cast<long long>(tf) + half - 1;
  const long long max_span = grid.size() - kSplineOrder - 1;
  long long idx = raw;
  if (idx < 0) idx = 0;
  if (idx > max_span) idx = max_span;
  const double u = t - static_cast<double>(idx + 1 - half);
  return SpanAddress{static_cast<int>(idx), u, idx != raw};
}

std::array<double, 4> reference_vector(double u) {
  const double u2 = u * u;
  return {u2 * u, u2, u, 1.0};
}

std::array<double, 4> reference_vector_derivative(double u) {
  return {3.0 * u * u, 2.0 * u, 1.0, 0.0};
}

namespace {

// B * q over the active span.
std::array<double, 4> blend(const SplineBasis& basis, const KnotGrid& grid, int span) {
  const double* q = grid.ordinates.data() + span;
  std::array<double, 4> bq{};
  for (int r = 0; r < 4; ++r) {
    double acc = 0.0;
    for (int c = 0; c < 4; ++c) acc += basis.at(r, c) * q[c];
    bq[r] = acc;
  }
  return bq;
}

}  // namespace

double eval(double s, const KnotGrid& grid, const SplineBasis& basis) {
  const SpanAddress a = locate(s, grid);
  const auto bq = blend(basis, grid, a.span_index);
  const auto u = reference_vector(a.u);
  return u[0] * bq[0] + u[1] * bq[1] + u[2] * bq[2] + u[3] * bq[3];
}

double eval_input_derivative(double s, const KnotGrid& grid, const SplineBasis& basis) {
  const SpanAddress a = locate(s, grid);
  const auto bq = blend(basis, grid, a.span_index);
  const auto du = reference_vector_derivative(a.u);
  return (du[0] * bq[0] + du[1] * bq[1] + du[2] * bq[2]) / grid.delta_x;
}

std::pair<int, std::array<double, 4>> span_gradient(double s, const KnotGrid& grid,
                                                    const SplineBasis& basis) {
  const SpanAddress a = locate(s, grid);
  const auto u = reference_vector(a.u);
  std::array<double, 4> g{};
  for (int c = 0; c < 4; ++c) {
    double acc = 0.0;
    for (int r = 0; r < 4; ++r) acc += basis.at(r, c) * u[r];
    g[c] = acc;
  }
  return {a.span_index, g};
}

KnotGrid init_from_function(const std::function<double(double)>& f, double delta_x,
                            int knot_count) {
  std::vector<double> q(static_cast<std::size_t>(knot_count), 0.0);
  const int half = (knot_count - 1) / 2;
  for (int k = 0; k < knot_count; ++k) {
    const double x = (k - half) * delta_x;
    const double v = f(x);
    if (!std::isfinite(v)) throw std::domain_error("init_from_function: non-finite sample");
    q[static_cast<std::size_t>(k)] = v;
  }
  return KnotGrid(delta_x, std::move(q));
}

KnotGrid perturb(const KnotGrid& grid, double fraction, double sigma, Rng& rng) {
  if (fraction < 0.0 || fraction > 1.0) throw std::invalid_argument("perturb: bad fraction");
  if (sigma < 0.0) throw std::invalid_argument("perturb: negative sigma");
  KnotGrid out = grid;
  if (fraction == 0.0 || sigma == 0.0) return out;
  const int q = grid.size();
  int m = static_cast<int>(std::floor(fraction * q + 0.5));  // round half up
  if (m < 1) m = 1;
  if (m > q) m = q;
  // Partial Fisher-Yates: the first m entries are a uniform m-subset.
  std::vector<int> idx(static_cast<std::size_t>(q));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < m; ++i) {
    const int j = i + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(q - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    out.ordinates[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] +=
        sigma * gaussian(rng);
  }
  return out;
}

}  // namespace saf
