#pragma once

#include <cstdint>
#include <vector>

#include "saf/matrix.hpp"
#include "saf/spline.hpp"

namespace saf {

// One unit: an affine map (bias stored as the trailing weight) followed by a
// spline activation with its own control points.
struct SafNeuron {
  std::vector<double> weights;  // fan_in + 1, bias last
  KnotGrid grid;
};

struct NetworkShape {
  int inputs = 0;   // D
  int hidden = 0;   // H
  int outputs = 0;  // O
  int knots = 0;    // Q, shared by every grid
  double delta_x = 0.0;

  int weight_count() const { return hidden * (inputs + 1) + outputs * (hidden + 1); }
  int ordinate_count() const { return (hidden + outputs) * knots; }
  int param_count() const { return weight_count() + ordinate_count(); }

  bool operator==(const NetworkShape&) const = default;
};

// Single-hidden-layer network where every neuron carries a spline activation.
// All grids share delta_x and Q, and a single basis matrix.
struct SafNetwork {
  NetworkShape shape;
  SplineBasis basis;
  std::vector<SafNeuron> hidden;
  std::vector<SafNeuron> output;
};

struct LayerCache {
  Matrix s;                    // N x units, pre-activations
  Matrix out;                  // N x units, spline outputs
  Matrix dphi;                 // N x units, spline input-derivatives
  std::vector<std::int32_t> span;  // N*units, active span per (sample, unit)
  std::vector<double> u;           // N*units, local abscissa
  long clamped = 0;            // how many evaluations fell outside the grid
};

// Everything the backward pass reuses from the forward pass, including the
// per-neuron B*q products for every span (computed once per evaluation).
struct ForwardCache {
  NetworkShape shape;
  int batch = 0;
  Matrix input;
  LayerCache hid;
  LayerCache out;
  std::vector<double> hidden_span_products;  // H * span_count * 4
  std::vector<double> output_span_products;  // O * span_count * 4

  double clamped_fraction() const {
    const long total = static_cast<long>(batch) * (shape.hidden + shape.outputs);
    return total == 0 ? 0.0 : static_cast<double>(hid.clamped + out.clamped) / total;
  }
};

// Row n of the result is the network output for row n of x.
Matrix forward(const SafNetwork& net, const Matrix& x, ForwardCache* cache = nullptr);

// Accumulated gradient over the batch, in flatten() layout, for upstream
// gradient out_grad = dJ/doutput. Samples are accumulated in row order so the
// result is deterministic.
std::vector<double> backward(const SafNetwork& net, const ForwardCache& cache,
                             const Matrix& out_grad);

// Parameter vector layout: hidden weights, output weights, hidden ordinates,
// output ordinates; exact bijection with the network.
std::vector<double> flatten(const SafNetwork& net);
SafNetwork unflatten(const NetworkShape& shape, const std::vector<double>& params,
                     const SplineBasis& basis = SplineBasis::catmull_rom());
// In-place variant for hot loops; net must already have the right shape.
void unflatten_into(SafNetwork& net, const std::vector<double>& params);

// Glorot-uniform weights with zero biases; every grid sampled from tanh and
// noise-perturbed. Deterministic per seed. Pass noise_fraction = 0 for clean
// tanh grids.
SafNetwork init_glorot(int inputs, int hidden, int outputs, double delta_x, int knots,
                       std::uint64_t seed, double noise_fraction = 0.05,
                       double noise_sigma = 0.05);

// The clean tanh sampling of all grids, in the ordinate block layout of
// flatten(). This is the damping anchor.
std::vector<double> tanh_ordinate_anchor(const NetworkShape& shape);

}  // namespace saf
