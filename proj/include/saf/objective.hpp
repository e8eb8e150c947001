#pragma once

#include <functional>
#include <vector>

#include "saf/matrix.hpp"
#include "saf/network.hpp"

namespace saf {

// One evaluation of the training criterion. The regularizer terms are stored
// already scaled by their lambdas, so total = data + weight + damping holds
// exactly as computed.
struct EvalReport {
  double total = 0.0;
  double data_term = 0.0;
  double weight_term = 0.0;
  double damping_term = 0.0;
  std::vector<double> gradient;
};

// Whether the spline ordinates are part of the parameter vector. `frozen`
// realizes the fixed-activation baseline: the grids stay at their initial
// values and the optimizer only sees the weights.
enum class GridMode { adaptive, frozen };

// J(theta) = mean squared error + lambda_w * |w|^2 + lambda_q * |q - q_o|^2,
// exposed as a value-and-gradient oracle over the flat parameter vector.
// Read-only after construction; value_and_grad may be called concurrently
// from independent optimizers.
class Objective {
 public:
  // q_anchor is the damping reference in ordinate-block layout; if empty, the
  // base network's current ordinates are used.
  Objective(SafNetwork base, Matrix inputs, Matrix targets, double lambda_w, double lambda_q,
            GridMode mode = GridMode::adaptive, std::vector<double> q_anchor = {});

  int sample_count() const { return inputs_.rows; }
  int param_count() const;
  GridMode mode() const { return mode_; }
  double lambda_w() const { return lambda_w_; }
  double lambda_q() const { return lambda_q_; }
  const SafNetwork& base() const { return base_; }
  const std::vector<double>& anchor() const { return q_anchor_; }

  // The base network's parameters, restricted to the trainable set.
  std::vector<double> initial_params() const;

  EvalReport value_and_grad(const std::vector<double>& theta) const;

  // Convenience: value and gradient through out-parameters, for optimizers.
  double operator()(const std::vector<double>& theta, std::vector<double>& grad) const;

  // Same criterion restricted to a subset of the samples; the data term is
  // averaged over the subset size.
  Objective minibatch_view(const std::vector<int>& indices) const;

  // Rebuild a full network from a trainable parameter vector.
  SafNetwork materialize(const std::vector<double>& theta) const;

  // Diagnostics from the most recent evaluation on this object is deliberately
  // not kept (const evaluations); use forward() with a cache for clamp stats.

 private:
  SafNetwork base_;
  Matrix inputs_;
  Matrix targets_;
  double lambda_w_ = 0.0;
  double lambda_q_ = 0.0;
  GridMode mode_ = GridMode::adaptive;
  std::vector<double> q_anchor_;
};

}  // namespace saf
