#include "saf/objective.hpp"

#include <cmath>
#include <stdexcept>

namespace saf {

Objective::Objective(SafNetwork base, Matrix inputs, Matrix targets, double lambda_w,
                     double lambda_q, GridMode mode, std::vector<double> q_anchor)
    : base_(std::move(base)),
      inputs_(std::move(inputs)),
      targets_(std::move(targets)),
      lambda_w_(lambda_w),
      lambda_q_(lambda_q),
      mode_(mode),
      q_anchor_(std::move(q_anchor)) {
  if (!(lambda_w_ >= 0.0) || !(lambda_q_ >= 0.0) || !std::isfinite(lambda_w_) ||
      !std::isfinite(lambda_q_))
    throw std::invalid_argument("Objective: lambdas must be finite and non-negative");
  if (inputs_.rows != targets_.rows)
    throw std::invalid_argument("Objective: inputs and targets disagree on sample count");
  if (inputs_.rows < 1) throw std::invalid_argument("Objective: empty dataset");
  if (inputs_.cols != base_.shape.inputs || targets_.cols != base_.shape.outputs)
    throw std::invalid_argument("Objective: dataset dimensions do not match the network");
  if (!all_finite(inputs_.data) || !all_finite(targets_.data))
    throw std::invalid_argument("Objective: non-finite dataset entry");
  if (q_anchor_.empty()) {
    const std::vector<double> full = flatten(base_);
    q_anchor_.assign(full.begin() + base_.shape.weight_count(), full.end());
  }
  if (static_cast<int>(q_anchor_.size()) != base_.shape.ordinate_count())
    throw std::invalid_argument("Objective: anchor length mismatch");
}

int Objective::param_count() const {
  return mode_ == GridMode::adaptive ? base_.shape.param_count() : base_.shape.weight_count();
}

std::vector<double> Objective::initial_params() const {
  std::vector<double> full = flatten(base_);
  if (mode_ == GridMode::frozen) full.resize(static_cast<std::size_t>(base_.shape.weight_count()));
  return full;
}

SafNetwork Objective::materialize(const std::vector<double>& theta) const {
  if (static_cast<int>(theta.size()) != param_count())
    throw std::invalid_argument("Objective: parameter vector length mismatch");
  SafNetwork net = base_;
  if (mode_ == GridMode::adaptive) {
    unflatten_into(net, theta);
  } else {
    std::vector<double> full = flatten(net);
    std::copy(theta.begin(), theta.end(), full.begin());
    unflatten_into(net, full);
  }
  return net;
}

EvalReport Objective::value_and_grad(const std::vector<double>& theta) const {
  if (static_cast<int>(theta.size()) != param_count())
    throw std::invalid_argument("Objective: parameter vector length mismatch");
  if (!all_finite(theta)) throw std::domain_error("Objective: non-finite parameters");

  const int n = inputs_.rows;
  const int weights = base_.shape.weight_count();
  SafNetwork net = materialize(theta);

  ForwardCache cache;
  const Matrix pred = forward(net, inputs_, &cache);

  // Data term and its upstream gradient -2 (d - f) / N.
  Matrix out_grad(n, targets_.cols);
  double data = 0.0;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < targets_.cols; ++c) {
      const double resid = targets_(r, c) - pred(r, c);
      data += resid * resid;
      out_grad(r, c) = -2.0 * resid / n;
    }
  }
  data /= n;

  std::vector<double> full_grad = backward(net, cache, out_grad);

  EvalReport rep;
  rep.data_term = data;

  double rw = 0.0;
  for (int k = 0; k < weights; ++k) {
    const double w = theta[static_cast<std::size_t>(k)];
    rw += w * w;
    full_grad[static_cast<std::size_t>(k)] += 2.0 * lambda_w_ * w;
  }
  rep.weight_term = lambda_w_ * rw;

  if (mode_ == GridMode::adaptive) {
    double rq = 0.0;
    const int ord = base_.shape.ordinate_count();
    for (int k = 0; k < ord; ++k) {
      const double dq = theta[static_cast<std::size_t>(weights + k)] - q_anchor_[static_cast<std::size_t>(k)];
      rq += dq * dq;
      full_grad[static_cast<std::size_t>(weights + k)] += 2.0 * lambda_q_ * dq;
    }
    rep.damping_term = lambda_q_ * rq;
    rep.gradient = std::move(full_grad);
  } else {
    rep.damping_term = 0.0;
    full_grad.resize(static_cast<std::size_t>(weights));
    rep.gradient = std::move(full_grad);
  }

  rep.total = rep.data_term + rep.weight_term + rep.damping_term;
  return rep;
}

double Objective::operator()(const std::vector<double>& theta, std::vector<double>& grad) const {
  EvalReport rep = value_and_grad(theta);
  grad = std::move(rep.gradient);
  return rep.total;
}

Objective Objective::minibatch_view(const std::vector<int>& indices) const {
  if (indices.empty()) throw std::invalid_argument("minibatch_view: empty subset");
  Matrix x(static_cast<int>(indices.size()), inputs_.cols);
  Matrix y(static_cast<int>(indices.size()), targets_.cols);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const int src = indices[r];
    if (src < 0 || src >= inputs_.rows)
      throw std::invalid_argument("minibatch_view: index out of range");
    for (int c = 0; c < inputs_.cols; ++c) x(static_cast<int>(r), c) = inputs_(src, c);
    for (int c = 0; c < targets_.cols; ++c) y(static_cast<int>(r), c) = targets_(src, c);
  }
  return Objective(base_, std::move(x), std::move(y), lambda_w_, lambda_q_, mode_, q_anchor_);
}

}  // namespace saf
