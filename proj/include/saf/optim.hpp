#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace saf {

// Returns the objective value and fills `grad`. Throwing or returning a
// non-finite value marks the evaluation as failed.
using GradOracle = std::function<double(const std::vector<double>& x, std::vector<double>& grad)>;
using ValueOracle = std::function<double(const std::vector<double>& x)>;

struct NcgConfig {
  int max_iterations = 1500;       // accepted line searches
  double sufficient_decrease = 0.1;  // Wolfe c1
  double curvature = 0.5;            // strong Wolfe c2
  int max_evals_per_search = 20;
  double extrapolation_cap = 3.0;  // step may grow at most this factor per extrapolation
  bool restart_on_nondescent = true;
};

struct NcgIteration {
  double objective = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
  int evals = 0;
  bool wolfe_decrease = false;
  bool wolfe_curvature = false;
};

struct OptTrace {
  double initial_objective = 0.0;
  std::vector<NcgIteration> iterations;  // one entry per accepted step (NCG) or epoch (ADAM)
  long total_evaluations = 0;
  std::string termination;
};

struct MinimizeResult {
  std::vector<double> point;
  double objective = 0.0;
  OptTrace trace;
};

// Polak-Ribiere nonlinear conjugate gradient with a strong-Wolfe line search
// based on cubic extrapolation and cubic/quadratic interpolation. Returns the
// best point seen; the accepted objective sequence is non-increasing.
MinimizeResult minimize_ncg(const GradOracle& oracle, std::vector<double> theta0,
                            const NcgConfig& cfg);

struct AdamConfig {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 32;
  int epochs = 50;
  std::uint64_t seed = 0;
  int max_consecutive_failures = 10;
};

// A stochastic objective: evaluate value and gradient on a subset of samples.
struct MinibatchProblem {
  int sample_count = 0;
  std::function<double(const std::vector<double>& x, std::vector<double>& grad,
                       const std::vector<int>& batch)>
      eval;
};

// Bias-corrected ADAM over shuffled mini-batches; deterministic per seed.
// Tracks the full objective once per epoch and returns the best point seen
// (never worse than theta0).
MinimizeResult minimize_adam(const MinibatchProblem& problem, std::vector<double> theta0,
                             const AdamConfig& cfg);

// Central finite differences, one coordinate at a time.
std::vector<double> fd_gradient(const ValueOracle& f, const std::vector<double>& theta, double h);

void write_trace_csv(const OptTrace& trace, const std::string& path);

}  // namespace saf
