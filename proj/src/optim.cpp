#include "saf/optim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "saf/matrix.hpp"
#include "saf/rng.hpp"

namespace saf {

namespace {

constexpr double kBracketGuard = 0.1;  // stay this fraction inside the current bracket
constexpr double kSlopeRatioCap = 10.0;  // cap on step growth predicted from slope ratios
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Evaluate the oracle, treating exceptions and non-finite results as failures.
bool try_eval(const GradOracle& oracle, const std::vector<double>& x, double& f,
              std::vector<double>& g, long& evals) {
  ++evals;
  try {
    f = oracle(x, g);
  } catch (const std::exception&) {
    f = kNan;
    return false;
  }
  return std::isfinite(f) && all_finite(g);
}

void validate(const NcgConfig& cfg) {
  if (!(cfg.sufficient_decrease > 0.0 && cfg.sufficient_decrease < cfg.curvature &&
        cfg.curvature < 1.0))
    throw std::invalid_argument("NcgConfig: need 0 < c1 < c2 < 1");
  if (cfg.max_iterations < 1 || cfg.max_evals_per_search < 2 || cfg.extrapolation_cap <= 1.0)
    throw std::invalid_argument("NcgConfig: bad budget");
}

}  // namespace

MinimizeResult minimize_ncg(const GradOracle& oracle, std::vector<double> x,
                            const NcgConfig& cfg) {
  validate(cfg);
  const std::size_t n = x.size();
  const double c1 = cfg.sufficient_decrease;
  const double c2 = cfg.curvature;

  MinimizeResult res;
  OptTrace& trace = res.trace;
  long evals = 0;

  std::vector<double> g(n);
  double f0;
  if (!try_eval(oracle, x, f0, g, evals))
    throw std::runtime_error("minimize_ncg: oracle failed at the starting point");
  trace.initial_objective = f0;

  std::vector<double> dir(n);
  for (std::size_t k = 0; k < n; ++k) dir[k] = -g[k];
  double d0 = -dot(g, g);

  std::vector<double> best_x = x, best_g = g;
  double best_f = f0;

  if (-d0 < 1e-300) {
    trace.termination = "converged";
    trace.total_evaluations = evals;
    res.point = std::move(best_x);
    res.objective = best_f;
    return res;
  }

  double step = 1.0 / (1.0 - d0);
  bool ls_failed = false;
  std::vector<double> trial(n), g3(n);

  int accepted = 0;
  while (accepted < cfg.max_iterations) {
    // Best point within this search, restored if the search fails.
    std::vector<double> bx = x, bg = g;
    double bf = f0;

    int m = cfg.max_evals_per_search;
    const long evals_at_start = evals;
    double x3 = step;
    double f3 = f0, d3 = d0;
    double x2 = 0.0, f2 = f0, d2 = d0;
    double x4 = 0.0, f4 = f0, d4 = d0;

    // --- extrapolation: push the step out until the slope or value says stop
    while (true) {
      x2 = 0.0;
      f2 = f0;
      d2 = d0;
      f3 = f0;
      bool success = false;
      while (!success && m > 0) {
        --m;
        for (std::size_t k = 0; k < n; ++k) trial[k] = x[k] + x3 * dir[k];
        if (try_eval(oracle, trial, f3, g3, evals)) {
          success = true;
        } else {
          x3 = 0.5 * (x2 + x3);  // shrink toward the last good point
        }
      }
      if (success && f3 < bf) {
        bx = trial;
        bf = f3;
        bg = g3;
      }
      d3 = success ? dot(g3, dir) : 0.0;
      if (d3 > c2 * d0 || f3 > f0 + x3 * c1 * d0 || m == 0 || !success) break;

      // Cubic through (0, f2, d2) and (x3, f3, d3), extrapolated.
      const double x1 = x2, f1 = f2, d1 = d2;
      x2 = x3;
      f2 = f3;
      d2 = d3;
      const double span = x2 - x1;
      const double a = 6.0 * (f1 - f2) + 3.0 * (d2 + d1) * span;
      const double b = 3.0 * (f2 - f1) - (2.0 * d1 + d2) * span;
      const double disc = b * b - a * d1 * span;
      double next = kNan;
      if (disc >= 0.0) next = x1 - d1 * span * span / (b + std::sqrt(disc));
      if (!std::isfinite(next) || next < 0.0 || next > x2 * cfg.extrapolation_cap)
        next = x2 * cfg.extrapolation_cap;
      else if (next < x2 + kBracketGuard * (x2 - x1))
        next = x2 + kBracketGuard * (x2 - x1);
      x3 = next;
    }

    // --- interpolation: tighten inside [x2, x4] until strong Wolfe holds
    x4 = x3;
    f4 = f3;
    d4 = d3;
    while ((std::fabs(d3) > -c2 * d0 || f3 > f0 + x3 * c1 * d0) && m > 0) {
      if (!std::isfinite(f3) || d3 > 0.0 || f3 > f0 + x3 * c1 * d0) {
        x4 = x3;
        f4 = std::isfinite(f3) ? f3 : std::numeric_limits<double>::infinity();
        d4 = d3;
      } else {
        x2 = x3;
        f2 = f3;
        d2 = d3;
      }
      const double gap = x4 - x2;
      if (f4 > f0) {
        x3 = x2 - (0.5 * d2 * gap * gap) / (f4 - f2 - d2 * gap);  // quadratic
      } else {
        const double a = 6.0 * (f2 - f4) / gap + 3.0 * (d4 + d2);  // cubic
        const double b = 3.0 * (f4 - f2) - (2.0 * d2 + d4) * gap;
        const double disc = b * b - a * d2 * gap * gap;
        x3 = disc >= 0.0 && a != 0.0 ? x2 + (std::sqrt(disc) - b) / a : kNan;
      }
      if (!std::isfinite(x3)) x3 = 0.5 * (x2 + x4);
      x3 = std::max(std::min(x3, x4 - kBracketGuard * gap), x2 + kBracketGuard * gap);

      for (std::size_t k = 0; k < n; ++k) trial[k] = x[k] + x3 * dir[k];
      --m;
      if (try_eval(oracle, trial, f3, g3, evals)) {
        d3 = dot(g3, dir);
        if (f3 < bf) {
          bx = trial;
          bf = f3;
          bg = g3;
        }
      } else {
        d3 = 0.0;  // classified as an upper point on the next pass
      }
    }

    const bool wolfe_curv = std::isfinite(f3) && std::fabs(d3) < -c2 * d0;
    const bool wolfe_dec = std::isfinite(f3) && f3 < f0 + x3 * c1 * d0;

    if (wolfe_curv && wolfe_dec) {
      // Accept the step and build the next Polak-Ribiere direction.
      for (std::size_t k = 0; k < n; ++k) x[k] += x3 * dir[k];
      f0 = f3;
      ++accepted;

      const double gg = dot(g, g);
      double beta = (dot(g3, g3) - dot(g, g3)) / gg;
      if (beta < 0.0) beta = 0.0;  // fall back to steepest descent
      for (std::size_t k = 0; k < n; ++k) dir[k] = beta * dir[k] - g3[k];
      g = g3;

      const double d_prev = d0;
      d0 = dot(g, dir);
      if (cfg.restart_on_nondescent && d0 > 0.0) {
        for (std::size_t k = 0; k < n; ++k) dir[k] = -g[k];
        d0 = -dot(g, g);
      }
      step = x3 * std::min(kSlopeRatioCap,
                           d_prev / (d0 - std::numeric_limits<double>::min()));

      if (f0 < best_f) {
        best_f = f0;
        best_x = x;
        best_g = g;
      }
      trace.iterations.push_back(NcgIteration{f0, norm2(g), x3,
                                              static_cast<int>(evals - evals_at_start),
                                              wolfe_dec, wolfe_curv});
      ls_failed = false;

      if (-d0 < 1e-300) {
        trace.termination = "converged";
        break;
      }
    } else {
      // Restore the best point of the failed search and retry with steepest
      // descent; a second consecutive failure ends the run.
      x = bx;
      f0 = bf;
      g = bg;
      if (f0 < best_f) {
        best_f = f0;
        best_x = x;
        best_g = g;
      }
      if (ls_failed) {
        trace.termination = "line_search_failed";
        break;
      }
      for (std::size_t k = 0; k < n; ++k) dir[k] = -g[k];
      d0 = -dot(g, g);
      if (-d0 < 1e-300) {
        trace.termination = "converged";
        break;
      }
      step = 1.0 / (1.0 - d0);
      ls_failed = true;
    }
  }

  if (trace.termination.empty()) trace.termination = "max_iterations";
  trace.total_evaluations = evals;
  res.point = std::move(best_x);
  res.objective = best_f;
  return res;
}

MinimizeResult minimize_adam(const MinibatchProblem& problem, std::vector<double> x,
                             const AdamConfig& cfg) {
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0))
    throw std::invalid_argument("AdamConfig: betas must lie in [0, 1)");
  if (!(cfg.step_size > 0.0 && cfg.epsilon > 0.0))
    throw std::invalid_argument("AdamConfig: step size and epsilon must be positive");
  if (cfg.batch_size < 1 || cfg.batch_size > problem.sample_count)
    throw std::invalid_argument("AdamConfig: batch size must be in [1, N]");
  if (cfg.epochs < 1) throw std::invalid_argument("AdamConfig: epochs must be positive");

  const std::size_t n = x.size();
  MinimizeResult res;
  OptTrace& trace = res.trace;
  long evals = 0;

  std::vector<int> all(static_cast<std::size_t>(problem.sample_count));
  for (int i = 0; i < problem.sample_count; ++i) all[static_cast<std::size_t>(i)] = i;

  std::vector<double> g(n);
  double f_full = problem.eval(x, g, all);
  ++evals;
  if (!std::isfinite(f_full)) throw std::runtime_error("minimize_adam: oracle failed at start");
  trace.initial_objective = f_full;

  std::vector<double> best_x = x;
  double best_f = f_full;

  std::vector<double> m(n, 0.0), v(n, 0.0);
  double beta1_t = 1.0, beta2_t = 1.0;
  Rng rng(cfg.seed);
  std::vector<int> order = all;
  std::vector<int> batch;
  int consecutive_failures = 0;
  bool aborted = false;

  for (int epoch = 0; epoch < cfg.epochs && !aborted; ++epoch) {
    shuffle_in_place(order, rng);
    for (std::size_t pos = 0; pos < order.size(); pos += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), pos + static_cast<std::size_t>(cfg.batch_size));
      batch.assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                   order.begin() + static_cast<std::ptrdiff_t>(end));

      double fb = kNan;
      bool ok = true;
      ++evals;
      try {
        fb = problem.eval(x, g, batch);
      } catch (const std::exception&) {
        ok = false;
      }
      if (!ok || !std::isfinite(fb) || !all_finite(g)) {
        if (++consecutive_failures > cfg.max_consecutive_failures) {
          aborted = true;
          break;
        }
        continue;  // skip the update, keep going
      }
      consecutive_failures = 0;

      beta1_t *= cfg.beta1;
      beta2_t *= cfg.beta2;
      for (std::size_t k = 0; k < n; ++k) {
        m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
        v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
        const double m_hat = m[k] / (1.0 - beta1_t);
        const double v_hat = v[k] / (1.0 - beta2_t);
        x[k] -= cfg.step_size * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
      }
    }

    ++evals;
    try {
      f_full = problem.eval(x, g, all);
    } catch (const std::exception&) {
      f_full = kNan;
    }
    if (std::isfinite(f_full) && f_full < best_f) {
      best_f = f_full;
      best_x = x;
    }
    trace.iterations.push_back(NcgIteration{f_full, norm2(g), cfg.step_size, 0, false, false});
  }

  trace.termination = aborted ? "too_many_failed_evaluations" : "epoch_budget";
  trace.total_evaluations = evals;
  res.point = std::move(best_x);
  res.objective = best_f;
  return res;
}

std::vector<double> fd_gradient(const ValueOracle& f, const std::vector<double>& theta,
                                double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_gradient: h must be positive");
  std::vector<double> x = theta;
  std::vector<double> g(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double saved = x[k];
    x[k] = saved + h;
    const double fp = f(x);
    x[k] = saved - h;
    const double fm = f(x);
    x[k] = saved;
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

void write_trace_csv(const OptTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trace_csv: cannot open " + path);
  out << "iteration,objective,grad_norm,step,evals\n";
  out.precision(17);
  for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
    const NcgIteration& it = trace.iterations[i];
    out << (i + 1) << ',' << it.objective << ',' << it.grad_norm << ',' << it.step << ','
        << it.evals << '\n';
  }
}

}  // namespace saf
