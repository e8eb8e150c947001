// Acceptance suite. Runs every shipping criterion end to end and prints one
// pass/fail line each; exits non-zero if any criterion fails.
//
// The California Housing rows need the real data file, which cannot be
// redistributed here. The suite looks for it under $SAF_DATA_DIR or ./data as
// cal_housing.csv / cal_housing.data / calhousing.csv. When absent, the
// documented substitute applies: the same experiment pipeline runs on the
// synthetic nonlinear regression benchmark and the relative properties are
// asserted instead of the published numbers.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "saf/data.hpp"
#include "saf/experiment.hpp"
#include "saf/matrix.hpp"
#include "saf/network.hpp"
#include "saf/objective.hpp"
#include "saf/optim.hpp"
#include "saf/rng.hpp"
#include "saf/spline.hpp"

using namespace saf;

namespace {

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& message) {
    if (!cond && ok) {
      ok = false;
      detail = message;
    }
  }
  void note(const std::string& message) {
    if (!detail.empty()) detail += "; ";
    detail += message;
  }
};

std::optional<Dataset> find_calhousing() {
  std::vector<std::filesystem::path> dirs;
  if (const char* env = std::getenv("SAF_DATA_DIR")) dirs.emplace_back(env);
  dirs.emplace_back("data");
  for (const auto& dir : dirs) {
    for (const char* name : {"cal_housing.csv", "cal_housing.data", "calhousing.csv"}) {
      const std::filesystem::path p = dir / name;
      if (std::filesystem::exists(p)) {
        Dataset ds = load_csv(p.string(), {-1});
        if (ds.d() == 8 && ds.o() == 1) return ds;
      }
    }
  }
  return std::nullopt;
}

double rel_err(double a, double b) {
  // Coordinates below the floor are compared on an absolute scale matched to
  // the finite-difference noise level.
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-4});
}

// ---------------------------------------------------------------- criterion 1
Check gradient_correctness() {
  Check c;
  double worst = 0.0;
  int resampled = 0;
  for (int trial = 0; trial < 20; ++trial) {
    // Central differences at h=1e-6 are only meaningful when the objective is
    // O(1) (roundoff floor ~eps*J/h) and no activation is parked within the
    // step of a span boundary (the spline is C1, not C2). Both are properties
    // of the sampled configuration, so degenerate draws are redrawn.
    for (int attempt = 0;; ++attempt) {
      if (attempt >= 50) {
        c.require(false, "could not sample a well-posed configuration");
        return c;
      }
      Rng rng = seeded(90210, static_cast<std::uint64_t>(trial) * 64 + attempt);
      SafNetwork net = init_glorot(8, 5, 1, 0.2, 21, rng());
      Matrix x(16, 8), y(16, 1);
      for (double& v : x.data) v = uniform_real(rng, -1.0, 1.0);
      for (double& v : y.data) v = uniform_real(rng, -0.5, 0.5);
      const double lw = std::pow(10.0, uniform_real(rng, -3.0, -1.0));
      const double lq = std::pow(10.0, uniform_real(rng, -4.0, -1.0));
      Objective obj(net, x, y, lw, lq, GridMode::adaptive, tanh_ordinate_anchor(net.shape));
      std::vector<double> theta = obj.initial_params();
      for (double& v : theta) v += uniform_real(rng, -0.25, 0.25);

      const EvalReport at_theta = obj.value_and_grad(theta);
      ForwardCache cache;
      forward(obj.materialize(theta), x, &cache);
      double min_du = 1.0;
      for (double u : cache.hid.u) min_du = std::min(min_du, std::fabs(u - std::round(u)));
      for (double u : cache.out.u) min_du = std::min(min_du, std::fabs(u - std::round(u)));
      if (at_theta.total > 5.0 || min_du < 1e-4) {
        ++resampled;
        continue;
      }

      const std::vector<double> fd = fd_gradient(
          [&obj](const std::vector<double>& t) { return obj.value_and_grad(t).total; }, theta,
          1e-6);
      for (std::size_t k = 0; k < fd.size(); ++k)
        worst = std::max(worst, rel_err(at_theta.gradient[k], fd[k]));
      break;
    }
  }
  c.require(worst < 1e-5, "max relative error " + std::to_string(worst));
  char buf[96];
  std::snprintf(buf, sizeof(buf), "20 configs (%d degenerate draws redrawn), max rel err %.2e (< 1e-5)",
                resampled, worst);
  c.note(buf);
  return c;
}

// ---------------------------------------------------------------- criterion 2
Check spline_fidelity() {
  Check c;
  const SplineBasis& b = SplineBasis::catmull_rom();

  // Interpolation, bit-exact on an exactly representable spacing.
  Rng rng(31);
  std::vector<double> q(21);
  for (double& v : q) v = uniform_real(rng, -2.0, 2.0);
  const KnotGrid g25(0.25, q);
  for (int k = 1; k + 2 < g25.size(); ++k)
    c.require(eval(g25.abscissa(k), g25, b) == q[static_cast<std::size_t>(k)],
              "interpolation not exact at knot " + std::to_string(k));

  // Linear precision below 1e-12.
  const KnotGrid lin = init_from_function([](double x) { return 0.6 * x - 0.2; }, 0.2, 21);
  double worst_lin = 0.0;
  for (double s = -1.79; s <= 1.79; s += 0.0123)
    worst_lin = std::max(worst_lin, std::fabs(eval(s, lin, b) - (0.6 * s - 0.2)));
  c.require(worst_lin < 1e-12, "linear precision " + std::to_string(worst_lin));

  // Partition of unity of the blending weights over a u sweep.
  double worst_pu = 0.0;
  for (double s = -1.99; s <= 1.99; s += 0.0071) {
    auto [span, grad] = span_gradient(s, g25, b);
    (void)span;
    worst_pu = std::max(worst_pu, std::fabs(grad[0] + grad[1] + grad[2] + grad[3] - 1.0));
  }
  c.require(worst_pu < 1e-12, "partition of unity " + std::to_string(worst_pu));

  // C1 continuity at interior knots.
  double worst_c1 = 0.0;
  for (int k = 2; k + 2 < g25.size(); ++k) {
    const double x = g25.abscissa(k);
    const double left = eval_input_derivative(std::nextafter(x, -10.0), g25, b);
    const double right = eval_input_derivative(x, g25, b);
    const double vleft = eval(std::nextafter(x, -10.0), g25, b);
    const double vright = eval(x, g25, b);
    worst_c1 = std::max({worst_c1, std::fabs(left - right), std::fabs(vleft - vright)});
  }
  c.require(worst_c1 < 1e-10, "C1 mismatch " + std::to_string(worst_c1));

  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "interp exact, linear %.1e, unity %.1e, C1 %.1e", worst_lin, worst_pu, worst_c1);
  c.note(buf);
  return c;
}

// ---------------------------------------------------------------- criterion 3
Check baseline_equivalence() {
  Check c;
  Rng rng(404);
  double worst = 0.0;
  double max_act = 0.0;
  // Activations are kept inside the interpolable core of the knot range,
  // [-1.8, 1.8]; the outermost spans of [-2, 2] are clamped extrapolation by
  // construction and carry a ~3e-3 error instead of the interpolation bound.
  const double core = 2.0 - 0.2;
  for (int trial = 0; trial < 5; ++trial) {
    SafNetwork net = init_glorot(8, 5, 1, 0.2, 21, rng(), 0.0);  // frozen-style clean grids
    // Scale weights so every activation stays inside the core.
    for (SafNeuron& u : net.hidden)
      for (double& w : u.weights) w *= 0.5;

    Matrix x(64, 8);
    for (double& v : x.data) v = uniform_real(rng, -1.0, 1.0);
    ForwardCache cache;
    const Matrix y_saf = forward(net, x, &cache);

    for (int n = 0; n < x.rows; ++n) {
      // Closed-form tanh network with the same weights.
      std::vector<double> h(5);
      for (int i = 0; i < 5; ++i) {
        const std::vector<double>& w = net.hidden[static_cast<std::size_t>(i)].weights;
        double s = w[8];
        for (int d = 0; d < 8; ++d) s += w[static_cast<std::size_t>(d)] * x(n, d);
        max_act = std::max(max_act, std::fabs(s));
        h[static_cast<std::size_t>(i)] = std::tanh(s);
      }
      const std::vector<double>& w = net.output[0].weights;
      double s = w[5];
      for (int i = 0; i < 5; ++i) s += w[static_cast<std::size_t>(i)] * h[static_cast<std::size_t>(i)];
      max_act = std::max(max_act, std::fabs(s));
      const double y_tanh = std::tanh(s);
      worst = std::max(worst, std::fabs(y_saf(n, 0) - y_tanh));
    }
  }
  c.require(max_act <= core, "activation left the interpolable core: " + std::to_string(max_act));
  c.require(worst < 1e-3, "max output deviation " + std::to_string(worst));
  char buf[96];
  std::snprintf(buf, sizeof(buf), "max |saf - tanh| %.2e (< 1e-3), max |s| %.2f", worst, max_act);
  c.note(buf);
  return c;
}

// ---------------------------------------------------------------- criterion 4
Check damping_limit() {
  Check c;
  const Dataset raw = make_synthetic_regression(498, 2026);
  ExperimentConfig cfg;
  cfg.dataset_name = "synthetic";
  cfg.runs = 1;
  cfg.seed = 11;
  // The lambda_q = 1e6 block raises the objective's condition number to ~1e6,
  // so the quasi-static tracking of the pinned ordinates needs a few times
  // the scenario budget to reach the minimizer. Both runs get the same budget.
  cfg.max_iterations = 8000;
  cfg.threads = 0;

  const Split sp = split(raw, SplitSpec{0.3, cfg.seed, 0});
  const Dataset train_raw = select(raw, sp.train);
  const NormParams params = fit_normalization(train_raw);
  const Dataset train = apply_normalization(train_raw, params);
  const Dataset test = apply_normalization(select(raw, sp.test), params);
  const std::uint64_t init_seed = seeded(cfg.seed, 0)();

  const TrainOutcome frozen =
      train_model(train, test, ModelKind::standard, 1e-3, 0.0, cfg, init_seed);
  const TrainOutcome damped =
      train_model(train, test, ModelKind::saf, 1e-3, 1e6, cfg, init_seed);

  // Ordinates must be pinned to the clean anchor.
  const std::vector<double> anchor = tanh_ordinate_anchor(damped.net.shape);
  const std::vector<double> theta = flatten(damped.net);
  double worst_q = 0.0;
  const int weights = damped.net.shape.weight_count();
  for (int k = 0; k < damped.net.shape.ordinate_count(); ++k)
    worst_q = std::max(worst_q, std::fabs(theta[static_cast<std::size_t>(weights + k)] -
                                          anchor[static_cast<std::size_t>(k)]));
  const double gap = std::fabs(damped.test_nrmse - frozen.test_nrmse);
  c.require(worst_q < 1e-3, "max |q - q_o| = " + std::to_string(worst_q));
  c.require(gap < 0.02, "test NRMSE gap " + std::to_string(gap));
  char buf[128];
  std::snprintf(buf, sizeof(buf), "max |q - q_o| %.2e (< 1e-3), NRMSE gap %.4f (< 0.02)",
                worst_q, gap);
  c.note(buf);
  return c;
}

// ------------------------------------------------------------- criteria 5 & 8
struct Scenario1Outcome {
  Check check;
};

double spline_csv_sup_deviation_from_tanh(const std::string& path) {
  std::ifstream in(path);
  if (!in) return 0.0;
  std::string line;
  std::getline(in, line);  // header
  double worst = 0.0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::getline(ss, tok, ',');
    const double s = std::stod(tok);
    std::getline(ss, tok, ',');
    const double phi = std::stod(tok);
    if (std::fabs(s) <= 2.0) worst = std::max(worst, std::fabs(phi - std::tanh(s)));
  }
  return worst;
}

// Largest sup-norm deviation from tanh across every exported trained shape.
double scan_exported_shapes(const std::string& dir) {
  double worst = 0.0;
  if (!std::filesystem::exists(dir)) return worst;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("splines_saf_", 0) == 0 && name.find("_knots") == std::string::npos)
      worst = std::max(worst, spline_csv_sup_deviation_from_tanh(entry.path().string()));
  }
  return worst;
}

Scenario1Outcome scenario1(const std::optional<Dataset>& calhousing) {
  Scenario1Outcome out;
  Check& c = out.check;

  ExperimentConfig cfg;
  cfg.runs = 15;
  cfg.max_iterations = 1500;
  cfg.seed = 7;
  cfg.lambda_w = {1.0};
  cfg.lambda_q = {1e-5};
  cfg.output_dir = "acceptance_out/scenario1";
  cfg.export_spline_shapes = true;
  std::filesystem::remove_all("acceptance_out/scenario1");

  const bool real = calhousing.has_value();
  const Dataset data = real ? *calhousing : make_synthetic_regression(498, 2026);
  cfg.dataset_name = real ? "calhousing" : "synthetic";

  const ScenarioResult res = run_scenario1(cfg, data);
  const ModelSummary* std_s = res.summary(ModelKind::standard);
  const ModelSummary* saf_s = res.summary(ModelKind::saf);
  c.require(std_s && saf_s, "missing summaries");
  if (!c.ok) return out;

  char buf[160];
  if (real) {
    c.require(std::fabs(std_s->test_mean - 1.01) <= 0.05,
              "standard test NRMSE " + std::to_string(std_s->test_mean) + " not in 1.01 +/- 0.05");
    c.require(std::fabs(saf_s->test_mean - 0.57) <= 0.05,
              "saf test NRMSE " + std::to_string(saf_s->test_mean) + " not in 0.57 +/- 0.05");
    std::snprintf(buf, sizeof(buf),
                  "calhousing: standard %.3f +/- %.3f (band 1.01+/-0.05), saf %.3f +/- %.3f "
                  "(band 0.57+/-0.05)",
                  std_s->test_mean, std_s->test_std, saf_s->test_mean, saf_s->test_std);
  } else {
    c.require(saf_s->test_mean < 0.7 * std_s->test_mean,
              "saf " + std::to_string(saf_s->test_mean) + " not < 0.7 * standard " +
                  std::to_string(std_s->test_mean));
    std::snprintf(buf, sizeof(buf),
                  "calhousing file absent; synthetic substitute: saf %.3f < 0.7 * standard %.3f",
                  saf_s->test_mean, std_s->test_mean);
  }
  c.note(buf);
  return out;
}

// ---------------------------------------------------------------- criterion 6
Check scenario2(const std::optional<Dataset>& calhousing) {
  Check c;
  ExperimentConfig cfg;
  cfg.runs = 15;
  cfg.max_iterations = 1500;
  cfg.seed = 19;
  cfg.lambda_w = reduced_default_grid();
  cfg.lambda_q = reduced_default_grid();
  cfg.output_dir = "acceptance_out/scenario2";
  cfg.export_spline_shapes = true;
  std::filesystem::remove_all("acceptance_out/scenario2");

  const bool real = calhousing.has_value();
  const Dataset data = real ? *calhousing : make_synthetic_regression(498, 2026);
  cfg.dataset_name = real ? "calhousing" : "synthetic";

  const ScenarioResult res = run_scenario2(cfg, data);
  const ModelSummary* std_s = res.summary(ModelKind::standard);
  const ModelSummary* saf_s = res.summary(ModelKind::saf);
  c.require(std_s && saf_s, "missing summaries");
  if (!c.ok) return c;

  c.require(saf_s->test_mean < std_s->test_mean,
            "saf mean " + std::to_string(saf_s->test_mean) + " not strictly below standard " +
                std::to_string(std_s->test_mean));
  char buf[160];
  if (real) {
    c.require(std::fabs(std_s->test_mean - 0.55) <= 0.03,
              "standard test NRMSE " + std::to_string(std_s->test_mean) + " not in 0.55 +/- 0.03");
    c.require(std::fabs(saf_s->test_mean - 0.51) <= 0.03,
              "saf test NRMSE " + std::to_string(saf_s->test_mean) + " not in 0.51 +/- 0.03");
    std::snprintf(buf, sizeof(buf),
                  "calhousing, reduced grid: saf %.3f < standard %.3f; bands 0.51/0.55 +/- 0.03",
                  saf_s->test_mean, std_s->test_mean);
  } else {
    std::snprintf(buf, sizeof(buf),
                  "calhousing file absent; synthetic substitute, reduced grid: saf %.3f < "
                  "standard %.3f",
                  saf_s->test_mean, std_s->test_mean);
  }
  c.note(buf);
  return c;
}

// ---------------------------------------------------------------- criterion 7
Check optimizer_sanity() {
  Check c;
  const GradOracle rosen = [](const std::vector<double>& x, std::vector<double>& g) {
    const double a = x[0], b = x[1];
    const double t1 = b - a * a;
    g = {-400.0 * a * t1 - 2.0 * (1.0 - a), 200.0 * t1};
    return 100.0 * t1 * t1 + (1.0 - a) * (1.0 - a);
  };
  NcgConfig ncg;
  ncg.max_iterations = 1500;
  const MinimizeResult res = minimize_ncg(rosen, {-1.2, 1.0}, ncg);
  const double dist = std::hypot(res.point[0] - 1.0, res.point[1] - 1.0);
  c.require(dist < 1e-4, "distance to optimum " + std::to_string(dist));

  // Monotone accepted objective on every recorded trace.
  const auto monotone = [](const OptTrace& trace) {
    double prev = trace.initial_objective;
    for (const NcgIteration& it : trace.iterations) {
      if (!(it.objective <= prev)) return false;
      prev = it.objective;
    }
    return true;
  };
  c.require(monotone(res.trace), "rosenbrock trace not monotone");

  Rng rng(88);
  for (int trial = 0; trial < 4; ++trial) {
    const GradOracle wavy = [](const std::vector<double>& x, std::vector<double>& g) {
      double v = 0.0;
      g.assign(x.size(), 0.0);
      for (std::size_t k = 0; k < x.size(); ++k) {
        v += std::sin(2.0 * x[k]) + 0.2 * x[k] * x[k];
        g[k] = 2.0 * std::cos(2.0 * x[k]) + 0.4 * x[k];
      }
      return v;
    };
    std::vector<double> x0(8);
    for (double& v : x0) v = uniform_real(rng, -3.0, 3.0);
    NcgConfig quick;
    quick.max_iterations = 100;
    const MinimizeResult r = minimize_ncg(wavy, x0, quick);
    c.require(monotone(r.trace), "wavy trace not monotone");
    for (const NcgIteration& it : r.trace.iterations)
      c.require(it.wolfe_decrease && it.wolfe_curvature, "accepted step without Wolfe");
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "rosenbrock dist %.2e in %zu iterations; traces monotone",
                dist, res.trace.iterations.size());
  c.note(buf);
  return c;
}

// ---------------------------------------------------------------- criterion 8
Check figure_reproduction() {
  Check c;
  const double dev = std::max(scan_exported_shapes("acceptance_out/scenario1"),
                              scan_exported_shapes("acceptance_out/scenario2"));
  c.require(dev > 0.1, "largest trained-shape deviation from tanh is " + std::to_string(dev));
  char buf[96];
  std::snprintf(buf, sizeof(buf), "max sup-norm deviation from tanh %.3f (> 0.1)", dev);
  c.note(buf);
  return c;
}

}  // namespace

int main() {
  const std::optional<Dataset> calhousing = find_calhousing();
  std::printf("calhousing data: %s\n",
              calhousing ? "found" : "not found (synthetic substitutes where documented)");

  int failures = 0;
  const auto report = [&failures](const char* name, const Check& c) {
    std::printf("[%s] %s%s%s\n", c.ok ? "PASS" : "FAIL", name, c.detail.empty() ? "" : " - ",
                c.detail.c_str());
    std::fflush(stdout);
    if (!c.ok) ++failures;
  };

  report("gradient correctness", gradient_correctness());
  report("spline fidelity", spline_fidelity());
  report("baseline equivalence", baseline_equivalence());
  report("optimizer sanity", optimizer_sanity());
  report("damping limit", damping_limit());
  const Scenario1Outcome s1 = scenario1(calhousing);
  report("scenario 1", s1.check);
  report("scenario 2", scenario2(calhousing));
  report("figure reproduction", figure_reproduction());

  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
