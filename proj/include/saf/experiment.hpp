#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "saf/data.hpp"
#include "saf/network.hpp"
#include "saf/objective.hpp"
#include "saf/optim.hpp"

namespace saf {

enum class ModelKind { standard, saf };
enum class OptimizerKind { ncg, adam };

const char* model_name(ModelKind kind);

// Everything needed to describe one experimental scenario. lambda vectors with
// a single entry mean a fixed value; several entries form the search grid for
// the cross-validated scenario.
struct ExperimentConfig {
  std::string dataset_name = "dataset";
  bool run_standard = true;
  bool run_saf = true;

  int hidden = 5;
  double delta_x = 0.2;
  double knot_range = 2.0;  // knots cover [-knot_range, +knot_range]

  std::vector<double> lambda_w{1.0};
  std::vector<double> lambda_q{1e-5};

  OptimizerKind optimizer = OptimizerKind::ncg;
  int max_iterations = 1500;
  AdamConfig adam;

  int runs = 15;
  std::uint64_t seed = 42;
  double test_fraction = 0.3;
  int cv_folds = 3;

  double init_noise_fraction = 0.05;
  double init_noise_sigma = 0.05;
  bool normalize_on_all_data = false;  // default fits scaling on the training split only

  std::string output_dir;  // empty: no files written
  bool export_spline_shapes = false;
  int spline_samples_per_span = 20;
  int threads = 0;  // 0: hardware concurrency

  int knot_count() const;
};

// One (run, model) outcome.
struct RunRecord {
  int run = 0;
  ModelKind kind = ModelKind::saf;
  double train_nrmse = 0.0;
  double test_nrmse = 0.0;
  double lambda_w = 0.0;
  double lambda_q = 0.0;
  double seconds = 0.0;
  double clamped_fraction = 0.0;  // clamp diagnostics on the training data
  int iterations = 0;
  std::vector<KnotGrid> hidden_grids;  // final spline grids
  std::vector<KnotGrid> output_grids;
};

struct ModelSummary {
  ModelKind kind = ModelKind::saf;
  int runs = 0;
  double train_mean = 0.0, train_std = 0.0;
  double test_mean = 0.0, test_std = 0.0;
  double lambda_w_median = 0.0, lambda_q_median = 0.0;
};

struct ScenarioResult {
  std::string dataset_name;
  int scenario = 0;
  std::vector<RunRecord> records;
  std::vector<ModelSummary> summaries;

  const ModelSummary* summary(ModelKind kind) const;
};

// Fixed lambdas, both models, aggregated over seeded random splits.
ScenarioResult run_scenario1(const ExperimentConfig& cfg, const Dataset& raw);

// Per run: grid-search the lambdas by k-fold cross-validated NRMSE on the
// training split, retrain on the full split with the winners, evaluate on the
// held-out test set.
ScenarioResult run_scenario2(const ExperimentConfig& cfg, const Dataset& raw);

// Train one model on an already normalized train/test pair. Exposed for tests
// and the acceptance suite.
struct TrainOutcome {
  SafNetwork net;
  double train_nrmse = 0.0;
  double test_nrmse = 0.0;
  double clamped_fraction = 0.0;
  OptTrace trace;
};
TrainOutcome train_model(const Dataset& train, const Dataset& test, ModelKind kind,
                         double lambda_w, double lambda_q, const ExperimentConfig& cfg,
                         std::uint64_t init_seed);

// Writes per-neuron curve CSVs (s, phi, dphi) sampled over the knot range plus
// one span of extrapolation on each side, and a CSV of the raw ordinates.
// Files are named <prefix>_hidden<i>.csv, <prefix>_output<j>.csv,
// <prefix>_knots.csv.
void export_splines(const SafNetwork& net, int samples_per_span, const std::string& prefix);

// results.csv + summary.csv + table.txt under dir.
void write_report(const ScenarioResult& result, const std::string& dir);

// Human-readable aligned table, one row per (dataset, model).
std::string format_table(const ScenarioResult& result);

std::string config_json(const ExperimentConfig& cfg);

// The exponential grid 2^j for the given exponents.
std::vector<double> exponential_grid(const std::vector<int>& exponents);
std::vector<double> default_grid();          // j = -10..5
std::vector<double> reduced_default_grid();  // j in {-10,-7,-4,-1,2,5}

}  // namespace saf
