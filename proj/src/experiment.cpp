#include "saf/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace saf {

namespace {

// Runs fn(0..jobs-1) on up to `threads` workers. Each job owns its outputs, so
// scheduling cannot change results.
void parallel_jobs(int jobs, int threads, const std::function<void(int)>& fn) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, jobs));
  if (threads == 1) {
    for (int j = 0; j < jobs; ++j) fn(j);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int j = next.fetch_add(1); j < jobs; j = next.fetch_add(1)) fn(j);
    });
  }
  for (std::thread& t : pool) t.join();
}

double sample_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = sample_mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

std::string format_pm(double mean, double sd) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f \xC2\xB1 %.4f", mean, sd);
  return buf;
}

ModelSummary summarize(ModelKind kind, const std::vector<RunRecord>& records) {
  ModelSummary s;
  s.kind = kind;
  std::vector<double> tr, te, lw, lq;
  for (const RunRecord& r : records) {
    if (r.kind != kind) continue;
    tr.push_back(r.train_nrmse);
    te.push_back(r.test_nrmse);
    lw.push_back(r.lambda_w);
    lq.push_back(r.lambda_q);
  }
  s.runs = static_cast<int>(tr.size());
  s.train_mean = sample_mean(tr);
  s.train_std = sample_std(tr);
  s.test_mean = sample_mean(te);
  s.test_std = sample_std(te);
  s.lambda_w_median = median(lw);
  s.lambda_q_median = median(lq);
  return s;
}

std::vector<ModelKind> active_models(const ExperimentConfig& cfg) {
  std::vector<ModelKind> kinds;
  if (cfg.run_standard) kinds.push_back(ModelKind::standard);
  if (cfg.run_saf) kinds.push_back(ModelKind::saf);
  if (kinds.empty()) throw std::invalid_argument("ExperimentConfig: no model selected");
  return kinds;
}

void finish_scenario(ScenarioResult& result, const ExperimentConfig& cfg) {
  for (ModelKind kind : active_models(cfg)) result.summaries.push_back(summarize(kind, result.records));
  if (!cfg.output_dir.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    write_report(result, cfg.output_dir);
    std::ofstream cfg_out(cfg.output_dir + "/config.json");
    cfg_out << config_json(cfg) << '\n';
  }
}

}  // namespace

const char* model_name(ModelKind kind) {
  return kind == ModelKind::standard ? "standard" : "saf";
}

int ExperimentConfig::knot_count() const {
  const double ratio = knot_range / delta_x;
  const long long halfspan = std::llround(ratio);
  if (!(knot_range > 0.0) || !(delta_x > 0.0) || std::fabs(ratio - static_cast<double>(halfspan)) > 1e-9)
    throw std::invalid_argument("ExperimentConfig: knot_range must be a multiple of delta_x");
  return static_cast<int>(2 * halfspan + 1);
}

const ModelSummary* ScenarioResult::summary(ModelKind kind) const {
  for (const ModelSummary& s : summaries)
    if (s.kind == kind) return &s;
  return nullptr;
}

TrainOutcome train_model(const Dataset& train, const Dataset& test, ModelKind kind,
                         double lambda_w, double lambda_q, const ExperimentConfig& cfg,
                         std::uint64_t init_seed) {
  const int knots = cfg.knot_count();
  const bool adaptive = kind == ModelKind::saf;
  // The fixed-activation baseline keeps clean tanh grids; the adaptive model
  // starts from noise-perturbed ones. Weight draws are identical for both
  // because the grid noise is drawn after the weights.
  SafNetwork net = init_glorot(train.d(), cfg.hidden, train.o(), cfg.delta_x, knots, init_seed,
                               adaptive ? cfg.init_noise_fraction : 0.0, cfg.init_noise_sigma);
  Objective objective(net, train.inputs, train.targets, lambda_w, adaptive ? lambda_q : 0.0,
                      adaptive ? GridMode::adaptive : GridMode::frozen,
                      tanh_ordinate_anchor(net.shape));

  MinimizeResult opt;
  if (cfg.optimizer == OptimizerKind::ncg) {
    NcgConfig ncg;
    ncg.max_iterations = cfg.max_iterations;
    opt = minimize_ncg([&objective](const std::vector<double>& x,
                                    std::vector<double>& g) { return objective(x, g); },
                       objective.initial_params(), ncg);
  } else {
    MinibatchProblem problem;
    problem.sample_count = train.n();
    problem.eval = [&objective](const std::vector<double>& x, std::vector<double>& g,
                                const std::vector<int>& batch) {
      if (static_cast<int>(batch.size()) == objective.sample_count())
        return objective(x, g);
      return objective.minibatch_view(batch)(x, g);
    };
    AdamConfig adam = cfg.adam;
    adam.seed = init_seed ^ 0x5adb00c5ULL;
    opt = minimize_adam(problem, objective.initial_params(), adam);
  }

  TrainOutcome out;
  out.net = objective.materialize(opt.point);
  out.trace = std::move(opt.trace);

  ForwardCache cache;
  const Matrix train_pred = forward(out.net, train.inputs, &cache);
  out.clamped_fraction = cache.clamped_fraction();
  out.train_nrmse = nrmse(train_pred, train.targets);
  out.test_nrmse = nrmse(forward(out.net, test.inputs), test.targets);
  return out;
}

namespace {

struct PreparedSplit {
  Dataset train;
  Dataset test;
  NormParams norm;
};

PreparedSplit prepare_split(const ExperimentConfig& cfg, const Dataset& raw, int run) {
  const Split sp = split(raw, SplitSpec{cfg.test_fraction, cfg.seed, run});
  const Dataset train_raw = select(raw, sp.train);
  const Dataset test_raw = select(raw, sp.test);
  const NormParams params =
      fit_normalization(cfg.normalize_on_all_data ? raw : train_raw);
  return PreparedSplit{apply_normalization(train_raw, params),
                       apply_normalization(test_raw, params), params};
}

void write_norm_json(const ExperimentConfig& cfg, int run, const NormParams& params) {
  if (cfg.output_dir.empty()) return;
  char name[48];
  std::snprintf(name, sizeof(name), "/normalization_run%02d.json", run);
  std::ofstream out(cfg.output_dir + name);
  out << norm_params_json(params) << '\n';
}

std::string run_tag(const RunRecord& rec) {
  char tag[32];
  std::snprintf(tag, sizeof(tag), "%s_run%02d", model_name(rec.kind), rec.run);
  return tag;
}

void maybe_export(const ExperimentConfig& cfg, const RunRecord& rec, const SafNetwork& net) {
  if (cfg.output_dir.empty()) return;
  std::filesystem::create_directories(cfg.output_dir);
  if (cfg.export_spline_shapes)
    export_splines(net, cfg.spline_samples_per_span, cfg.output_dir + "/splines_" + run_tag(rec));
}

void write_run_trace(const ExperimentConfig& cfg, const RunRecord& rec, const OptTrace& trace) {
  if (cfg.output_dir.empty()) return;
  write_trace_csv(trace, cfg.output_dir + "/trace_" + run_tag(rec) + ".csv");
}

}  // namespace

ScenarioResult run_scenario1(const ExperimentConfig& cfg, const Dataset& raw) {
  if (cfg.lambda_w.size() != 1 || cfg.lambda_q.size() != 1)
    throw std::invalid_argument("run_scenario1: fixed lambdas expected (one value each)");
  const std::vector<ModelKind> kinds = active_models(cfg);
  if (!cfg.output_dir.empty()) std::filesystem::create_directories(cfg.output_dir);

  ScenarioResult result;
  result.dataset_name = cfg.dataset_name;
  result.scenario = 1;

  std::vector<PreparedSplit> splits;
  splits.reserve(static_cast<std::size_t>(cfg.runs));
  for (int run = 0; run < cfg.runs; ++run) {
    splits.push_back(prepare_split(cfg, raw, run));
    write_norm_json(cfg, run, splits.back().norm);
  }

  struct Job {
    int run;
    ModelKind kind;
  };
  std::vector<Job> jobs;
  for (int run = 0; run < cfg.runs; ++run)
    for (ModelKind kind : kinds) jobs.push_back(Job{run, kind});
  std::vector<RunRecord> records(jobs.size());
  std::vector<OptTrace> traces(jobs.size());
  std::vector<SafNetwork> nets(jobs.size());

  parallel_jobs(static_cast<int>(jobs.size()), cfg.threads, [&](int j) {
    const Job& job = jobs[static_cast<std::size_t>(j)];
    const PreparedSplit& ps = splits[static_cast<std::size_t>(job.run)];
    const auto t0 = std::chrono::steady_clock::now();
    TrainOutcome out = train_model(ps.train, ps.test, job.kind, cfg.lambda_w[0], cfg.lambda_q[0],
                                   cfg, seeded(cfg.seed, static_cast<std::uint64_t>(job.run))());
    const auto t1 = std::chrono::steady_clock::now();

    RunRecord rec;
    rec.run = job.run;
    rec.kind = job.kind;
    rec.train_nrmse = out.train_nrmse;
    rec.test_nrmse = out.test_nrmse;
    rec.lambda_w = cfg.lambda_w[0];
    rec.lambda_q = job.kind == ModelKind::saf ? cfg.lambda_q[0] : 0.0;
    rec.seconds = std::chrono::duration<double>(t1 - t0).count();
    rec.clamped_fraction = out.clamped_fraction;
    rec.iterations = static_cast<int>(out.trace.iterations.size());
    for (const SafNeuron& u : out.net.hidden) rec.hidden_grids.push_back(u.grid);
    for (const SafNeuron& u : out.net.output) rec.output_grids.push_back(u.grid);
    records[static_cast<std::size_t>(j)] = std::move(rec);
    traces[static_cast<std::size_t>(j)] = std::move(out.trace);
    nets[static_cast<std::size_t>(j)] = std::move(out.net);
  });

  for (std::size_t j = 0; j < jobs.size(); ++j) {
    write_run_trace(cfg, records[j], traces[j]);
    maybe_export(cfg, records[j], nets[j]);
    result.records.push_back(std::move(records[j]));
  }
  finish_scenario(result, cfg);
  return result;
}

namespace {

struct GridCell {
  double lambda_w;
  double lambda_q;
};

// Winner = lowest mean CV score; ties go to the stronger regularizer (larger
// lambda_w, then larger lambda_q).
int pick_winner(const std::vector<GridCell>& cells, const std::vector<double>& scores) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(cells.size()); ++i) {
    const double s = scores[static_cast<std::size_t>(i)];
    const double b = scores[static_cast<std::size_t>(best)];
    if (s < b) {
      best = i;
      continue;
    }
    if (s == b) {
      const GridCell& ci = cells[static_cast<std::size_t>(i)];
      const GridCell& cb = cells[static_cast<std::size_t>(best)];
      if (ci.lambda_w > cb.lambda_w ||
          (ci.lambda_w == cb.lambda_w && ci.lambda_q > cb.lambda_q))
        best = i;
    }
  }
  return best;
}

}  // namespace

ScenarioResult run_scenario2(const ExperimentConfig& cfg, const Dataset& raw) {
  if (cfg.lambda_w.empty() || cfg.lambda_q.empty())
    throw std::invalid_argument("run_scenario2: lambda grids must be non-empty");
  const std::vector<ModelKind> kinds = active_models(cfg);
  if (!cfg.output_dir.empty()) std::filesystem::create_directories(cfg.output_dir);

  ScenarioResult result;
  result.dataset_name = cfg.dataset_name;
  result.scenario = 2;

  for (int run = 0; run < cfg.runs; ++run) {
    const PreparedSplit ps = prepare_split(cfg, raw, run);
    write_norm_json(cfg, run, ps.norm);
    const std::vector<std::vector<int>> folds =
        kfold(ps.train, FoldSpec{cfg.cv_folds, seeded(cfg.seed, 7001 + static_cast<std::uint64_t>(run))()});

    // Fold datasets are shared across all grid cells of this run.
    std::vector<Dataset> fold_train, fold_valid;
    for (int f = 0; f < cfg.cv_folds; ++f) {
      std::vector<int> train_idx;
      for (int g = 0; g < cfg.cv_folds; ++g)
        if (g != f)
          train_idx.insert(train_idx.end(), folds[static_cast<std::size_t>(g)].begin(),
                           folds[static_cast<std::size_t>(g)].end());
      fold_train.push_back(select(ps.train, train_idx));
      fold_valid.push_back(select(ps.train, folds[static_cast<std::size_t>(f)]));
    }

    for (ModelKind kind : kinds) {
      std::vector<GridCell> cells;
      if (kind == ModelKind::standard) {
        for (double lw : cfg.lambda_w) cells.push_back(GridCell{lw, 0.0});
      } else {
        for (double lw : cfg.lambda_w)
          for (double lq : cfg.lambda_q) cells.push_back(GridCell{lw, lq});
      }

      const int total_jobs = static_cast<int>(cells.size()) * cfg.cv_folds;
      std::vector<double> fold_scores(static_cast<std::size_t>(total_jobs), 0.0);
      parallel_jobs(total_jobs, cfg.threads, [&](int j) {
        const int cell = j / cfg.cv_folds;
        const int fold = j % cfg.cv_folds;
        const TrainOutcome out = train_model(
            fold_train[static_cast<std::size_t>(fold)], fold_valid[static_cast<std::size_t>(fold)],
            kind, cells[static_cast<std::size_t>(cell)].lambda_w,
            cells[static_cast<std::size_t>(cell)].lambda_q, cfg,
            seeded(cfg.seed, 100000 + static_cast<std::uint64_t>(run) * 100 +
                                 static_cast<std::uint64_t>(fold))());
        fold_scores[static_cast<std::size_t>(j)] = out.test_nrmse;
      });

      std::vector<double> cell_scores(cells.size(), 0.0);
      for (int cell = 0; cell < static_cast<int>(cells.size()); ++cell) {
        double acc = 0.0;
        for (int fold = 0; fold < cfg.cv_folds; ++fold)
          acc += fold_scores[static_cast<std::size_t>(cell * cfg.cv_folds + fold)];
        cell_scores[static_cast<std::size_t>(cell)] = acc / cfg.cv_folds;
      }
      const GridCell winner = cells[static_cast<std::size_t>(pick_winner(cells, cell_scores))];

      const auto t0 = std::chrono::steady_clock::now();
      TrainOutcome out = train_model(ps.train, ps.test, kind, winner.lambda_w, winner.lambda_q,
                                     cfg, seeded(cfg.seed, static_cast<std::uint64_t>(run))());
      const auto t1 = std::chrono::steady_clock::now();

      RunRecord rec;
      rec.run = run;
      rec.kind = kind;
      rec.train_nrmse = out.train_nrmse;
      rec.test_nrmse = out.test_nrmse;
      rec.lambda_w = winner.lambda_w;
      rec.lambda_q = kind == ModelKind::saf ? winner.lambda_q : 0.0;
      rec.seconds = std::chrono::duration<double>(t1 - t0).count();
      rec.clamped_fraction = out.clamped_fraction;
      rec.iterations = static_cast<int>(out.trace.iterations.size());
      for (const SafNeuron& u : out.net.hidden) rec.hidden_grids.push_back(u.grid);
      for (const SafNeuron& u : out.net.output) rec.output_grids.push_back(u.grid);

      write_run_trace(cfg, rec, out.trace);
      maybe_export(cfg, rec, out.net);
      result.records.push_back(std::move(rec));
    }
    std::fprintf(stderr, "scenario 2: run %d/%d done\n", run + 1, cfg.runs);
  }
  finish_scenario(result, cfg);
  return result;
}

void export_splines(const SafNetwork& net, int samples_per_span, const std::string& prefix) {
  if (samples_per_span < 1) throw std::invalid_argument("export_splines: bad sample count");
  const auto write_unit = [&](const SafNeuron& unit, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("export_splines: cannot open " + path);
    out << "s,phi,dphi\n";
    out.precision(17);
    const KnotGrid& grid = unit.grid;
    // One span of extrapolation on each side of the sampled range.
    const int steps = (grid.size() + 1) * samples_per_span;
    const double s0 = -(grid.half() + 1) * grid.delta_x;
    const double step = grid.delta_x / samples_per_span;
    for (int i = 0; i <= steps; ++i) {
      const double s = s0 + i * step;
      out << s << ',' << eval(s, grid, net.basis) << ','
          << eval_input_derivative(s, grid, net.basis) << '\n';
    }
  };
  for (std::size_t i = 0; i < net.hidden.size(); ++i)
    write_unit(net.hidden[i], prefix + "_hidden" + std::to_string(i) + ".csv");
  for (std::size_t j = 0; j < net.output.size(); ++j)
    write_unit(net.output[j], prefix + "_output" + std::to_string(j) + ".csv");

  std::ofstream knots(prefix + "_knots.csv");
  if (!knots) throw std::runtime_error("export_splines: cannot open knots file");
  knots << "layer,neuron,knot,x,q\n";
  knots.precision(17);
  const auto dump = [&](const char* layer, const std::vector<SafNeuron>& units) {
    for (std::size_t i = 0; i < units.size(); ++i)
      for (int k = 0; k < units[i].grid.size(); ++k)
        knots << layer << ',' << i << ',' << k << ',' << units[i].grid.abscissa(k) << ','
              << units[i].grid.ordinates[static_cast<std::size_t>(k)] << '\n';
  };
  dump("hidden", net.hidden);
  dump("output", net.output);
}

std::string format_table(const ScenarioResult& result) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-14s %-14s %-19s %-19s\n", "dataset", "nonlinearity",
                "train_nrmse", "test_nrmse");
  out += line;
  for (const ModelSummary& s : result.summaries) {
    std::snprintf(line, sizeof(line), "%-14s %-14s %-19s %-19s\n", result.dataset_name.c_str(),
                  model_name(s.kind), format_pm(s.train_mean, s.train_std).c_str(),
                  format_pm(s.test_mean, s.test_std).c_str());
    out += line;
  }
  return out;
}

void write_report(const ScenarioResult& result, const std::string& dir) {
  std::filesystem::create_directories(dir);

  std::ofstream runs(dir + "/results.csv");
  runs << "dataset,model,run,lambda_w,lambda_q,train_nrmse,test_nrmse,seconds,clamped_fraction,"
          "iterations\n";
  runs.precision(12);
  for (const RunRecord& r : result.records)
    runs << result.dataset_name << ',' << model_name(r.kind) << ',' << r.run << ',' << r.lambda_w
         << ',' << r.lambda_q << ',' << r.train_nrmse << ',' << r.test_nrmse << ',' << r.seconds
         << ',' << r.clamped_fraction << ',' << r.iterations << '\n';

  std::ofstream summary(dir + "/summary.csv");
  summary << "dataset,model,runs,train_nrmse_mean,train_nrmse_std,test_nrmse_mean,test_nrmse_std,"
             "lambda_w_median,lambda_q_median\n";
  summary.precision(12);
  for (const ModelSummary& s : result.summaries)
    summary << result.dataset_name << ',' << model_name(s.kind) << ',' << s.runs << ','
            << s.train_mean << ',' << s.train_std << ',' << s.test_mean << ',' << s.test_std
            << ',' << s.lambda_w_median << ',' << s.lambda_q_median << '\n';

  std::ofstream table(dir + "/table.txt");
  table << format_table(result);
}

std::string config_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["dataset_name"] = cfg.dataset_name;
  j["run_standard"] = cfg.run_standard;
  j["run_saf"] = cfg.run_saf;
  j["hidden"] = cfg.hidden;
  j["delta_x"] = cfg.delta_x;
  j["knot_range"] = cfg.knot_range;
  j["lambda_w"] = cfg.lambda_w;
  j["lambda_q"] = cfg.lambda_q;
  j["optimizer"] = cfg.optimizer == OptimizerKind::ncg ? "ncg" : "adam";
  j["max_iterations"] = cfg.max_iterations;
  j["adam"] = {{"step_size", cfg.adam.step_size}, {"beta1", cfg.adam.beta1},
               {"beta2", cfg.adam.beta2},         {"epsilon", cfg.adam.epsilon},
               {"batch_size", cfg.adam.batch_size}, {"epochs", cfg.adam.epochs}};
  j["runs"] = cfg.runs;
  j["seed"] = cfg.seed;
  j["test_fraction"] = cfg.test_fraction;
  j["cv_folds"] = cfg.cv_folds;
  j["init_noise_fraction"] = cfg.init_noise_fraction;
  j["init_noise_sigma"] = cfg.init_noise_sigma;
  j["normalize_on_all_data"] = cfg.normalize_on_all_data;
  j["output_dir"] = cfg.output_dir;
  j["export_spline_shapes"] = cfg.export_spline_shapes;
  j["spline_samples_per_span"] = cfg.spline_samples_per_span;
  j["threads"] = cfg.threads;
  return j.dump(2);
}

std::vector<double> exponential_grid(const std::vector<int>& exponents) {
  std::vector<double> grid;
  for (int j : exponents) grid.push_back(std::pow(2.0, j));
  return grid;
}

std::vector<double> default_grid() {
  std::vector<int> exps;
  for (int j = -10; j <= 5; ++j) exps.push_back(j);
  return exponential_grid(exps);
}

std::vector<double> reduced_default_grid() { return exponential_grid({-10, -7, -4, -1, 2, 5}); }

}  // namespace saf
