#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "saf/experiment.hpp"

using namespace saf;

namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  double num(std::size_t r, std::size_t c) const { return std::stod(rows[r][c]); }
};

CsvTable read_csv(const std::string& path) {
  CsvTable t;
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);
  std::stringstream hs(line);
  std::string tok;
  while (std::getline(hs, tok, ',')) t.header.push_back(tok);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> row;
    std::stringstream ls(line);
    while (std::getline(ls, tok, ',')) row.push_back(tok);
    t.rows.push_back(row);
  }
  return t;
}

}  // namespace

TEST_CASE("export_splines: tanh shape, identity precision, derivative column") {
  SafNetwork net = init_glorot(3, 2, 1, 0.2, 21, 5, 0.0);  // clean tanh grids
  net.hidden[1].grid = init_from_function([](double x) { return x; }, 0.2, 21);

  export_splines(net, 10, "spl_test");

  // Tanh-sampled neuron: interpolation error inside the core range, cubic
  // extrapolation in the outermost spans of the knot range.
  CsvTable t = read_csv("spl_test_hidden0.csv");
  REQUIRE(t.header == std::vector<std::string>{"s", "phi", "dphi"});
  double core_err = 0.0, band_err = 0.0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const double s = t.num(r, 0);
    const double err = std::fabs(t.num(r, 1) - std::tanh(s));
    if (std::fabs(s) <= 1.8)
      core_err = std::max(core_err, err);
    else if (std::fabs(s) <= 2.0)
      band_err = std::max(band_err, err);
  }
  CHECK(core_err < 1e-3);
  CHECK(band_err < 5e-3);

  // Identity-sampled neuron exports phi == s.
  CsvTable ti = read_csv("spl_test_hidden1.csv");
  for (std::size_t r = 0; r < ti.rows.size(); ++r)
    CHECK(ti.num(r, 1) == doctest::Approx(ti.num(r, 0)).epsilon(1e-12));

  // dphi column agrees with numerical differentiation of the phi column.
  for (std::size_t i = 1; i + 1 < t.rows.size(); ++i) {
    const double num =
        (t.num(i + 1, 1) - t.num(i - 1, 1)) / (t.num(i + 1, 0) - t.num(i - 1, 0));
    CHECK(t.num(i, 2) == doctest::Approx(num).epsilon(2e-3));
  }

  // Sampled range covers one span of extrapolation on each side.
  CHECK(t.num(0, 0) == doctest::Approx(-2.2));
  CHECK(t.num(t.rows.size() - 1, 0) == doctest::Approx(2.2));

  CsvTable knots = read_csv("spl_test_knots.csv");
  CHECK(knots.rows.size() == 3 * 21);  // per-knot rows for all three neurons

  for (const char* f : {"spl_test_hidden0.csv", "spl_test_hidden1.csv", "spl_test_output0.csv",
                        "spl_test_knots.csv"})
    std::remove(f);
}

TEST_CASE("report aggregation: constant runs, known pair, golden table layout") {
  ScenarioResult result;
  result.dataset_name = "demo";
  result.scenario = 1;
  for (int run = 0; run < 15; ++run) {
    RunRecord r;
    r.run = run;
    r.kind = ModelKind::standard;
    r.train_nrmse = 0.25;
    r.test_nrmse = 0.25;
    result.records.push_back(r);
  }
  RunRecord a;
  a.kind = ModelKind::saf;
  a.train_nrmse = 0.3;
  a.test_nrmse = 0.3;
  RunRecord b = a;
  b.run = 1;
  b.train_nrmse = 0.5;
  b.test_nrmse = 0.5;
  result.records.push_back(a);
  result.records.push_back(b);

  ScenarioResult summarized = result;
  ModelSummary std_s;
  std_s.kind = ModelKind::standard;
  std_s.runs = 15;
  std_s.train_mean = std_s.test_mean = 0.25;
  std_s.train_std = std_s.test_std = 0.0;
  ModelSummary saf_s;
  saf_s.kind = ModelKind::saf;
  saf_s.runs = 2;
  saf_s.train_mean = saf_s.test_mean = 0.4;
  saf_s.train_std = saf_s.test_std = 0.1414;
  summarized.summaries = {std_s, saf_s};

  const std::string table = format_table(summarized);
  const std::string golden =
      "dataset        nonlinearity   train_nrmse         test_nrmse         \n"
      "demo           standard       0.2500 \xc2\xb1 0.0000    0.2500 \xc2\xb1 0.0000   \n"
      "demo           saf            0.4000 \xc2\xb1 0.1414    0.4000 \xc2\xb1 0.1414   \n";
  CHECK(table == golden);

  write_report(summarized, "report_test");
  CHECK(std::filesystem::exists("report_test/results.csv"));
  CHECK(std::filesystem::exists("report_test/summary.csv"));
  CHECK(std::filesystem::exists("report_test/table.txt"));
  const CsvTable runs = read_csv("report_test/results.csv");
  CHECK(runs.header.size() == 10);
  CHECK(runs.rows.size() == 17);
  CHECK(runs.rows[0][0] == "demo");
  CHECK(runs.rows[0][1] == "standard");
  std::filesystem::remove_all("report_test");
}

TEST_CASE("scenario 1 smoke: reproducible records and sane metrics") {
  const Dataset ds = make_synthetic_regression(120, 21);
  ExperimentConfig cfg;
  cfg.dataset_name = "smoke";
  cfg.runs = 2;
  cfg.max_iterations = 60;
  cfg.seed = 3;
  cfg.threads = 1;

  const ScenarioResult a = run_scenario1(cfg, ds);
  const ScenarioResult b = run_scenario1(cfg, ds);
  REQUIRE(a.records.size() == 4);  // 2 runs x 2 models
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].train_nrmse == b.records[i].train_nrmse);
    CHECK(a.records[i].test_nrmse == b.records[i].test_nrmse);
    CHECK(std::isfinite(a.records[i].train_nrmse));
    CHECK(a.records[i].test_nrmse > 0.0);
  }
  const ModelSummary* std_s = a.summary(ModelKind::standard);
  const ModelSummary* saf_s = a.summary(ModelKind::saf);
  REQUIRE(std_s != nullptr);
  REQUIRE(saf_s != nullptr);
  CHECK(std_s->runs == 2);
  CHECK(saf_s->runs == 2);
  CHECK(std::isfinite(std_s->test_mean));
  CHECK(std::isfinite(saf_s->test_mean));

  // Final grids are recorded, and the frozen baseline's grids stay tanh.
  const KnotGrid clean = init_from_function([](double x) { return std::tanh(x); }, 0.2, 21);
  for (const RunRecord& r : a.records) {
    REQUIRE(r.hidden_grids.size() == 5);
    if (r.kind == ModelKind::standard)
      for (const KnotGrid& g : r.hidden_grids) CHECK(g.ordinates == clean.ordinates);
  }
}

TEST_CASE("scenario 2 smoke: grid search picks winners from the grid") {
  const Dataset ds = make_synthetic_regression(60, 4);
  ExperimentConfig cfg;
  cfg.dataset_name = "smoke2";
  cfg.runs = 1;
  cfg.max_iterations = 40;
  cfg.seed = 5;
  cfg.threads = 2;
  cfg.lambda_w = {1e-3, 1e-1};
  cfg.lambda_q = {1e-4, 1e-2};

  const ScenarioResult res = run_scenario2(cfg, ds);
  REQUIRE(res.records.size() == 2);
  for (const RunRecord& r : res.records) {
    const bool lw_on_grid = r.lambda_w == 1e-3 || r.lambda_w == 1e-1;
    CHECK(lw_on_grid);
    if (r.kind == ModelKind::saf) {
      const bool lq_on_grid = r.lambda_q == 1e-4 || r.lambda_q == 1e-2;
      CHECK(lq_on_grid);
    } else {
      CHECK(r.lambda_q == 0.0);
    }
    CHECK(std::isfinite(r.test_nrmse));
  }
}

TEST_CASE("experiment config: knot count and grids") {
  ExperimentConfig cfg;
  CHECK(cfg.knot_count() == 21);
  cfg.delta_x = 0.25;
  cfg.knot_range = 2.0;
  CHECK(cfg.knot_count() == 17);
  cfg.delta_x = 0.3;
  CHECK_THROWS_AS(cfg.knot_count(), std::invalid_argument);

  CHECK(default_grid().size() == 16);
  CHECK(default_grid().front() == doctest::Approx(std::pow(2.0, -10)));
  CHECK(default_grid().back() == 32.0);
  CHECK(reduced_default_grid().size() == 6);
  CHECK(reduced_default_grid()[1] == doctest::Approx(std::pow(2.0, -7)));
}
