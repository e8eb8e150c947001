#include "saf/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "saf/rng.hpp"

#include "json.hpp"

namespace saf {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

bool parse_number(const std::string& token, double& value) {
  const char* begin = token.c_str();
  char* end = nullptr;
  value = std::strtod(begin, &end);
  if (end == begin) return false;
  while (*end == ' ' || *end == '\t') ++end;
  return *end == '\0' && std::isfinite(value);
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  std::size_t b = s.find_last_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

}  // namespace

Dataset load_csv(const std::string& path, const std::vector<int>& target_columns,
                 std::vector<std::string>* diagnostics) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);

  std::string line;
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
  int columns = -1;
  long line_no = 0;
  bool header_checked = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_fields(line);

    if (!header_checked) {
      header_checked = true;
      bool all_numeric = true;
      double tmp;
      for (const std::string& f : fields)
        if (!parse_number(trim(f), tmp)) {
          all_numeric = false;
          break;
        }
      if (!all_numeric) {
        for (const std::string& f : fields) names.push_back(trim(f));
        columns = static_cast<int>(fields.size());
        continue;
      }
    }

    if (columns < 0) columns = static_cast<int>(fields.size());
    if (static_cast<int>(fields.size()) != columns) {
      if (diagnostics)
        diagnostics->push_back("line " + std::to_string(line_no) + ": expected " +
                               std::to_string(columns) + " fields, got " +
                               std::to_string(fields.size()));
      continue;
    }
    std::vector<double> row(static_cast<std::size_t>(columns));
    bool ok = true;
    for (int c = 0; c < columns; ++c) {
      if (!parse_number(trim(fields[static_cast<std::size_t>(c)]), row[static_cast<std::size_t>(c)])) {
        if (diagnostics)
          diagnostics->push_back("line " + std::to_string(line_no) + ": bad field '" +
                                 trim(fields[static_cast<std::size_t>(c)]) + "' in column " +
                                 std::to_string(c));
        ok = false;
        break;
      }
    }
    if (ok) rows.push_back(std::move(row));
  }

  if (columns < 0 || rows.empty()) throw std::runtime_error("load_csv: no usable rows in " + path);

  std::vector<int> targets = target_columns;
  for (int& t : targets)
    if (t < 0) t += columns;  // negative indexes count from the end
  for (int t : targets)
    if (t < 0 || t >= columns) throw std::invalid_argument("load_csv: target column out of range");
  if (targets.empty()) throw std::invalid_argument("load_csv: no target column given");

  std::vector<bool> is_target(static_cast<std::size_t>(columns), false);
  for (int t : targets) is_target[static_cast<std::size_t>(t)] = true;

  Dataset ds;
  const int n = static_cast<int>(rows.size());
  const int o = static_cast<int>(targets.size());
  const int d = columns - o;
  if (d < 1) throw std::invalid_argument("load_csv: no feature columns left");
  ds.inputs = Matrix(n, d);
  ds.targets = Matrix(n, o);
  for (int r = 0; r < n; ++r) {
    int di = 0;
    for (int c = 0; c < columns; ++c)
      if (!is_target[static_cast<std::size_t>(c)])
        ds.inputs(r, di++) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    for (int t = 0; t < o; ++t)
      ds.targets(r, t) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(targets[static_cast<std::size_t>(t)])];
  }
  if (!names.empty()) {
    for (int c = 0; c < columns; ++c) {
      if (is_target[static_cast<std::size_t>(c)])
        ds.target_names.push_back(names[static_cast<std::size_t>(c)]);
      else
        ds.feature_names.push_back(names[static_cast<std::size_t>(c)]);
    }
  } else {
    for (int c = 0; c < d; ++c) ds.feature_names.push_back("x" + std::to_string(c));
    for (int t = 0; t < o; ++t) ds.target_names.push_back("y" + std::to_string(t));
  }
  return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_csv: cannot open " + path);
  out.precision(17);
  for (std::size_t i = 0; i < ds.feature_names.size(); ++i) out << ds.feature_names[i] << ',';
  for (std::size_t i = 0; i < ds.target_names.size(); ++i)
    out << ds.target_names[i] << (i + 1 < ds.target_names.size() ? "," : "\n");
  for (int r = 0; r < ds.n(); ++r) {
    for (int c = 0; c < ds.d(); ++c) out << ds.inputs(r, c) << ',';
    for (int c = 0; c < ds.o(); ++c) out << ds.targets(r, c) << (c + 1 < ds.o() ? "," : "\n");
  }
}

namespace {

ColumnMap fit_column(const Matrix& m, int col, double dst_lo, double dst_hi) {
  double lo = m(0, col), hi = m(0, col);
  for (int r = 1; r < m.rows; ++r) {
    lo = std::min(lo, m(r, col));
    hi = std::max(hi, m(r, col));
  }
  return ColumnMap{lo, hi, dst_lo, dst_hi, !(hi > lo)};
}

void apply_columns(const Matrix& src, Matrix& dst, const std::vector<ColumnMap>& maps) {
  for (int r = 0; r < src.rows; ++r)
    for (int c = 0; c < src.cols; ++c) dst(r, c) = maps[static_cast<std::size_t>(c)].apply(src(r, c));
}

}  // namespace

NormParams fit_normalization(const Dataset& ds, double in_lo, double in_hi, double tgt_lo,
                             double tgt_hi) {
  NormParams p;
  for (int c = 0; c < ds.d(); ++c) p.inputs.push_back(fit_column(ds.inputs, c, in_lo, in_hi));
  for (int c = 0; c < ds.o(); ++c) p.targets.push_back(fit_column(ds.targets, c, tgt_lo, tgt_hi));
  return p;
}

Dataset apply_normalization(const Dataset& ds, const NormParams& params,
                            std::vector<std::string>* diagnostics) {
  if (static_cast<int>(params.inputs.size()) != ds.d() ||
      static_cast<int>(params.targets.size()) != ds.o())
    throw std::invalid_argument("apply_normalization: column count mismatch");
  Dataset out = ds;
  apply_columns(ds.inputs, out.inputs, params.inputs);
  apply_columns(ds.targets, out.targets, params.targets);
  out.norm = params;
  if (diagnostics) {
    for (std::size_t c = 0; c < params.inputs.size(); ++c)
      if (params.inputs[c].degenerate)
        diagnostics->push_back("input column " + std::to_string(c) +
                               " is constant; mapped to the range midpoint");
    for (std::size_t c = 0; c < params.targets.size(); ++c)
      if (params.targets[c].degenerate)
        diagnostics->push_back("target column " + std::to_string(c) +
                               " is constant; mapped to the range midpoint");
  }
  return out;
}

Dataset normalize(const Dataset& ds, double in_lo, double in_hi, double tgt_lo, double tgt_hi,
                  std::vector<std::string>* diagnostics) {
  return apply_normalization(ds, fit_normalization(ds, in_lo, in_hi, tgt_lo, tgt_hi), diagnostics);
}

Dataset denormalize(const Dataset& ds) {
  if (ds.norm.empty()) return ds;
  Dataset out = ds;
  for (int r = 0; r < ds.n(); ++r) {
    for (int c = 0; c < ds.d(); ++c)
      out.inputs(r, c) = ds.norm.inputs[static_cast<std::size_t>(c)].invert(ds.inputs(r, c));
    for (int c = 0; c < ds.o(); ++c)
      out.targets(r, c) = ds.norm.targets[static_cast<std::size_t>(c)].invert(ds.targets(r, c));
  }
  out.norm = NormParams{};
  return out;
}

Split split(const Dataset& ds, const SplitSpec& spec) {
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0))
    throw std::invalid_argument("split: test fraction must lie in (0, 1)");
  const int n = ds.n();
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  Rng rng = seeded(spec.seed, static_cast<std::uint64_t>(spec.run_index));
  shuffle_in_place(idx, rng);

  int test_n = static_cast<int>(std::llround(spec.test_fraction * n));
  test_n = std::max(1, std::min(n - 1, test_n));

  Split s;
  s.test.assign(idx.begin(), idx.begin() + test_n);
  s.train.assign(idx.begin() + test_n, idx.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

std::vector<std::vector<int>> kfold(const Dataset& ds, const FoldSpec& spec) {
  const int n = ds.n();
  if (spec.k < 2 || spec.k > n) throw std::invalid_argument("kfold: need 2 <= k <= N");
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  Rng rng = seeded(spec.seed, 0);
  shuffle_in_place(idx, rng);

  std::vector<std::vector<int>> folds(static_cast<std::size_t>(spec.k));
  const int base = n / spec.k;
  const int extra = n % spec.k;
  int pos = 0;
  for (int f = 0; f < spec.k; ++f) {
    const int size = base + (f < extra ? 1 : 0);
    folds[static_cast<std::size_t>(f)].assign(idx.begin() + pos, idx.begin() + pos + size);
    std::sort(folds[static_cast<std::size_t>(f)].begin(), folds[static_cast<std::size_t>(f)].end());
    pos += size;
  }
  return folds;
}

Dataset select(const Dataset& ds, const std::vector<int>& indices) {
  Dataset out;
  out.feature_names = ds.feature_names;
  out.target_names = ds.target_names;
  out.norm = ds.norm;
  out.inputs = Matrix(static_cast<int>(indices.size()), ds.d());
  out.targets = Matrix(static_cast<int>(indices.size()), ds.o());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const int src = indices[r];
    if (src < 0 || src >= ds.n()) throw std::invalid_argument("select: index out of range");
    for (int c = 0; c < ds.d(); ++c) out.inputs(static_cast<int>(r), c) = ds.inputs(src, c);
    for (int c = 0; c < ds.o(); ++c) out.targets(static_cast<int>(r), c) = ds.targets(src, c);
  }
  return out;
}

double nrmse(const Matrix& pred, const Matrix& target) {
  if (!pred.same_shape(target)) throw std::invalid_argument("nrmse: shape mismatch");
  if (pred.rows < 2) throw std::invalid_argument("nrmse: need at least two samples");
  const int n = pred.rows;
  double acc = 0.0;
  for (int c = 0; c < pred.cols; ++c) {
    double mean = 0.0;
    for (int r = 0; r < n; ++r) mean += target(r, c);
    mean /= n;
    double var = 0.0, mse = 0.0;
    for (int r = 0; r < n; ++r) {
      const double dev = target(r, c) - mean;
      var += dev * dev;
      const double err = pred(r, c) - target(r, c);
      mse += err * err;
    }
    var /= n;
    mse /= n;
    if (!(var > 0.0)) throw std::runtime_error("nrmse: target column has zero variance");
    acc += std::sqrt(mse) / std::sqrt(var);
  }
  return acc / pred.cols;
}

Dataset make_synthetic_regression(int n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("make_synthetic_regression: need n >= 2");
  Rng rng(seed);
  const int d = 8;
  Dataset ds;
  ds.inputs = Matrix(n, d);
  ds.targets = Matrix(n, 1);
  for (int c = 0; c < d; ++c) ds.feature_names.push_back("x" + std::to_string(c));
  ds.target_names.push_back("y");
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < d; ++c) ds.inputs(r, c) = uniform_real(rng, -1.0, 1.0);
    const double* x = ds.inputs.row(r);
    // A kink, an off-centre bump and a linear ridge: more sigmoid pieces than
    // a five-unit tanh network can spend, while each piece is locally
    // learnable. Three features are inert.
    const double ridge1 = 0.8 * x[0] + 0.6 * x[1];
    const double ridge2 = 0.8 * x[2] - 0.6 * x[3];
    const double y = 1.4 * std::fabs(ridge2) +
                     0.9 * std::exp(-8.0 * (x[4] - 0.25) * (x[4] - 0.25)) + 0.5 * ridge1 +
                     0.05 * gaussian(rng);
    ds.targets(r, 0) = y;
  }
  return ds;
}

std::string norm_params_json(const NormParams& params) {
  nlohmann::json j;
  const auto col = [](const ColumnMap& m) {
    return nlohmann::json{{"src_lo", m.src_lo},
                          {"src_hi", m.src_hi},
                          {"dst_lo", m.dst_lo},
                          {"dst_hi", m.dst_hi},
                          {"degenerate", m.degenerate}};
  };
  for (const ColumnMap& m : params.inputs) j["inputs"].push_back(col(m));
  for (const ColumnMap& m : params.targets) j["targets"].push_back(col(m));
  return j.dump(2);
}

}  // namespace saf
