#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "saf/matrix.hpp"

namespace saf {

// Per-column affine map fitted from observed [lo, hi] onto a target range.
struct ColumnMap {
  double src_lo = 0.0, src_hi = 0.0;
  double dst_lo = 0.0, dst_hi = 0.0;
  bool degenerate = false;  // constant source column, maps to the range midpoint

  double apply(double x) const {
    if (degenerate) return 0.5 * (dst_lo + dst_hi);
    return dst_lo + (x - src_lo) * (dst_hi - dst_lo) / (src_hi - src_lo);
  }
  double invert(double y) const {
    if (degenerate) return src_lo;
    return src_lo + (y - dst_lo) * (src_hi - src_lo) / (dst_hi - dst_lo);
  }
};

struct NormParams {
  std::vector<ColumnMap> inputs;
  std::vector<ColumnMap> targets;
  bool empty() const { return inputs.empty() && targets.empty(); }
};

// Immutable after construction; safe for shared concurrent reads.
struct Dataset {
  Matrix inputs;   // N x D
  Matrix targets;  // N x O
  std::vector<std::string> feature_names;
  std::vector<std::string> target_names;
  NormParams norm;  // maps used to produce this dataset, empty if raw

  int n() const { return inputs.rows; }
  int d() const { return inputs.cols; }
  int o() const { return targets.cols; }
};

// Numeric CSV with an optional single header row. Rows with missing or
// non-numeric fields are skipped and reported in `diagnostics` with their
// 1-based line number.
Dataset load_csv(const std::string& path, const std::vector<int>& target_columns,
                 std::vector<std::string>* diagnostics = nullptr);

void save_csv(const Dataset& ds, const std::string& path);

NormParams fit_normalization(const Dataset& ds, double in_lo = -1.0, double in_hi = 1.0,
                             double tgt_lo = -0.5, double tgt_hi = 0.5);

// Applies previously fitted maps (typically fitted on the training portion).
Dataset apply_normalization(const Dataset& ds, const NormParams& params,
                            std::vector<std::string>* diagnostics = nullptr);

// Fit-and-apply on the same data.
Dataset normalize(const Dataset& ds, double in_lo = -1.0, double in_hi = 1.0,
                  double tgt_lo = -0.5, double tgt_hi = 0.5,
                  std::vector<std::string>* diagnostics = nullptr);

Dataset denormalize(const Dataset& ds);

struct SplitSpec {
  double test_fraction = 0.3;
  std::uint64_t seed = 0;
  int run_index = 0;
};

struct Split {
  std::vector<int> train;
  std::vector<int> test;
};

struct FoldSpec {
  int k = 3;
  std::uint64_t seed = 0;
};

Split split(const Dataset& ds, const SplitSpec& spec);
std::vector<std::vector<int>> kfold(const Dataset& ds, const FoldSpec& spec);

Dataset select(const Dataset& ds, const std::vector<int>& indices);

// Root mean squared error divided by the population standard deviation of the
// targets, per output column, averaged over columns. Invariant under a common
// affine rescaling of predictions and targets.
double nrmse(const Matrix& pred, const Matrix& target);

// A small nonlinear regression benchmark: ridge components with oscillating
// and non-monotone profiles over 8 features (three of them inactive), plus a
// little observation noise. Used when no real dataset is supplied.
Dataset make_synthetic_regression(int n, std::uint64_t seed);

std::string norm_params_json(const NormParams& params);

}  // namespace saf
