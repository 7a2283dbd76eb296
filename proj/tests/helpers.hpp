#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "mvgb/dataset.hpp"
#include "mvgb/rng.hpp"
#include "mvgb/tree.hpp"
#include "mvgb/types.hpp"

namespace testutil {

inline std::filesystem::path tmp_dir() {
  const auto p = std::filesystem::temp_directory_path() / "mvgb_tests";
  std::filesystem::create_directories(p);
  return p;
}

inline mvgb::Dataset make_dataset(const std::vector<std::pair<std::string, std::vector<double>>>& preds,
                                  const std::vector<std::pair<std::string, std::vector<double>>>& outs) {
  std::vector<mvgb::Column> cols;
  for (const auto& [name, v] : preds) cols.push_back({name, mvgb::Role::predictor, v});
  for (const auto& [name, v] : outs) cols.push_back({name, mvgb::Role::outcome, v});
  return mvgb::Dataset::from_columns(std::move(cols));
}

// Random complete dataset: predictors standard normal, outcomes a noisy
// linear blend so trees have signal to find.
inline mvgb::Dataset random_dataset(int n, int p, int q, std::uint64_t seed,
                                    double missing_rate = 0.0) {
  mvgb::Rng rng(seed);
  std::vector<std::pair<std::string, std::vector<double>>> preds, outs;
  std::vector<std::vector<double>> x(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) {
    std::vector<double> col(static_cast<std::size_t>(n));
    for (double& v : col) v = rng.normal();
    x[static_cast<std::size_t>(j)] = col;
  }
  for (int t = 0; t < q; ++t) {
    std::vector<double> col(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      double s = rng.normal();
      for (int j = 0; j < p; ++j)
        s += ((j + t) % 3 == 0 ? 0.8 : 0.1) * x[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
      col[static_cast<std::size_t>(i)] = s;
    }
    outs.emplace_back("y" + std::to_string(t + 1), col);
  }
  for (int j = 0; j < p; ++j) {
    auto col = x[static_cast<std::size_t>(j)];
    if (missing_rate > 0.0)
      for (double& v : col)
        if (rng.uniform() < missing_rate) v = mvgb::kMissing;
    preds.emplace_back("x" + std::to_string(j + 1), col);
  }
  return make_dataset(preds, outs);
}

inline std::vector<int> all_rows(const mvgb::Dataset& d) {
  std::vector<int> rows(d.n_rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
  return rows;
}

// ---------------------------------------------------------------------------
// Brute-force split oracle, written independently of the engine: enumerates
// every predictor and every midpoint between consecutive distinct values,
// computes child SSEs directly from the partition, and applies the documented
// tie rule (higher gain, then lower predictor, then lower threshold).

struct OracleSplit {
  bool found = false;
  int pred = -1;
  double thr = 0.0;
  double gain = 0.0;
  std::vector<int> left, right;  // row partitions (present-valued rows only)
};

// Direct SSE of target columns over a row subset, about subset means.
inline double direct_sse(const std::vector<const double*>& targets,
                         const std::vector<int>& rows) {
  double sse = 0.0;
  for (const double* y : targets) {
    double mean = 0.0;
    for (int r : rows) mean += y[r];
    mean /= static_cast<double>(rows.size());
    for (int r : rows) sse += (y[r] - mean) * (y[r] - mean);
  }
  return sse;
}

inline OracleSplit oracle_best_split(const mvgb::Dataset& d,
                                     const std::vector<const double*>& targets,
                                     const std::vector<int>& node_rows, int min_node) {
  OracleSplit best;
  for (std::size_t j = 0; j < d.n_predictors(); ++j) {
    const auto& x = d.predictor(j).values;
    std::vector<int> present;
    for (int r : node_rows)
      if (!mvgb::is_missing(x[static_cast<std::size_t>(r)])) present.push_back(r);
    if (static_cast<int>(present.size()) < 2 * min_node) continue;
    std::vector<double> vals;
    for (int r : present) vals.push_back(x[static_cast<std::size_t>(r)]);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    const double parent_sse = direct_sse(targets, present);
    for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
      const double thr = (vals[k] + vals[k + 1]) * 0.5;
      if (!(thr < vals[k + 1])) continue;
      std::vector<int> left, right;
      for (int r : present)
        (x[static_cast<std::size_t>(r)] <= thr ? left : right).push_back(r);
      if (static_cast<int>(left.size()) < min_node ||
          static_cast<int>(right.size()) < min_node)
        continue;
      const double gain = parent_sse - direct_sse(targets, left) - direct_sse(targets, right);
      // Strictly-better keeps the first candidate on exact ties, which is the
      // documented lower-predictor-then-lower-threshold rule. (Exact ties only
      // arise from identical partitions, where both formulas agree bitwise.)
      if (!best.found || gain > best.gain) {
        best.found = true;
        best.pred = static_cast<int>(j);
        best.thr = thr;
        best.gain = gain;
        best.left = left;
        best.right = right;
      }
    }
  }
  return best;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace testutil
