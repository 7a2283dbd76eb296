#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mvgb/types.hpp"

namespace mvgb {

enum class Role { predictor, outcome };

// One named numeric column. NaN encodes a missing entry; load paths reject
// non-finite parsed values, so the encoding is unambiguous.
struct Column {
  std::string name;
  Role role = Role::predictor;
  std::vector<double> values;
};

inline bool is_missing(double v) { return std::isnan(v); }
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

// In-memory table of numeric columns with predictor/outcome roles.
class Dataset {
 public:
  Dataset() = default;
  // Validates shapes, unique names, and finiteness of present values.
  static Dataset from_columns(std::vector<Column> cols);

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return cols_.size(); }
  std::size_t n_predictors() const { return predictor_ids_.size(); }
  std::size_t n_outcomes() const { return outcome_ids_.size(); }

  const Column& col(std::size_t i) const { return cols_[i]; }
  const Column& predictor(std::size_t j) const { return cols_[static_cast<std::size_t>(predictor_ids_[j])]; }
  const Column& outcome(std::size_t q) const { return cols_[static_cast<std::size_t>(outcome_ids_[q])]; }

  // Column index by name, or -1.
  int find(const std::string& name) const;
  const std::vector<int>& predictor_ids() const { return predictor_ids_; }
  const std::vector<int>& outcome_ids() const { return outcome_ids_; }
  std::vector<std::string> predictor_names() const;
  std::vector<std::string> outcome_names() const;

  // New dataset from the given rows, in order; duplicates allowed (bootstrap).
  Dataset select_rows(std::span<const int> rows) const;

  Matrix outcome_matrix() const;  // n x Q
  Matrix predictor_matrix() const;  // n x p

 private:
  std::vector<Column> cols_;
  std::vector<int> predictor_ids_;
  std::vector<int> outcome_ids_;
  std::size_t n_rows_ = 0;
};

// Reads a CSV with a header row. Columns named in outcome_names become
// outcomes (all must be present); everything else is a predictor. Empty cells
// and the token "NA" are missing.
Dataset load_csv(const std::string& path, const std::vector<std::string>& outcome_names);
void write_csv(const Dataset& d, const std::string& path);

// Per-column centering/scaling parameters, keyed by column name so they can
// be replayed on any dataset that shares those names.
struct ColumnScaling {
  std::string name;
  double mean = 0.0;
  double sd = 1.0;
};
struct ScalingParams {
  std::vector<ColumnScaling> columns;
  bool empty() const { return columns.empty(); }
  const ColumnScaling* find(const std::string& name) const;
};

// Which columns standardize() should touch.
struct ColumnSelect {
  bool predictors = true;
  bool outcomes = true;
  std::vector<std::string> names;  // when non-empty, overrides the role flags

  static ColumnSelect all() { return {}; }
  static ColumnSelect predictors_only() { return {true, false, {}}; }
  static ColumnSelect outcomes_only() { return {false, true, {}}; }
};

// Center to mean 0 / sd 1 (sample sd, n-1). Missing entries are ignored by
// the statistics and stay missing. Errors on constant columns and on columns
// with fewer than two present values.
std::pair<Dataset, ScalingParams> standardize(const Dataset& d, const ColumnSelect& which = {});
// Replays stored parameters on a dataset by column name; columns without a
// stored entry pass through untouched.
Dataset apply_scaling(const Dataset& d, const ScalingParams& p);
Dataset invert_scaling(const Dataset& d, const ScalingParams& p);

// Deterministic k-fold assignment of rows, as balanced as possible.
struct FoldPlan {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<int> assignment;  // fold id per row, in 0..k-1

  std::vector<int> fold_rows(int fold) const;
  std::vector<int> complement_rows(int fold) const;
};
FoldPlan make_folds(std::size_t n_rows, int k, std::uint64_t seed);

std::pair<Dataset, Dataset> split_train_test(const Dataset& d, double test_fraction,
                                             std::uint64_t seed);

}  // namespace mvgb
