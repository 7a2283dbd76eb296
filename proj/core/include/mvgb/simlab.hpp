#pragma once

// Simulation laboratory: sparse multivariate regression data generation with
// optional nonlinear predictor transforms, ROC/AUC scoring of selection
// statistics, and multi-replication method-comparison studies.

#include <cstdint>
#include <string>
#include <vector>

#include "mvgb/dataset.hpp"
#include "mvgb/types.hpp"

namespace mvgb {

// Seed streams: data generation per replication; a per-replication stream
// from which per-method and per-condition seeds derive; the shared
// cross-validation fold plan used by every boosting condition of a
// replication.
inline constexpr std::uint64_t kSimDataStream = 40;
inline constexpr std::uint64_t kSimRepStream = 41;
inline constexpr std::uint64_t kSimBoostCondStream = 42;
inline constexpr std::uint64_t kSimCartStream = 43;
inline constexpr std::uint64_t kSimBagStream = 44;
inline constexpr std::uint64_t kSimFoldStream = 45;

enum class Transform { identity, square, cube, exponential };

std::string transform_name(Transform t);
Transform transform_from_name(const std::string& name);  // DataError on unknown

struct ScenarioConfig {
  int n = 1000;
  int p = 50;
  int q = 5;
  int n_active = 15;
  Transform transform = Transform::identity;
  double target_r2 = 0.1;
  int n_reps = 20;
  std::uint64_t master_seed = 1;
  std::vector<std::string> methods{"mvtboost", "mvcart", "wilks"};

  // Boosting tuning grid: every shrinkage x depth pair is tuned by k-fold
  // cross-validation on a fold plan shared within the replication, and the
  // condition with the lowest CV error at its selected tree count wins
  // (ties keep grid order: shrinkage-major, then depth).
  std::vector<double> shrinkages{0.1, 0.01, 0.005};
  std::vector<int> depths{1, 3};
  int max_trees = 2000;
  double bag_fraction = 0.5;
  int cv_folds = 5;
  int min_node = 10;

  // Regression-tree comparators.
  std::vector<double> cp_grid{0.001, 0.0025, 0.005, 0.0075, 0.01, 0.015, 0.02};
  int k_prune = 10;
  int n_boot = 1000;

  double wilks_alpha = 0.05;
  int threads = 1;
};

void validate_config(const ScenarioConfig& cfg);

struct GeneratedData {
  Dataset train;
  Dataset test;                  // same X, freshly drawn errors
  std::vector<bool> active;      // per predictor
  Matrix b_pattern;              // p x q indicator of which outcomes each
                                 // active predictor feeds (two per row)
  std::vector<double> error_sd;  // per outcome, from the realized systematic
                                 // variance and the target R^2
};

// Deterministic generator for replication `rep`: X is iid standard normal
// (drawn column by column), the active rows of B and their two target
// outcomes are sampled per replication, the systematic part applies the
// transform to each active predictor before summing, and per-outcome error
// standard deviations solve var_sys * (1 - r2) / r2. Throws DataError naming
// the outcome when the target R^2 is unreachable (zero systematic variance).
GeneratedData gen_data(const ScenarioConfig& cfg, int rep);

enum class AucDirection { higher_selects, lower_selects };

// Rank-statistic AUC: the probability that a randomly chosen active
// predictor's statistic outranks an inactive one's, ties counted half.
// lower_selects inverts the ordering (for p-value-like statistics).
double roc_auc(const std::vector<double>& stat, const std::vector<bool>& truth,
               AucDirection direction);

struct StudyRow {
  int rep = 0;
  std::string method;
  double auc = 0.0;
  double mse = 0.0;
  double seconds = 0.0;   // wall time; the only nondeterministic field
  std::string error;      // empty on success; auc/mse are NaN on failure
};

struct StudyResult {
  ScenarioConfig cfg;
  std::vector<StudyRow> rows;               // n_reps x methods, rep-major
  std::vector<std::vector<bool>> truth;     // active set per replication
};

struct StudySummaryRow {
  std::string method;
  int n_ok = 0;
  double mean_auc = 0.0, se_auc = 0.0;
  double mean_mse = 0.0, se_mse = 0.0;
};

// Runs every replication x method: selection statistic -> AUC against the
// generating truth, and test-set multivariate MSE in the original data
// units. Per-method failures are recorded in the row and do not abort the
// replication. Bit-identical across runs and thread counts except for the
// seconds field.
StudyResult run_study(const ScenarioConfig& cfg);

std::vector<StudySummaryRow> summarize_study(const StudyResult& r);

// rep,method,transform,r2,auc,mse,seconds — failed entries write NA.
void write_study_csv(const StudyResult& r, const std::string& path);

}  // namespace mvgb
