#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mvgb/dataset.hpp"
#include "mvgb/tree.hpp"
#include "mvgb/types.hpp"

namespace mvgb {

// Stochastic gradient boosting under squared-error loss. The univariate form
// fits one depth-constrained tree per step to the current residuals on a
// fresh without-replacement subsample, then shrinks the update by the step
// size. The multivariate form fits one candidate tree per outcome at each
// step (all candidates sharing the step's subsample), scores each candidate
// by how much its hypothetical update would change the residual covariance
// matrix, and commits only the candidate with the largest change. The
// per-step covariance changes are recorded in full, which is what later lets
// the explained covariance be decomposed by predictor.

struct BoostParams {
  int n_trees = 100;         // M
  double shrinkage = 0.01;   // v, in (0, 1]
  int depth = 1;             // splits per tree
  double bag_fraction = 0.5; // fraction of rows subsampled per step, (0, 1]
  int min_node = 10;
  std::uint64_t seed = 0;
};
void validate_params(const BoostParams& p);

struct StepRecord {
  int step = 0;               // 1-based step number m
  int outcome = -1;           // selected outcome q* (model outcome index)
  int selected_predictor = -1;  // argmax of the step tree's influence; -1 if
                                // the tree is a stump with no splits
  double discrepancy = 0.0;   // D: sum of squared elements of raw_discrepancy
  Matrix raw_discrepancy;     // Q x Q, covariance before minus covariance after
  Tree tree;
};

struct MvModel {
  BoostParams params;
  std::vector<std::string> predictor_names;
  std::vector<std::string> outcome_names;
  std::vector<double> initial_means;   // per-outcome training mean
  Matrix initial_covariance;           // sample covariance of the outcomes
  Matrix final_covariance;             // residual covariance after the last step
  std::vector<double> training_mse;    // multivariate training MSE after each step
  std::vector<StepRecord> steps;

  // Fitting-time state kept for verification; not serialized.
  Matrix final_residuals;                 // n x Q
  std::map<int, Matrix> residual_snapshots;  // step m -> n x Q residuals

  int n_outcomes() const { return static_cast<int>(outcome_names.size()); }
  int n_predictors() const { return static_cast<int>(predictor_names.size()); }
  int n_steps() const { return static_cast<int>(steps.size()); }
};

// Residual snapshots are stored for the steps listed in snapshot_steps
// (1-based); pass the steps you intend to verify against predictions.
MvModel boost_univariate(const Dataset& d, int outcome, const BoostParams& p,
                         std::span<const int> snapshot_steps = {});
MvModel boost_multivariate(const Dataset& d, const BoostParams& p,
                           std::span<const int> snapshot_steps = {});

// initial_means plus the shrunken updates of the first n_trees steps, each
// added into its selected outcome's column. Predictors are matched to columns
// of `d` by name; missing predictor values are allowed.
Matrix predict_ensemble(const MvModel& m, const Dataset& d, int n_trees);

// Sum of squared elementwise differences, counting the diagonal once and each
// off-diagonal entry twice (both copies of the symmetric matrix).
double cov_discrepancy(const Matrix& prev, const Matrix& next);

// Column means and sample covariance (n-1 denominator, two-pass centering).
// This exact formulation is used everywhere a residual covariance appears, so
// recorded matrices replay bit-identically.
void mean_and_covariance(const std::vector<std::vector<double>>& cols,
                         std::vector<double>& mean_out, Matrix& cov_out);

}  // namespace mvgb
