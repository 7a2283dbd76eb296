#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvgb/boosting.hpp"
#include "mvgb/dataset.hpp"
#include "mvgb/types.hpp"

namespace mvgb {

// Tree-count selection by k-fold cross-validation: fit on each fold
// complement, record the held-out multivariate MSE at every tree count, pick
// the count minimizing the mean curve, then refit on all rows.

// (1/(nQ)) * sum of squared elementwise differences.
double mv_mse(const Matrix& y, const Matrix& yhat);

enum class ScalingMode {
  fold_honest,  // per-fold: standardize on the training folds, replay on the
                // held-out fold; final refit standardizes on all rows
  global,       // standardize once on all rows before any splitting
  none,
};

struct CvResult {
  std::vector<double> cv_curve;  // mean held-out MSE at tree counts 1..M
  int best_m = 0;                // argmin of cv_curve; ties go to the smallest
  int k = 0;
  Matrix per_fold_curves;        // k x M
};

struct CvSelection {
  CvResult cv;
  MvModel model;          // refit on all rows at best_m
  ScalingParams scaling;  // scaling applied for the final fit; empty for none
};

CvSelection cv_select_trees(const Dataset& d, const BoostParams& params, int k,
                            std::uint64_t seed,
                            ScalingMode scaling = ScalingMode::fold_honest,
                            const FoldPlan* folds = nullptr, int threads = 1);

// CSV with header: tree_count, fold_1..fold_k, mean.
void write_cv_csv(const CvResult& r, const std::string& path);

}  // namespace mvgb
