#pragma once

// Comparator methods: a per-predictor multivariate regression screen based on
// Wilks' lambda, a multivariate regression tree with cost-complexity pruning
// selected by cross-validation, and a bagged ensemble of such trees.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mvgb/dataset.hpp"
#include "mvgb/tree.hpp"
#include "mvgb/types.hpp"

namespace mvgb {

// Seed streams for fold assignment inside tree pruning and for bootstrap
// resampling, so every random draw is replayable from the caller's seed.
inline constexpr std::uint64_t kCartFoldStream = 30;
inline constexpr std::uint64_t kCartBootStream = 31;

// ---------------------------------------------------------------------------
// Wilks' lambda screen
// ---------------------------------------------------------------------------

struct WilksResult {
  std::vector<std::string> predictor_names;
  std::vector<double> lambda;   // in (0, 1]; 1 = no association
  std::vector<double> F;        // exact single-predictor F statistic
  std::vector<double> p_value;  // on (Q, n_used - Q - 1) degrees of freedom
  std::vector<int> n_used;      // rows retained per test (missing dropped)
};

// Tests each predictor singly against all outcomes: lambda is the ratio of
// the error to the total outcome SSCP determinant from the one-predictor
// multivariate regression. Rows with a missing value in the tested predictor
// are dropped for that test only. A constant predictor scores lambda = 1,
// F = 0, p = 1. Outcomes must be complete.
WilksResult wilks_screen(const Dataset& d);

void write_wilks_csv(const WilksResult& w, const std::string& path);

// ---------------------------------------------------------------------------
// Multivariate regression tree with pruning
// ---------------------------------------------------------------------------

struct MvCartParams {
  // A split is admissible only when it reduces the tree's SSE by at least
  // this fraction of the root SSE.
  double cp = 0.01;
  int k_prune = 10;      // folds for pruning cross-validation
  int min_node = 10;
  int n_surrogates = 3;  // pass 0 on complete data to skip the search
  std::uint64_t seed = 0;
};

struct MvCartResult {
  Tree tree;                        // pruned tree
  std::map<int, double> influence;  // predictor -> SSE reduction retained
  // Candidate complexity thresholds evaluated by cross-validation: 0 keeps
  // the full tree, then the geometric means of consecutive critical values,
  // ending at the value that collapses the tree furthest.
  std::vector<double> alphas;
  std::vector<double> cv_curve;     // CV risk per candidate, per (n * Q)
  int selected = 0;                 // index into alphas/cv_curve
  double cv_error = 0.0;            // cv_curve[selected]
};

// Grows to exhaustion under the cp gate, computes the nested cost-complexity
// subtree sequence, evaluates its representative thresholds by k-fold
// cross-validation (fold plans derived from seed on kCartFoldStream), and
// returns the subtree at the risk-minimizing threshold; exact risk ties keep
// the larger threshold (the smaller tree).
MvCartResult fit_mvcart(const Dataset& d, const MvCartParams& params);

// The optimal pruned subtree of t at complexity penalty beta: keep a split
// only when the penalized subtree risk beats collapsing the node to a leaf;
// exact ties collapse. Exposed for replay tests.
Tree prune_tree(const Tree& t, double beta);

// ---------------------------------------------------------------------------
// Bagged multivariate regression trees
// ---------------------------------------------------------------------------

struct BaggedCart {
  std::vector<Tree> trees;          // one pruned tree per bootstrap resample
  std::map<int, double> influence;  // mean per-tree influence (absent = 0)
  MvCartParams params;
};

// Fits fit_mvcart to n_boot with-replacement bootstrap resamples (rows drawn
// on kCartBootStream, one substream per tree) and averages influence.
BaggedCart bag_mvcart(const Dataset& d, int n_boot, const MvCartParams& params,
                      int threads = 1);

// Per-outcome mean of the member trees' leaf predictions.
Matrix predict_bagged(const BaggedCart& b, const Dataset& d);

}  // namespace mvgb
