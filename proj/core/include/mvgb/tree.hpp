#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "mvgb/dataset.hpp"
#include "mvgb/types.hpp"

namespace mvgb {

// Regression trees with a fixed budget of splits, grown best-first: at each
// step the admissible split with the largest SSE reduction anywhere in the
// tree is committed. `depth` counts the total number of splits in the tree,
// so depth 1 is a stump and depth 3 is a three-split tree of any shape.
//
// Split thresholds sit at midpoints between consecutive distinct predictor
// values. Rows with a missing split value are routed by surrogate splits
// (ranked by agreement with the primary split) and, failing those, by the
// majority direction of the primary split.

struct TreeParams {
  int max_splits = 1;      // total split budget
  int min_node = 10;       // minimum rows per child, counted over rows with a
                           // present value on the candidate predictor
  int n_surrogates = 3;    // surrogate splits retained per internal node
  double min_gain_rel = 0.0;  // admit a split only if its SSE reduction is at
                              // least this fraction of the root SSE; 0 means
                              // any strictly positive reduction qualifies
};

struct Surrogate {
  int predictor = -1;
  double threshold = 0.0;
  bool same_direction = true;  // agrees with primary left/right orientation
  double agreement = 0.0;      // fraction agreeing among rows present on both
};

struct TreeNode {
  int left = -1;   // child node ids; -1 on leaves
  int right = -1;
  int predictor = -1;        // split predictor (index into predictor list)
  double threshold = 0.0;    // x <= threshold goes left
  bool majority_left = true; // fallback direction for unresolvable missing
  std::vector<Surrogate> surrogates;
  double gain = 0.0;         // realized SSE reduction of this split over all
                             // routed training rows
  double sse = 0.0;          // SSE of training rows at this node (all targets)
  int n_rows = 0;            // training rows routed through this node
  std::vector<double> value; // per-target mean of training rows at this node

  bool is_leaf() const { return left < 0; }
};

struct Tree {
  int n_targets = 1;
  std::vector<TreeNode> nodes;  // nodes[0] is the root; children follow parents

  bool is_stump() const { return nodes.size() == 1; }
  int n_leaves() const;
  int n_splits() const { return static_cast<int>(nodes.size()) / 2; }
};

// Rows of each predictor column sorted ascending by value (ties by row id),
// missing entries excluded. Built once per dataset and shared across fits.
struct PredictorOrder {
  std::vector<std::vector<std::int32_t>> order;  // one array per predictor
  bool any_missing = false;
};
PredictorOrder build_predictor_order(const Dataset& d);

// Target columns for fitting, indexed by dataset row id.
using TargetView = std::vector<const double*>;

// The fitting row set of one tree: the rows themselves plus, per predictor,
// the subset with a present value in ascending value order. Building this is
// the per-tree setup cost; when several trees share a row set (the candidate
// trees of one boosting step), build it once and fit with it repeatedly.
struct RootView {
  std::vector<std::int32_t> rows;
  std::vector<std::vector<std::int32_t>> ord;
};
RootView build_root_view(const Dataset& d, std::span<const int> rows,
                         const PredictorOrder* order = nullptr);

Tree fit_tree_with_view(const Dataset& d, const RootView& view,
                        const TargetView& targets, const TreeParams& params);

// Fits a tree to explicit target arrays over the given rows (which must be
// distinct). `order` may be null, in which case it is built on the fly.
Tree fit_tree_to_targets(const Dataset& d, std::span<const int> rows,
                         const TargetView& targets, const TreeParams& params,
                         const PredictorOrder* order = nullptr);

// Fits to all outcome columns jointly (multivariate SSE criterion).
Tree fit_tree(const Dataset& d, std::span<const int> rows, const TreeParams& params);
// Fits to a single outcome column.
Tree fit_tree(const Dataset& d, std::span<const int> rows, int outcome,
              const TreeParams& params);

// Routes a row of `d` to a leaf. `predictor_cols` maps tree predictor
// indices to column ids of `d`; pass null when `d` is the training dataset.
const TreeNode& route_row(const Tree& t, const Dataset& d, int row,
                          const std::vector<int>* predictor_cols = nullptr);

// Leaf values for each requested row; n x n_targets.
Matrix predict_tree(const Tree& t, const Dataset& d,
                    std::span<const int> rows = {},
                    const std::vector<int>* predictor_cols = nullptr);

// Single-target fast path: writes leaf values for every row of `d` into out.
void predict_tree_into(const Tree& t, const Dataset& d, double* out);

// Sum of realized split gains per predictor index.
std::map<int, double> tree_influence(const Tree& t);

}  // namespace mvgb
