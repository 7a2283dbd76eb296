#pragma once

// Post-fit interpretation: influence tables, permutation importance, the
// covariance-explained decomposition with hierarchical clustering, partial
// dependence grids, and a non-additivity scan over predictor pairs.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mvgb/boosting.hpp"
#include "mvgb/dataset.hpp"
#include "mvgb/rng.hpp"
#include "mvgb/types.hpp"

namespace mvgb {

// ---------------------------------------------------------------------------
// Influence
// ---------------------------------------------------------------------------

// Per-predictor error reductions accumulated over the ensemble.
struct InfluenceTable {
  // raw(j, q): summed SSE reduction from splits on predictor j in trees
  // committed to outcome q. Nonnegative.
  Matrix raw;
  // relative(j, q): raw scaled so each outcome column sums to 100 (columns
  // with zero raw total stay all-zero).
  Matrix relative;
  // global[j] = sum over outcomes of raw(j, q).
  std::vector<double> global;
  std::vector<std::string> predictor_names;
  std::vector<std::string> outcome_names;
};

InfluenceTable relative_influence(const MvModel& model);

// ---------------------------------------------------------------------------
// Permutation importance
// ---------------------------------------------------------------------------

// Seed stream used to derive one RNG per (predictor, permutation) pair; the
// substream index is predictor * n_perm + permutation, which makes results
// independent of evaluation order and thread count.
inline constexpr std::uint64_t kPermStream = 20;

// Test hook: produces a permutation of {0..n-1} from the supplied RNG. The
// default draws rng.permutation(n).
using PermProvider = std::function<std::vector<int>(Rng&, int)>;

// Mean per-outcome MSE increase (p x Q) after permuting each predictor column
// n_perm times on the evaluation rows in d. Negative averages are reported
// as-is. Predictors never referenced by any tree score exactly zero.
Matrix permutation_importance(const MvModel& model, const Dataset& d,
                              int n_perm = 10, std::uint64_t seed = 0,
                              int threads = 1,
                              const PermProvider& provider = nullptr);

// ---------------------------------------------------------------------------
// Covariance explained
// ---------------------------------------------------------------------------

// Q(Q+1)/2 x p table: the covariance discrepancy of every committed step is
// attributed to the step tree's most influential predictor, then summed per
// predictor. Rows cover the upper triangle including the diagonal, labeled
// "ya:yb"; column sums reproduce the total covariance reduction exactly.
struct CovExMatrix {
  std::vector<std::string> row_labels;  // "y_a:y_b" with a <= b
  std::vector<std::string> col_labels;  // predictor names
  std::vector<std::pair<int, int>> row_pairs;
  Matrix values;                        // rows x predictors
};

CovExMatrix covex_matrix(const MvModel& model);

// ---------------------------------------------------------------------------
// Hierarchical clustering
// ---------------------------------------------------------------------------

enum class Metric { euclidean, manhattan };
enum class Linkage { average, complete };

struct Merge {
  int a = -1;       // cluster ids: leaves are 0..n-1, merge m creates id n+m
  int b = -1;
  double height = 0.0;
  int size = 0;     // leaves in the merged cluster
};

struct Dendrogram {
  std::vector<Merge> merges;  // n-1 merges in order of execution
  std::vector<int> order;     // leaf ordering obtained by reading the tree
};

// Agglomerative clustering of the ROWS of m. Pair selection is by smallest
// distance; exact ties resolve to the lexicographically smallest (a, b) id
// pair. Throws DataError when fewer than two rows.
Dendrogram hierarchical_cluster(const Matrix& m, Metric metric,
                                Linkage linkage);

enum class ClusterAxis { rows, cols, both };

struct CovExClustering {
  bool has_rows = false;
  bool has_cols = false;
  Dendrogram rows;
  Dendrogram cols;
};

CovExClustering cluster_covex(const CovExMatrix& c, Metric metric,
                              Linkage linkage, ClusterAxis axis);

// ---------------------------------------------------------------------------
// Partial dependence
// ---------------------------------------------------------------------------

struct PdpResult {
  std::vector<int> predictors;       // 1 or 2 model-side predictor indices
  std::vector<std::string> names;
  int outcome = 0;
  std::vector<double> grid1;
  std::vector<double> grid2;         // empty for one predictor
  // values(i, j) for grid1[i] x grid2[j]; single-predictor grids use j = 0.
  Matrix values;
};

// Grid of model predictions for outcome q with the named predictor(s)
// overwritten by grid values and every other predictor averaged over the
// rows of d (all rows by default; a non-empty row list restricts the
// average). Grids span the observed per-predictor range with grid_size
// evenly spaced points. Matches direct row-averaged prediction exactly.
PdpResult partial_dependence(const MvModel& model,
                             const std::vector<int>& predictors, int outcome,
                             int grid_size, const Dataset& d,
                             const std::vector<int>& rows = {});

// ---------------------------------------------------------------------------
// Non-additivity scan
// ---------------------------------------------------------------------------

struct NonlinEntry {
  int a = 0;
  int b = 0;
  double score = 0.0;  // 1 - R^2 of the planar fit to the pair's PDP grid
};

// Scores each candidate predictor pair by how far the two-predictor partial
// dependence surface departs from a plane: ordinary least squares of grid
// values on {1, x_a, x_b}, score = RSS / TSS in [0, 1]. A constant surface
// scores 0. top_k = 0 scans all pairs; otherwise only pairs among the top_k
// predictors by global influence. Sorted by descending score, ties broken by
// ascending pair indices.
std::vector<NonlinEntry> nonlin_scan(const MvModel& model, const Dataset& d,
                                     int outcome, int top_k = 0,
                                     int grid_size = 100, int threads = 1);

// ---------------------------------------------------------------------------
// CSV export
// ---------------------------------------------------------------------------

// predictor,<outcomes...>,global — relative (percent) influence; the global
// column is the percent share of total raw influence.
void write_influence_csv(const InfluenceTable& t, const std::string& path);
// pair,<predictors...>
void write_covex_csv(const CovExMatrix& c, const std::string& path);
// predictor,<outcomes...> — mean MSE increase per permutation.
void write_importance_csv(const Matrix& imp,
                          const std::vector<std::string>& predictor_names,
                          const std::vector<std::string>& outcome_names,
                          const std::string& path);
// <x1>[,<x2>],value — row-major over the grid.
void write_pdp_csv(const PdpResult& p, const std::string& path);
// predictor_1,predictor_2,score
void write_nonlin_csv(const std::vector<NonlinEntry>& entries,
                      const std::vector<std::string>& predictor_names,
                      const std::string& path);

}  // namespace mvgb
