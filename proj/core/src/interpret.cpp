#include "mvgb/interpret.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include "mvgb/csv.hpp"
#include "mvgb/parallel.hpp"
#include "mvgb/rng.hpp"
#include "mvgb/tree.hpp"

namespace mvgb {

namespace {

// Map model-side predictor indices to columns of d by name; -1 when absent.
// Referencing an absent predictor during routing is a data error, matching
// ensemble prediction.
std::vector<int> map_predictors(const MvModel& model, const Dataset& d) {
  std::vector<int> cols(model.predictor_names.size());
  for (std::size_t j = 0; j < model.predictor_names.size(); ++j)
    cols[j] = d.find(model.predictor_names[j]);
  return cols;
}

std::vector<int> map_predictors_checked(const MvModel& model, const Dataset& d) {
  std::vector<int> cols = map_predictors(model, d);
  for (std::size_t j = 0; j < cols.size(); ++j) {
    bool used = false;
    for (const StepRecord& s : model.steps) {
      for (const TreeNode& nd : s.tree.nodes) {
        if (nd.is_leaf()) continue;
        if (nd.predictor == static_cast<int>(j)) used = true;
        for (const Surrogate& sur : nd.surrogates)
          if (sur.predictor == static_cast<int>(j)) used = true;
      }
      if (used) break;
    }
    if (used && cols[j] < 0)
      throw DataError("prediction data lacks predictor column '" +
                      model.predictor_names[j] + "'");
  }
  return cols;
}

// Outcome columns of d matching the model, required complete.
std::vector<int> map_outcomes(const MvModel& model, const Dataset& d) {
  std::vector<int> cols(model.outcome_names.size());
  for (std::size_t q = 0; q < model.outcome_names.size(); ++q) {
    const int c = d.find(model.outcome_names[q]);
    if (c < 0)
      throw DataError("evaluation data lacks outcome column '" +
                      model.outcome_names[q] + "'");
    for (double v : d.col(static_cast<std::size_t>(c)).values)
      if (is_missing(v))
        throw DataError("outcome column '" + model.outcome_names[q] +
                        "' has missing values");
    cols[q] = c;
  }
  return cols;
}

}  // namespace

// ---------------------------------------------------------------------------
// Influence
// ---------------------------------------------------------------------------

InfluenceTable relative_influence(const MvModel& model) {
  const std::size_t p = static_cast<std::size_t>(model.n_predictors());
  const std::size_t q = static_cast<std::size_t>(model.n_outcomes());
  InfluenceTable t;
  t.predictor_names = model.predictor_names;
  t.outcome_names = model.outcome_names;
  t.raw = Matrix(p, q);
  t.relative = Matrix(p, q);
  t.global.assign(p, 0.0);
  for (const StepRecord& s : model.steps) {
    const std::map<int, double> inf = tree_influence(s.tree);
    for (const auto& [pred, reduction] : inf)
      t.raw(static_cast<std::size_t>(pred), static_cast<std::size_t>(s.outcome)) +=
          reduction;
  }
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t c = 0; c < q; ++c) t.global[j] += t.raw(j, c);
  for (std::size_t c = 0; c < q; ++c) {
    double sum = 0.0;
    for (std::size_t j = 0; j < p; ++j) sum += t.raw(j, c);
    if (sum > 0.0)
      for (std::size_t j = 0; j < p; ++j)
        t.relative(j, c) = 100.0 * t.raw(j, c) / sum;
  }
  return t;
}

// ---------------------------------------------------------------------------
// Permutation importance
// ---------------------------------------------------------------------------

Matrix permutation_importance(const MvModel& model, const Dataset& d,
                              int n_perm, std::uint64_t seed, int threads,
                              const PermProvider& provider) {
  if (n_perm < 1) throw DataError("permutation importance: n_perm must be >= 1");
  const std::size_t p = static_cast<std::size_t>(model.n_predictors());
  const std::size_t nq = static_cast<std::size_t>(model.n_outcomes());
  const std::size_t n = d.n_rows();
  if (n == 0) throw DataError("permutation importance: empty dataset");

  const std::vector<int> out_cols = map_outcomes(model, d);
  std::vector<bool> used(p, false);
  for (const StepRecord& s : model.steps)
    for (const TreeNode& nd : s.tree.nodes) {
      if (nd.is_leaf()) continue;
      used[static_cast<std::size_t>(nd.predictor)] = true;
      for (const Surrogate& sur : nd.surrogates)
        used[static_cast<std::size_t>(sur.predictor)] = true;
    }

  const Matrix base = predict_ensemble(model, d, model.n_steps());
  std::vector<double> base_mse(nq, 0.0);
  for (std::size_t q = 0; q < nq; ++q) {
    const auto& y = d.col(static_cast<std::size_t>(out_cols[q])).values;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = y[i] - base(i, q);
      s += e * e;
    }
    base_mse[q] = s / static_cast<double>(n);
  }

  Matrix imp(p, nq);
  parallel_for(p, threads, [&](std::size_t j) {
    if (!used[j]) return;  // routing cannot touch the column: increase is 0
    const int col = d.find(model.predictor_names[j]);
    if (col < 0)
      throw DataError("evaluation data lacks predictor column '" +
                      model.predictor_names[j] + "'");
    std::vector<double> acc(nq, 0.0);
    for (int r = 0; r < n_perm; ++r) {
      Rng rng(derive_seed(seed, kPermStream,
                          static_cast<std::uint64_t>(j) *
                                  static_cast<std::uint64_t>(n_perm) +
                              static_cast<std::uint64_t>(r)));
      const std::vector<int> perm =
          provider ? provider(rng, static_cast<int>(n))
                   : rng.permutation(static_cast<int>(n));
      if (perm.size() != n)
        throw DataError("permutation provider returned wrong length");
      std::vector<Column> cols;
      cols.reserve(d.n_cols());
      for (std::size_t c = 0; c < d.n_cols(); ++c) cols.push_back(d.col(c));
      const std::vector<double>& orig =
          d.col(static_cast<std::size_t>(col)).values;
      std::vector<double>& dst = cols[static_cast<std::size_t>(col)].values;
      for (std::size_t i = 0; i < n; ++i)
        dst[i] = orig[static_cast<std::size_t>(perm[i])];
      const Dataset pd = Dataset::from_columns(std::move(cols));
      const Matrix pred = predict_ensemble(model, pd, model.n_steps());
      for (std::size_t q = 0; q < nq; ++q) {
        const auto& y = d.col(static_cast<std::size_t>(out_cols[q])).values;
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double e = y[i] - pred(i, q);
          s += e * e;
        }
        acc[q] += s / static_cast<double>(n) - base_mse[q];
      }
    }
    for (std::size_t q = 0; q < nq; ++q)
      imp(j, q) = acc[q] / static_cast<double>(n_perm);
  });
  return imp;
}

// ---------------------------------------------------------------------------
// Covariance explained
// ---------------------------------------------------------------------------

CovExMatrix covex_matrix(const MvModel& model) {
  const int q = model.n_outcomes();
  const int p = model.n_predictors();
  CovExMatrix c;
  c.col_labels = model.predictor_names;
  for (int a = 0; a < q; ++a)
    for (int b = a; b < q; ++b) {
      c.row_pairs.emplace_back(a, b);
      c.row_labels.push_back(model.outcome_names[static_cast<std::size_t>(a)] +
                             ":" +
                             model.outcome_names[static_cast<std::size_t>(b)]);
    }
  c.values = Matrix(c.row_pairs.size(), static_cast<std::size_t>(p));
  for (const StepRecord& s : model.steps) {
    if (s.selected_predictor < 0) continue;  // stump step: nothing attributable
    const std::size_t j = static_cast<std::size_t>(s.selected_predictor);
    for (std::size_t r = 0; r < c.row_pairs.size(); ++r) {
      const auto [a, b] = c.row_pairs[r];
      c.values(r, j) += s.raw_discrepancy(static_cast<std::size_t>(a),
                                          static_cast<std::size_t>(b));
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Hierarchical clustering
// ---------------------------------------------------------------------------

namespace {

double row_distance(const Matrix& m, std::size_t a, std::size_t b,
                    Metric metric) {
  double acc = 0.0;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    const double diff = m(a, c) - m(b, c);
    acc += metric == Metric::euclidean ? diff * diff : std::abs(diff);
  }
  return metric == Metric::euclidean ? std::sqrt(acc) : acc;
}

void expand_order(const Dendrogram& dg, int id, int n_leaves,
                  std::vector<int>& out) {
  if (id < n_leaves) {
    out.push_back(id);
    return;
  }
  const Merge& m = dg.merges[static_cast<std::size_t>(id - n_leaves)];
  expand_order(dg, m.a, n_leaves, out);
  expand_order(dg, m.b, n_leaves, out);
}

}  // namespace

Dendrogram hierarchical_cluster(const Matrix& m, Metric metric,
                                Linkage linkage) {
  const int n = static_cast<int>(m.rows());
  if (n < 2) throw DataError("clustering needs at least two items");
  const int total = 2 * n - 1;
  // Distance table over all cluster ids that will ever exist.
  std::vector<std::vector<double>> dist(
      static_cast<std::size_t>(total),
      std::vector<double>(static_cast<std::size_t>(total), 0.0));
  std::vector<int> size(static_cast<std::size_t>(total), 1);
  std::vector<bool> active(static_cast<std::size_t>(total), false);
  for (int i = 0; i < n; ++i) active[static_cast<std::size_t>(i)] = true;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = row_distance(m, static_cast<std::size_t>(i),
                                    static_cast<std::size_t>(j), metric);
      dist[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = v;
      dist[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = v;
    }

  Dendrogram dg;
  int next_id = n;
  for (int step = 0; step < n - 1; ++step) {
    int best_a = -1, best_b = -1;
    double best_d = std::numeric_limits<double>::infinity();
    // Strict < keeps the lexicographically smallest (a, b) pair on ties.
    for (int a = 0; a < next_id; ++a) {
      if (!active[static_cast<std::size_t>(a)]) continue;
      for (int b = a + 1; b < next_id; ++b) {
        if (!active[static_cast<std::size_t>(b)]) continue;
        const double v = dist[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
        if (v < best_d) {
          best_d = v;
          best_a = a;
          best_b = b;
        }
      }
    }
    const int c = next_id++;
    size[static_cast<std::size_t>(c)] = size[static_cast<std::size_t>(best_a)] +
                                        size[static_cast<std::size_t>(best_b)];
    for (int k = 0; k < c; ++k) {
      if (!active[static_cast<std::size_t>(k)] || k == best_a || k == best_b)
        continue;
      const double da = dist[static_cast<std::size_t>(k)][static_cast<std::size_t>(best_a)];
      const double db = dist[static_cast<std::size_t>(k)][static_cast<std::size_t>(best_b)];
      double v;
      if (linkage == Linkage::complete) {
        v = std::max(da, db);
      } else {
        const double na = static_cast<double>(size[static_cast<std::size_t>(best_a)]);
        const double nb = static_cast<double>(size[static_cast<std::size_t>(best_b)]);
        v = (na * da + nb * db) / (na + nb);
      }
      dist[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)] = v;
      dist[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)] = v;
    }
    active[static_cast<std::size_t>(best_a)] = false;
    active[static_cast<std::size_t>(best_b)] = false;
    active[static_cast<std::size_t>(c)] = true;
    dg.merges.push_back(
        Merge{best_a, best_b, best_d, size[static_cast<std::size_t>(c)]});
  }
  expand_order(dg, total - 1, n, dg.order);
  return dg;
}

CovExClustering cluster_covex(const CovExMatrix& c, Metric metric,
                              Linkage linkage, ClusterAxis axis) {
  CovExClustering out;
  if (axis == ClusterAxis::rows || axis == ClusterAxis::both) {
    out.rows = hierarchical_cluster(c.values, metric, linkage);
    out.has_rows = true;
  }
  if (axis == ClusterAxis::cols || axis == ClusterAxis::both) {
    Matrix t(c.values.cols(), c.values.rows());
    for (std::size_t i = 0; i < c.values.rows(); ++i)
      for (std::size_t j = 0; j < c.values.cols(); ++j) t(j, i) = c.values(i, j);
    out.cols = hierarchical_cluster(t, metric, linkage);
    out.has_cols = true;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Partial dependence
// ---------------------------------------------------------------------------

namespace {

// Accumulates one tree's leaf contributions over every (grid1 x grid2) cell
// for a single data row. Splits on the overridden predictors partition the
// grid; all other splits follow the row's own values through the exact
// routing rules (primary, then first present surrogate, then majority).
class GridWalker {
 public:
  GridWalker(const Tree& tree, const Dataset& d, const std::vector<int>& pred_cols,
             int axis_pred1, int axis_pred2, const std::vector<double>& grid1,
             const std::vector<double>& grid2, double scale, Matrix& diff)
      : tree_(tree),
        d_(d),
        pred_cols_(pred_cols),
        axis_pred_{axis_pred1, axis_pred2},
        grid_{&grid1, &grid2},
        scale_(scale),
        diff_(diff) {}

  void run(int row) {
    row_ = row;
    walk(0, 0, static_cast<int>(grid_[0]->size()), 0,
         std::max<int>(1, static_cast<int>(grid_[1]->size())));
  }

 private:
  double value_of(int pred) const {
    // Referenced predictors were existence-checked before walking.
    const int col = pred_cols_[static_cast<std::size_t>(pred)];
    return d_.col(static_cast<std::size_t>(col))
        .values[static_cast<std::size_t>(row_)];
  }

  int axis_of(int pred) const {
    if (pred == axis_pred_[0]) return 0;
    if (pred == axis_pred_[1]) return 1;
    return -1;
  }

  // Decide the route at a split node. Returns 0 = left, 1 = right, or 2 when
  // the decision depends on a grid axis; then *axis, *thr and *le_left
  // describe the dependence (grid value <= thr goes left when le_left).
  int resolve(const TreeNode& nd, int* axis, double* thr, bool* le_left) const {
    int a = axis_of(nd.predictor);
    if (a >= 0) {
      *axis = a;
      *thr = nd.threshold;
      *le_left = true;
      return 2;
    }
    const double x = value_of(nd.predictor);
    if (!is_missing(x)) return x <= nd.threshold ? 0 : 1;
    for (const Surrogate& s : nd.surrogates) {
      a = axis_of(s.predictor);
      if (a >= 0) {
        // The overridden value is always present, so this surrogate decides.
        *axis = a;
        *thr = s.threshold;
        *le_left = s.same_direction;
        return 2;
      }
      const double v = value_of(s.predictor);
      if (is_missing(v)) continue;
      const bool sl = v <= s.threshold;
      return (s.same_direction ? sl : !sl) ? 0 : 1;
    }
    return nd.majority_left ? 0 : 1;
  }

  void walk(int node_id, int lo1, int hi1, int lo2, int hi2) {
    const TreeNode& nd = tree_.nodes[static_cast<std::size_t>(node_id)];
    if (nd.is_leaf()) {
      const double v = scale_ * nd.value[0];
      // 2-D range add via the difference array.
      diff_(static_cast<std::size_t>(lo1), static_cast<std::size_t>(lo2)) += v;
      diff_(static_cast<std::size_t>(lo1), static_cast<std::size_t>(hi2)) -= v;
      diff_(static_cast<std::size_t>(hi1), static_cast<std::size_t>(lo2)) -= v;
      diff_(static_cast<std::size_t>(hi1), static_cast<std::size_t>(hi2)) += v;
      return;
    }
    int axis = 0;
    double thr = 0.0;
    bool le_left = true;
    const int route = resolve(nd, &axis, &thr, &le_left);
    if (route == 0) {
      walk(nd.left, lo1, hi1, lo2, hi2);
      return;
    }
    if (route == 1) {
      walk(nd.right, lo1, hi1, lo2, hi2);
      return;
    }
    const std::vector<double>& g = *grid_[axis];
    const int lo = axis == 0 ? lo1 : lo2;
    const int hi = axis == 0 ? hi1 : hi2;
    const int mid = static_cast<int>(
        std::upper_bound(g.begin() + lo, g.begin() + hi, thr) - g.begin());
    const int le_node = le_left ? nd.left : nd.right;
    const int gt_node = le_left ? nd.right : nd.left;
    if (mid > lo) {
      if (axis == 0)
        walk(le_node, lo, mid, lo2, hi2);
      else
        walk(le_node, lo1, hi1, lo, mid);
    }
    if (mid < hi) {
      if (axis == 0)
        walk(gt_node, mid, hi, lo2, hi2);
      else
        walk(gt_node, lo1, hi1, mid, hi);
    }
  }

  const Tree& tree_;
  const Dataset& d_;
  const std::vector<int>& pred_cols_;
  int axis_pred_[2];
  const std::vector<double>* grid_[2];
  double scale_;
  Matrix& diff_;
  int row_ = 0;
};

std::vector<double> make_grid(const Dataset& d, int col,
                              const std::vector<int>& rows, int grid_size) {
  const auto& vals = d.col(static_cast<std::size_t>(col)).values;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (int r : rows) {
    const double v = vals[static_cast<std::size_t>(r)];
    if (is_missing(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(lo <= hi))
    throw DataError("partial dependence: predictor column '" +
                    d.col(static_cast<std::size_t>(col)).name +
                    "' has no present values");
  std::vector<double> g(static_cast<std::size_t>(grid_size));
  for (int i = 0; i < grid_size; ++i)
    g[static_cast<std::size_t>(i)] =
        lo + (hi - lo) * static_cast<double>(i) /
                 static_cast<double>(grid_size - 1);
  return g;
}

}  // namespace

PdpResult partial_dependence(const MvModel& model,
                             const std::vector<int>& predictors, int outcome,
                             int grid_size, const Dataset& d,
                             const std::vector<int>& rows) {
  if (predictors.empty() || predictors.size() > 2)
    throw DataError("partial dependence: choose one or two predictors");
  if (predictors.size() == 2 && predictors[0] == predictors[1])
    throw DataError("partial dependence: duplicate predictor");
  for (int j : predictors)
    if (j < 0 || j >= model.n_predictors())
      throw DataError("partial dependence: predictor index out of range");
  if (outcome < 0 || outcome >= model.n_outcomes())
    throw DataError("partial dependence: outcome index out of range");
  if (grid_size < 2) throw DataError("partial dependence: grid_size must be >= 2");

  const std::vector<int> pred_cols = map_predictors_checked(model, d);
  std::vector<int> use_rows = rows;
  if (use_rows.empty()) {
    use_rows.resize(d.n_rows());
    for (std::size_t i = 0; i < d.n_rows(); ++i) use_rows[i] = static_cast<int>(i);
  } else {
    for (int r : use_rows)
      if (r < 0 || r >= static_cast<int>(d.n_rows()))
        throw DataError("partial dependence: row index out of range");
  }

  PdpResult out;
  out.predictors = predictors;
  out.outcome = outcome;
  for (int j : predictors)
    out.names.push_back(model.predictor_names[static_cast<std::size_t>(j)]);
  const int c1 = d.find(out.names[0]);
  if (c1 < 0)
    throw DataError("prediction data lacks predictor column '" + out.names[0] + "'");
  out.grid1 = make_grid(d, c1, use_rows, grid_size);
  if (predictors.size() == 2) {
    const int c2 = d.find(out.names[1]);
    if (c2 < 0)
      throw DataError("prediction data lacks predictor column '" + out.names[1] + "'");
    out.grid2 = make_grid(d, c2, use_rows, grid_size);
  }

  const std::size_t g1 = out.grid1.size();
  const std::size_t g2 = out.grid2.empty() ? 1 : out.grid2.size();
  Matrix diff(g1 + 1, g2 + 1);
  static const std::vector<double> kNoGrid;
  const int axis2 = predictors.size() == 2 ? predictors[1] : -1;
  for (const StepRecord& s : model.steps) {
    if (s.outcome != outcome) continue;
    GridWalker walker(s.tree, d, pred_cols, predictors[0], axis2, out.grid1,
                      out.grid2.empty() ? kNoGrid : out.grid2,
                      model.params.shrinkage, diff);
    for (int r : use_rows) walker.run(r);
  }

  out.values = Matrix(g1, g2);
  const double n = static_cast<double>(use_rows.size());
  const double base = model.initial_means[static_cast<std::size_t>(outcome)];
  // Two-dimensional prefix sum over the difference array.
  for (std::size_t i = 0; i < g1; ++i) {
    double rowacc = 0.0;
    for (std::size_t j = 0; j < g2; ++j) {
      rowacc += diff(i, j);
      const double above = i > 0 ? out.values(i - 1, j) - base : 0.0;
      out.values(i, j) = base + above + rowacc / n;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Non-additivity scan
// ---------------------------------------------------------------------------

std::vector<NonlinEntry> nonlin_scan(const MvModel& model, const Dataset& d,
                                     int outcome, int top_k, int grid_size,
                                     int threads) {
  const int p = model.n_predictors();
  if (p < 2) throw DataError("non-additivity scan needs at least two predictors");
  if (outcome < 0 || outcome >= model.n_outcomes())
    throw DataError("non-additivity scan: outcome index out of range");

  std::vector<int> cand(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) cand[static_cast<std::size_t>(j)] = j;
  if (top_k > 0 && top_k < p) {
    const InfluenceTable inf = relative_influence(model);
    std::stable_sort(cand.begin(), cand.end(), [&](int a, int b) {
      return inf.global[static_cast<std::size_t>(a)] >
             inf.global[static_cast<std::size_t>(b)];
    });
    cand.resize(static_cast<std::size_t>(std::max(top_k, 2)));
    std::sort(cand.begin(), cand.end());
  }

  std::vector<std::pair<int, int>> pairs;
  for (std::size_t i = 0; i < cand.size(); ++i)
    for (std::size_t j = i + 1; j < cand.size(); ++j)
      pairs.emplace_back(cand[i], cand[j]);

  std::vector<NonlinEntry> entries(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t idx) {
    const auto [a, b] = pairs[idx];
    const PdpResult pd = partial_dependence(model, {a, b}, outcome, grid_size, d);
    const std::size_t g1 = pd.grid1.size();
    const std::size_t g2 = pd.grid2.size();
    const std::size_t cells = g1 * g2;
    // Planar least squares on {1, x_a, x_b} over the full factorial grid.
    Eigen::Matrix3d xtx = Eigen::Matrix3d::Zero();
    Eigen::Vector3d xtz = Eigen::Vector3d::Zero();
    double zbar = 0.0, sumsq = 0.0;
    for (std::size_t i = 0; i < g1; ++i)
      for (std::size_t j = 0; j < g2; ++j) {
        const double z = pd.values(i, j);
        Eigen::Vector3d x(1.0, pd.grid1[i], pd.grid2[j]);
        xtx += x * x.transpose();
        xtz += x * z;
        zbar += z;
        sumsq += z * z;
      }
    zbar /= static_cast<double>(cells);
    double tss = 0.0;
    for (std::size_t i = 0; i < g1; ++i)
      for (std::size_t j = 0; j < g2; ++j) {
        const double c = pd.values(i, j) - zbar;
        tss += c * c;
      }
    NonlinEntry e{a, b, 0.0};
    if (tss > 0.0 && tss > 1e-14 * sumsq) {
      const Eigen::Vector3d beta = xtx.ldlt().solve(xtz);
      double rss = 0.0;
      for (std::size_t i = 0; i < g1; ++i)
        for (std::size_t j = 0; j < g2; ++j) {
          const double fit =
              beta[0] + beta[1] * pd.grid1[i] + beta[2] * pd.grid2[j];
          const double r = pd.values(i, j) - fit;
          rss += r * r;
        }
      e.score = std::clamp(rss / tss, 0.0, 1.0);
    }
    entries[idx] = e;
  });

  std::sort(entries.begin(), entries.end(),
            [](const NonlinEntry& x, const NonlinEntry& y) {
              if (x.score != y.score) return x.score > y.score;
              if (x.a != y.a) return x.a < y.a;
              return x.b < y.b;
            });
  return entries;
}

// ---------------------------------------------------------------------------
// CSV export
// ---------------------------------------------------------------------------

void write_influence_csv(const InfluenceTable& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  std::vector<std::string> header{"predictor"};
  header.insert(header.end(), t.outcome_names.begin(), t.outcome_names.end());
  header.push_back("global");
  out << join_csv(header) << "\n";
  double total = 0.0;
  for (double g : t.global) total += g;
  for (std::size_t j = 0; j < t.predictor_names.size(); ++j) {
    std::vector<std::string> cells{t.predictor_names[j]};
    for (std::size_t q = 0; q < t.outcome_names.size(); ++q)
      cells.push_back(format_double(t.relative(j, q)));
    cells.push_back(format_double(total > 0.0 ? 100.0 * t.global[j] / total : 0.0));
    out << join_csv(cells) << "\n";
  }
}

void write_covex_csv(const CovExMatrix& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  std::vector<std::string> header{"pair"};
  header.insert(header.end(), c.col_labels.begin(), c.col_labels.end());
  out << join_csv(header) << "\n";
  for (std::size_t r = 0; r < c.row_labels.size(); ++r) {
    std::vector<std::string> cells{c.row_labels[r]};
    for (std::size_t j = 0; j < c.col_labels.size(); ++j)
      cells.push_back(format_double(c.values(r, j)));
    out << join_csv(cells) << "\n";
  }
}

void write_importance_csv(const Matrix& imp,
                          const std::vector<std::string>& predictor_names,
                          const std::vector<std::string>& outcome_names,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  std::vector<std::string> header{"predictor"};
  header.insert(header.end(), outcome_names.begin(), outcome_names.end());
  out << join_csv(header) << "\n";
  for (std::size_t j = 0; j < predictor_names.size(); ++j) {
    std::vector<std::string> cells{predictor_names[j]};
    for (std::size_t q = 0; q < outcome_names.size(); ++q)
      cells.push_back(format_double(imp(j, q)));
    out << join_csv(cells) << "\n";
  }
}

void write_pdp_csv(const PdpResult& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  std::vector<std::string> header = p.names;
  header.push_back("value");
  out << join_csv(header) << "\n";
  const std::size_t g2 = p.grid2.empty() ? 1 : p.grid2.size();
  for (std::size_t i = 0; i < p.grid1.size(); ++i)
    for (std::size_t j = 0; j < g2; ++j) {
      std::vector<std::string> cells{format_double(p.grid1[i])};
      if (!p.grid2.empty()) cells.push_back(format_double(p.grid2[j]));
      cells.push_back(format_double(p.values(i, j)));
      out << join_csv(cells) << "\n";
    }
}

void write_nonlin_csv(const std::vector<NonlinEntry>& entries,
                      const std::vector<std::string>& predictor_names,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "predictor_1,predictor_2,score\n";
  for (const NonlinEntry& e : entries) {
    const std::vector<std::string> cells{
        predictor_names[static_cast<std::size_t>(e.a)],
        predictor_names[static_cast<std::size_t>(e.b)],
        format_double(e.score)};
    out << join_csv(cells) << "\n";
  }
}

}  // namespace mvgb
