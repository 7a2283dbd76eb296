#include "mvgb/baselines.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/fisher_f.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "mvgb/csv.hpp"
#include "mvgb/parallel.hpp"
#include "mvgb/rng.hpp"

namespace mvgb {

// ---------------------------------------------------------------------------
// Wilks' lambda screen
// ---------------------------------------------------------------------------

WilksResult wilks_screen(const Dataset& d) {
  const std::size_t n = d.n_rows();
  const std::size_t p = d.n_predictors();
  const std::size_t q = d.n_outcomes();
  if (q == 0) throw DataError("wilks: no outcome columns");
  if (p == 0) throw DataError("wilks: no predictor columns");
  for (std::size_t c = 0; c < q; ++c)
    for (double v : d.outcome(c).values)
      if (is_missing(v))
        throw DataError("wilks: outcome '" + d.outcome(c).name +
                        "' has missing values");

  WilksResult out;
  out.predictor_names = d.predictor_names();
  out.lambda.resize(p);
  out.F.resize(p);
  out.p_value.resize(p);
  out.n_used.resize(p);

  for (std::size_t j = 0; j < p; ++j) {
    const auto& x = d.predictor(j).values;
    std::vector<int> rows;
    for (std::size_t i = 0; i < n; ++i)
      if (!is_missing(x[i])) rows.push_back(static_cast<int>(i));
    const std::size_t m = rows.size();
    if (m <= q + 1)
      throw DataError("wilks: predictor '" + d.predictor(j).name +
                      "' leaves too few complete rows");
    out.n_used[j] = static_cast<int>(m);

    double xbar = 0.0;
    for (int r : rows) xbar += x[static_cast<std::size_t>(r)];
    xbar /= static_cast<double>(m);
    Eigen::VectorXd xc(static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i)
      xc(static_cast<Eigen::Index>(i)) =
          x[static_cast<std::size_t>(rows[i])] - xbar;

    Eigen::MatrixXd yc(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(q));
    for (std::size_t c = 0; c < q; ++c) {
      const auto& y = d.outcome(c).values;
      double ybar = 0.0;
      for (int r : rows) ybar += y[static_cast<std::size_t>(r)];
      ybar /= static_cast<double>(m);
      for (std::size_t i = 0; i < m; ++i)
        yc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
            y[static_cast<std::size_t>(rows[i])] - ybar;
    }

    const Eigen::MatrixXd total = yc.transpose() * yc;
    const double det_t = total.determinant();
    if (!(det_t > 0.0) || !std::isfinite(det_t))
      throw DataError("wilks: degenerate outcome cross-products (collinear or "
                      "constant outcomes)");
    const double xx = xc.squaredNorm();
    double lambda = 1.0;
    if (xx > 0.0) {
      const Eigen::VectorXd cross = yc.transpose() * xc;
      const Eigen::MatrixXd error = total - (cross * cross.transpose()) / xx;
      lambda = error.determinant() / det_t;
      if (!(lambda > 0.0))
        lambda = std::numeric_limits<double>::min();  // cancellation guard
      lambda = std::min(lambda, 1.0);
    }
    const double df2 = static_cast<double>(m) - static_cast<double>(q) - 1.0;
    const double f_stat =
        lambda < 1.0 ? (1.0 - lambda) / lambda * df2 / static_cast<double>(q)
                     : 0.0;
    const boost::math::fisher_f_distribution<double> dist(
        static_cast<double>(q), df2);
    out.lambda[j] = lambda;
    out.F[j] = f_stat;
    out.p_value[j] = boost::math::cdf(boost::math::complement(dist, f_stat));
  }
  return out;
}

void write_wilks_csv(const WilksResult& w, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "predictor,lambda,F,p_value,n_used\n";
  for (std::size_t j = 0; j < w.predictor_names.size(); ++j) {
    const std::vector<std::string> cells{
        w.predictor_names[j], format_double(w.lambda[j]), format_double(w.F[j]),
        format_double(w.p_value[j]), std::to_string(w.n_used[j])};
    out << join_csv(cells) << "\n";
  }
}

// ---------------------------------------------------------------------------
// Cost-complexity pruning machinery
// ---------------------------------------------------------------------------

namespace {

// Critical thresholds of the nested weakest-link sequence, strictly
// increasing. Computed by iteratively collapsing every node whose link
// strength attains the current minimum.
std::vector<double> critical_alphas(const Tree& t) {
  std::vector<double> alphas;
  if (t.is_stump()) return alphas;
  std::vector<bool> collapsed(t.nodes.size(), false);

  // Current-state leaf SSE / leaf count under each node.
  struct Stats {
    double sse = 0.0;
    int leaves = 0;
  };
  auto eval = [&](auto&& self, int id) -> Stats {
    const TreeNode& nd = t.nodes[static_cast<std::size_t>(id)];
    if (nd.is_leaf() || collapsed[static_cast<std::size_t>(id)])
      return {nd.sse, 1};
    const Stats l = self(self, nd.left);
    const Stats r = self(self, nd.right);
    return {l.sse + r.sse, l.leaves + r.leaves};
  };

  while (true) {
    const Stats root = eval(eval, 0);
    if (root.leaves <= 1) break;
    double weakest = std::numeric_limits<double>::infinity();
    for (std::size_t id = 0; id < t.nodes.size(); ++id) {
      const TreeNode& nd = t.nodes[id];
      if (nd.is_leaf() || collapsed[id]) continue;
      const Stats s = eval(eval, static_cast<int>(id));
      if (s.leaves < 2) continue;
      const double g = (nd.sse - s.sse) / static_cast<double>(s.leaves - 1);
      weakest = std::min(weakest, g);
    }
    for (std::size_t id = 0; id < t.nodes.size(); ++id) {
      const TreeNode& nd = t.nodes[id];
      if (nd.is_leaf() || collapsed[id]) continue;
      const Stats s = eval(eval, static_cast<int>(id));
      if (s.leaves < 2) continue;
      const double g = (nd.sse - s.sse) / static_cast<double>(s.leaves - 1);
      if (g <= weakest) collapsed[id] = true;
    }
    alphas.push_back(weakest);
  }
  return alphas;
}

// Representative penalties to evaluate: 0 for the full tree, geometric means
// inside each interval between consecutive critical values, and the final
// critical value itself (which collapses furthest under collapse-on-tie).
std::vector<double> representative_betas(const std::vector<double>& alphas) {
  std::vector<double> betas{0.0};
  for (std::size_t k = 0; k + 1 < alphas.size(); ++k)
    betas.push_back(std::sqrt(alphas[k] * alphas[k + 1]));
  if (!alphas.empty()) betas.push_back(alphas.back());
  return betas;
}

// Penalized-risk decision per node: keep the split only when the children's
// best penalized risk strictly beats collapsing to a leaf.
void prune_decide(const Tree& t, int id, double beta, std::vector<bool>& keep,
                  std::vector<double>& risk) {
  const TreeNode& nd = t.nodes[static_cast<std::size_t>(id)];
  if (nd.is_leaf()) {
    risk[static_cast<std::size_t>(id)] = nd.sse + beta;
    return;
  }
  prune_decide(t, nd.left, beta, keep, risk);
  prune_decide(t, nd.right, beta, keep, risk);
  const double split_risk = risk[static_cast<std::size_t>(nd.left)] +
                            risk[static_cast<std::size_t>(nd.right)];
  const double leaf_risk = nd.sse + beta;
  if (split_risk < leaf_risk) {
    keep[static_cast<std::size_t>(id)] = true;
    risk[static_cast<std::size_t>(id)] = split_risk;
  } else {
    keep[static_cast<std::size_t>(id)] = false;
    risk[static_cast<std::size_t>(id)] = leaf_risk;
  }
}

void copy_pruned(const Tree& src, int id, const std::vector<bool>& keep,
                 Tree& dst) {
  const TreeNode& nd = src.nodes[static_cast<std::size_t>(id)];
  const int my_id = static_cast<int>(dst.nodes.size());
  dst.nodes.push_back(nd);
  if (nd.is_leaf() || !keep[static_cast<std::size_t>(id)]) {
    TreeNode& mine = dst.nodes[static_cast<std::size_t>(my_id)];
    mine.left = -1;
    mine.right = -1;
    mine.predictor = -1;
    mine.surrogates.clear();
    mine.gain = 0.0;
    return;
  }
  TreeNode& mine = dst.nodes[static_cast<std::size_t>(my_id)];
  (void)mine;
  const int left_id = static_cast<int>(dst.nodes.size());
  copy_pruned(src, nd.left, keep, dst);
  const int right_id = static_cast<int>(dst.nodes.size());
  copy_pruned(src, nd.right, keep, dst);
  dst.nodes[static_cast<std::size_t>(my_id)].left = left_id;
  dst.nodes[static_cast<std::size_t>(my_id)].right = right_id;
}

}  // namespace

Tree prune_tree(const Tree& t, double beta) {
  std::vector<bool> keep(t.nodes.size(), false);
  std::vector<double> risk(t.nodes.size(), 0.0);
  prune_decide(t, 0, beta, keep, risk);
  Tree out;
  out.n_targets = t.n_targets;
  copy_pruned(t, 0, keep, out);
  return out;
}

// ---------------------------------------------------------------------------
// fit_mvcart
// ---------------------------------------------------------------------------

namespace {

TreeParams grow_params(const Dataset& d, const MvCartParams& p) {
  TreeParams tp;
  tp.max_splits = static_cast<int>(d.n_rows());  // grow until inadmissible
  tp.min_node = p.min_node;
  tp.n_surrogates = p.n_surrogates;
  tp.min_gain_rel = p.cp;
  return tp;
}

std::vector<int> all_rows_of(std::size_t n) {
  std::vector<int> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

// Held-out squared error of a pruned tree about its leaf mean vectors.
double heldout_risk(const Tree& t, const Dataset& d,
                    const std::vector<int>& rows) {
  const std::size_t q = d.n_outcomes();
  double acc = 0.0;
  for (int r : rows) {
    const TreeNode& leaf = route_row(t, d, r);
    for (std::size_t c = 0; c < q; ++c) {
      const double e = d.outcome(c).values[static_cast<std::size_t>(r)] -
                       leaf.value[c];
      acc += e * e;
    }
  }
  return acc;
}

void validate_cart(const Dataset& d, const MvCartParams& p) {
  if (!(p.cp > 0.0)) throw DataError("mvcart: cp must be > 0");
  if (p.k_prune < 2) throw DataError("mvcart: k_prune must be >= 2");
  if (p.min_node < 1) throw DataError("mvcart: min_node must be >= 1");
  if (d.n_outcomes() == 0) throw DataError("mvcart: no outcome columns");
  for (std::size_t c = 0; c < d.n_outcomes(); ++c)
    for (double v : d.outcome(c).values)
      if (is_missing(v))
        throw DataError("mvcart: outcome '" + d.outcome(c).name +
                        "' has missing values");
}

}  // namespace

MvCartResult fit_mvcart(const Dataset& d, const MvCartParams& params) {
  validate_cart(d, params);
  const std::size_t n = d.n_rows();
  const std::size_t q = d.n_outcomes();
  if (static_cast<int>(n) < params.k_prune)
    throw DataError("mvcart: fewer rows than pruning folds");
  const TreeParams tp = grow_params(d, params);
  const std::vector<int> rows = all_rows_of(n);
  const Tree full = fit_tree(d, rows, tp);

  MvCartResult out;
  out.alphas = representative_betas(critical_alphas(full));
  const std::size_t nb = out.alphas.size();
  out.cv_curve.assign(nb, 0.0);

  const FoldPlan plan = make_folds(static_cast<int>(n), params.k_prune,
                                   derive_seed(params.seed, kCartFoldStream));
  for (int f = 0; f < plan.k; ++f) {
    const std::vector<int> train = plan.complement_rows(f);
    const std::vector<int> held = plan.fold_rows(f);
    const Tree fold_tree = fit_tree(d, train, tp);
    for (std::size_t b = 0; b < nb; ++b) {
      const Tree pruned = prune_tree(fold_tree, out.alphas[b]);
      out.cv_curve[b] += heldout_risk(pruned, d, held);
    }
  }
  const double scale = static_cast<double>(n) * static_cast<double>(q);
  for (double& v : out.cv_curve) v /= scale;

  // Ties keep the larger threshold, i.e. the smaller tree.
  std::size_t best = 0;
  for (std::size_t b = 1; b < nb; ++b)
    if (out.cv_curve[b] <= out.cv_curve[best]) best = b;
  out.selected = static_cast<int>(best);
  out.cv_error = out.cv_curve[best];
  out.tree = prune_tree(full, out.alphas[best]);
  for (const TreeNode& nd : out.tree.nodes)
    if (!nd.is_leaf()) out.influence[nd.predictor] += nd.gain;
  return out;
}

// ---------------------------------------------------------------------------
// Bagging
// ---------------------------------------------------------------------------

BaggedCart bag_mvcart(const Dataset& d, int n_boot, const MvCartParams& params,
                      int threads) {
  validate_cart(d, params);
  if (n_boot < 1) throw DataError("bagging: n_boot must be >= 1");
  const std::size_t n = d.n_rows();

  BaggedCart bag;
  bag.params = params;
  bag.trees.resize(static_cast<std::size_t>(n_boot));
  std::vector<std::map<int, double>> infl(static_cast<std::size_t>(n_boot));
  parallel_for(static_cast<std::size_t>(n_boot), threads, [&](std::size_t b) {
    Rng rng(derive_seed(params.seed, kCartBootStream, b));
    std::vector<int> sample(n);
    for (std::size_t i = 0; i < n; ++i)
      sample[i] = rng.below(static_cast<int>(n));
    const Dataset boot = d.select_rows(sample);
    MvCartParams tree_params = params;
    tree_params.seed = derive_seed(params.seed, kCartBootStream, b);
    MvCartResult r = fit_mvcart(boot, tree_params);
    bag.trees[b] = std::move(r.tree);
    infl[b] = std::move(r.influence);
  });
  for (const auto& m : infl)
    for (const auto& [pred, g] : m) bag.influence[pred] += g;
  for (auto& [pred, g] : bag.influence) g /= static_cast<double>(n_boot);
  return bag;
}

Matrix predict_bagged(const BaggedCart& b, const Dataset& d) {
  if (b.trees.empty()) throw DataError("bagging: empty ensemble");
  const std::size_t n = d.n_rows();
  const std::size_t q = static_cast<std::size_t>(b.trees.front().n_targets);
  Matrix out(n, q);
  for (const Tree& t : b.trees)
    for (std::size_t i = 0; i < n; ++i) {
      const TreeNode& leaf = route_row(t, d, static_cast<int>(i));
      for (std::size_t c = 0; c < q; ++c) out(i, c) += leaf.value[c];
    }
  const double k = static_cast<double>(b.trees.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < q; ++c) out(i, c) /= k;
  return out;
}

}  // namespace mvgb
