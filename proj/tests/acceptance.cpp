// Acceptance checks for the whole engine: twelve criteria, one PASS/FAIL
// line each, nonzero exit when any fail. Tolerances are pinned here as
// constants next to the checks that use them. The long variable-selection
// study (criteria 8 and 9) runs once and feeds both criteria; expect the
// full binary to take on the order of two hours single-threaded.

#include <boost/math/distributions/fisher_f.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "mvgb/baselines.hpp"
#include "mvgb/boosting.hpp"
#include "mvgb/dataset.hpp"
#include "mvgb/interpret.hpp"
#include "mvgb/rng.hpp"
#include "mvgb/serialize.hpp"
#include "mvgb/simlab.hpp"
#include "mvgb/tree.hpp"
#include "mvgb/tuning.hpp"

namespace {

using namespace mvgb;

int g_failures = 0;

void report(int idx, const std::string& name, bool ok,
            const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << idx << ": " << name;
  if (!detail.empty()) std::cout << " [" << detail << "]";
  std::cout << std::endl;
  if (!ok) ++g_failures;
}

std::string num(double v, int prec = 3) {
  std::ostringstream ss;
  ss << std::setprecision(prec) << v;
  return ss.str();
}

// Two-pass sample covariance (n-1), independent of the engine's version.
Matrix cov_of(const Matrix& r) {
  const std::size_t n = r.rows(), q = r.cols();
  std::vector<double> mean(q, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < q; ++c) mean[c] += r(i, c);
  for (double& m : mean) m /= static_cast<double>(n);
  Matrix out(q, q);
  for (std::size_t a = 0; a < q; ++a)
    for (std::size_t b = 0; b < q; ++b) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        acc += (r(i, a) - mean[a]) * (r(i, b) - mean[b]);
      out(a, b) = acc / static_cast<double>(n - 1);
    }
  return out;
}

// ---------------------------------------------------------------------------
// 1. Telescoping: the step discrepancies sum to the total covariance change.
// ---------------------------------------------------------------------------

void criterion_1() {
  constexpr double kTol = 1e-8;
  struct Cfg {
    int depth;
    double v, bag;
  };
  const std::vector<Cfg> cfgs{
      {1, 0.1, 0.5}, {3, 0.1, 1.0}, {1, 0.01, 1.0}, {3, 0.01, 0.5},
      {3, 0.1, 0.5}};
  double worst = 0.0;
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    const Dataset d = testutil::random_dataset(150, 5, 3, 40 + i);
    BoostParams p;
    p.n_trees = 60;
    p.shrinkage = cfgs[i].v;
    p.depth = cfgs[i].depth;
    p.bag_fraction = cfgs[i].bag;
    p.min_node = 5;
    p.seed = 90 + i;
    const MvModel m = boost_multivariate(d, p);
    Matrix sum(3, 3);
    for (const StepRecord& s : m.steps)
      for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b)
          sum(a, b) += s.raw_discrepancy(a, b);
    Matrix want(3, 3);
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b)
        want(a, b) = m.initial_covariance(a, b) - m.final_covariance(a, b);
    worst = std::max(worst, max_abs_diff(sum, want));
  }
  report(1, "step discrepancies telescope to the total covariance change",
         worst <= kTol, "max dev " + num(worst) + " over 5 configs");
}

// ---------------------------------------------------------------------------
// 2. Residual identity: Y - prediction at m equals the stored residuals.
// ---------------------------------------------------------------------------

void criterion_2() {
  constexpr double kTol = 1e-8;
  double worst = 0.0;
  for (int depth : {1, 3}) {
    const Dataset d = testutil::random_dataset(120, 4, 2, 50 + depth);
    BoostParams p;
    p.n_trees = 40;
    p.shrinkage = 0.1;
    p.depth = depth;
    p.bag_fraction = 0.5;
    p.min_node = 5;
    p.seed = 60 + depth;
    const std::vector<int> snaps{1, 20, 40};
    const MvModel m = boost_multivariate(d, p, snaps);
    const Matrix y = d.outcome_matrix();
    for (int ms : snaps) {
      const Matrix pred = predict_ensemble(m, d, ms);
      const Matrix& stored = m.residual_snapshots.at(ms);
      for (std::size_t i = 0; i < y.rows(); ++i)
        for (std::size_t c = 0; c < y.cols(); ++c)
          worst = std::max(worst,
                           std::abs(y(i, c) - pred(i, c) - stored(i, c)));
    }
  }
  report(2, "predictions reproduce the stored residuals at m in {1, M/2, M}",
         worst <= kTol, "max dev " + num(worst));
}

// ---------------------------------------------------------------------------
// 3. Split-oracle equivalence on 20 random datasets.
// ---------------------------------------------------------------------------

struct ONode {
  std::vector<int> rows;
  int pred = -1;
  double thr = 0.0;
  double gain = 0.0;
  int left = -1, right = -1;
};

struct OTree {
  std::vector<ONode> nodes;
};

OTree oracle_grow(const Dataset& d, const std::vector<const double*>& targets,
                  const std::vector<int>& rows, int max_splits, int min_node) {
  OTree t;
  t.nodes.push_back({rows, -1, 0.0, 0.0, -1, -1});
  for (int s = 0; s < max_splits; ++s) {
    int best_leaf = -1;
    testutil::OracleSplit best;
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
      if (t.nodes[i].left >= 0) continue;
      const testutil::OracleSplit cand =
          testutil::oracle_best_split(d, targets, t.nodes[i].rows, min_node);
      if (!cand.found || !(cand.gain > 0.0)) continue;
      bool take = best_leaf < 0;
      if (!take) {
        if (cand.gain != best.gain)
          take = cand.gain > best.gain;
        else if (cand.pred != best.pred)
          take = cand.pred < best.pred;
        else if (cand.thr != best.thr)
          take = cand.thr < best.thr;
      }
      if (take) {
        best = cand;
        best_leaf = static_cast<int>(i);
      }
    }
    if (best_leaf < 0) break;
    ONode l, r;
    l.rows = best.left;
    r.rows = best.right;
    auto& n = t.nodes[static_cast<std::size_t>(best_leaf)];
    n.pred = best.pred;
    n.thr = best.thr;
    n.gain = best.gain;
    n.left = static_cast<int>(t.nodes.size());
    n.right = static_cast<int>(t.nodes.size()) + 1;
    t.nodes.push_back(std::move(l));
    t.nodes.push_back(std::move(r));
  }
  return t;
}

bool same_structure(const Tree& e, const OTree& o, int ei, int oi) {
  const TreeNode& en = e.nodes[static_cast<std::size_t>(ei)];
  const ONode& on = o.nodes[static_cast<std::size_t>(oi)];
  if (en.is_leaf() != (on.left < 0)) return false;
  if (en.n_rows != static_cast<int>(on.rows.size())) return false;
  if (en.is_leaf()) return true;
  if (en.predictor != on.pred || en.threshold != on.thr) return false;
  if (std::abs(en.gain - on.gain) > 1e-12 * std::max(1.0, std::abs(on.gain)))
    return false;
  return same_structure(e, o, en.left, on.left) &&
         same_structure(e, o, en.right, on.right);
}

void criterion_3() {
  int bad = 0;
  for (int s = 1; s <= 20; ++s) {
    const int n = 30 + (s * 7) % 71;       // 30..100
    const int p = 1 + s % 5;               // 1..5
    const int q = 1 + s % 3;               // 1..3 targets
    const Dataset d = testutil::random_dataset(n, p, q, 70 + s);
    TreeParams tp;
    tp.max_splits = 1 + s % 4;
    tp.min_node = 5;
    tp.n_surrogates = 0;
    std::vector<int> rows(static_cast<std::size_t>(n));
    std::iota(rows.begin(), rows.end(), 0);
    const Tree t = fit_tree(d, rows, tp);
    std::vector<const double*> targets;
    for (std::size_t c = 0; c < d.n_outcomes(); ++c)
      targets.push_back(d.outcome(c).values.data());
    const OTree o = oracle_grow(d, targets, rows, tp.max_splits, tp.min_node);
    if (!same_structure(t, o, 0, 0)) ++bad;
  }
  report(3, "tree growth matches exhaustive split search on 20 datasets",
         bad == 0, bad == 0 ? "all splits and tie-breaks agree"
                            : num(bad, 2) + " datasets diverged");
}

// ---------------------------------------------------------------------------
// 4. Covariance-explained exactness at depth 1 with orthogonal predictors.
// ---------------------------------------------------------------------------

void criterion_4() {
  constexpr double kTol = 1e-8;
  // 2^3 factorial replicated: exactly orthogonal +-1 predictors.
  const int reps = 8, n = 64;
  std::vector<double> a(n), b(n), c(n), y1(n), y2(n);
  Rng rng(123);
  for (int i = 0; i < n; ++i) {
    const int pat = i / reps;
    a[static_cast<std::size_t>(i)] = (pat & 1) ? 1.0 : -1.0;
    b[static_cast<std::size_t>(i)] = (pat & 2) ? 1.0 : -1.0;
    c[static_cast<std::size_t>(i)] = (pat & 4) ? 1.0 : -1.0;
    y1[static_cast<std::size_t>(i)] = 1.0 * a[static_cast<std::size_t>(i)] +
                                      0.5 * b[static_cast<std::size_t>(i)] +
                                      0.3 * rng.normal();
    y2[static_cast<std::size_t>(i)] = 0.8 * b[static_cast<std::size_t>(i)] -
                                      0.6 * c[static_cast<std::size_t>(i)] +
                                      0.3 * rng.normal();
  }
  const Dataset d = testutil::make_dataset(
      {{"x1", a}, {"x2", b}, {"x3", c}}, {{"y1", y1}, {"y2", y2}});
  BoostParams p;
  p.n_trees = 30;
  p.shrinkage = 0.1;
  p.depth = 1;
  p.bag_fraction = 1.0;  // deterministic trees: the decomposition is exact
  p.min_node = 5;
  p.seed = 4;
  const MvModel m = boost_multivariate(d, p);

  // Replay the residual trajectory and recompute every step's covariance
  // change directly, attributing it to the stump's split predictor.
  const Matrix y = d.outcome_matrix();
  Matrix resid(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t q = 0; q < y.cols(); ++q)
      resid(i, q) = y(i, q) - m.initial_means[q];
  std::vector<Matrix> per_pred(3, Matrix(2, 2));
  double worst = 0.0;
  Matrix prev_cov = cov_of(resid);
  for (const StepRecord& s : m.steps) {
    const Matrix upd = predict_tree(s.tree, d);
    for (std::size_t i = 0; i < resid.rows(); ++i)
      resid(i, static_cast<std::size_t>(s.outcome)) -=
          p.shrinkage * upd(i, 0);
    const Matrix next_cov = cov_of(resid);
    Matrix raw(2, 2);
    for (std::size_t x = 0; x < 2; ++x)
      for (std::size_t z = 0; z < 2; ++z)
        raw(x, z) = prev_cov(x, z) - next_cov(x, z);
    worst = std::max(worst, max_abs_diff(raw, s.raw_discrepancy));
    prev_cov = next_cov;
    if (s.selected_predictor >= 0) {
      Matrix& acc = per_pred[static_cast<std::size_t>(s.selected_predictor)];
      for (std::size_t x = 0; x < 2; ++x)
        for (std::size_t z = 0; z < 2; ++z) acc(x, z) += raw(x, z);
    }
  }
  const CovExMatrix cm = covex_matrix(m);
  for (std::size_t col = 0; col < 3; ++col)
    for (std::size_t row = 0; row < cm.row_pairs.size(); ++row) {
      const auto [qa, qb] = cm.row_pairs[row];
      const double want = per_pred[col](static_cast<std::size_t>(qa),
                                        static_cast<std::size_t>(qb));
      worst = std::max(worst, std::abs(cm.values(row, col) - want));
    }
  report(4, "per-predictor covariance-explained columns replay exactly",
         worst <= kTol, "max dev " + num(worst));
}

// ---------------------------------------------------------------------------
// 5. AUC against a threshold-sweep trapezoidal oracle.
// ---------------------------------------------------------------------------

double trapezoid_auc(const std::vector<double>& s,
                     const std::vector<bool>& truth) {
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t x, std::size_t y) { return s[x] > s[y]; });
  double nt = 0.0, nf = 0.0;
  for (bool t : truth) (t ? nt : nf) += 1.0;
  double tp = 0.0, fp = 0.0, px = 0.0, py = 0.0, area = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && s[idx[j + 1]] == s[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) (truth[idx[k]] ? tp : fp) += 1.0;
    const double x = fp / nf, y = tp / nt;
    area += (x - px) * (y + py) / 2.0;
    px = x;
    py = y;
    i = j + 1;
  }
  return area;
}

void criterion_5() {
  constexpr double kTol = 1e-12;
  Rng rng(7);
  double worst = 0.0;
  int done = 0;
  while (done < 100) {
    const int n = 4 + static_cast<int>(rng.below(47));
    std::vector<double> s(static_cast<std::size_t>(n));
    std::vector<bool> truth(static_cast<std::size_t>(n));
    int n_true = 0;
    for (int i = 0; i < n; ++i) {
      s[static_cast<std::size_t>(i)] = static_cast<double>(rng.below(9)) / 4.0;
      const bool t = rng.below(2) == 1;
      truth[static_cast<std::size_t>(i)] = t;
      n_true += t ? 1 : 0;
    }
    if (n_true == 0 || n_true == n) continue;
    ++done;
    const double got = roc_auc(s, truth, AucDirection::higher_selects);
    worst = std::max(worst, std::abs(got - trapezoid_auc(s, truth)));
  }
  const std::vector<double> flat(6, 3.75);
  const std::vector<bool> mixed{true, false, true, false, true, false};
  const bool ties_ok =
      roc_auc(flat, mixed, AucDirection::higher_selects) == 0.5;
  report(5, "rank AUC equals the trapezoidal sweep; all-ties give exactly 0.5",
         worst <= kTol && ties_ok,
         "max dev " + num(worst) + " over 100 instances");
}

// ---------------------------------------------------------------------------
// 6. One-outcome reduction: multivariate equals univariate bitwise.
// ---------------------------------------------------------------------------

void criterion_6() {
  bool ok = true;
  for (std::uint64_t seed = 1; seed <= 3 && ok; ++seed) {
    const Dataset d = testutil::random_dataset(120, 4, 1, 80 + seed);
    BoostParams p;
    p.n_trees = 50;
    p.shrinkage = 0.1;
    p.depth = 2;
    p.bag_fraction = 0.5;
    p.min_node = 5;
    p.seed = seed;
    const MvModel uni = boost_univariate(d, 0, p);
    const MvModel multi = boost_multivariate(d, p);
    ok = uni.steps.size() == multi.steps.size();
    for (std::size_t i = 0; ok && i < uni.steps.size(); ++i)
      ok = tree_to_json(uni.steps[i].tree) ==
           tree_to_json(multi.steps[i].tree);
  }
  report(6, "single-outcome boosting reproduces the univariate tree sequence",
         ok, ok ? "3 seeds bit-identical" : "sequences diverged");
}

// ---------------------------------------------------------------------------
// 7. One-outcome screen reduces to the regression F-test.
// ---------------------------------------------------------------------------

void criterion_7() {
  constexpr double kTol = 1e-10;
  double worst = 0.0;
  for (int s = 1; s <= 20; ++s) {
    const int n = 25 + (s * 11) % 60;
    const int p = 1 + s % 4;
    const Dataset d = testutil::random_dataset(n, p, 1, 300 + s);
    const WilksResult w = wilks_screen(d);
    const auto& y = d.outcome(0).values;
    for (int j = 0; j < p; ++j) {
      const auto& x = d.predictor(static_cast<std::size_t>(j)).values;
      double mx = 0.0, my = 0.0;
      for (int i = 0; i < n; ++i) {
        mx += x[static_cast<std::size_t>(i)];
        my += y[static_cast<std::size_t>(i)];
      }
      mx /= n;
      my /= n;
      double sxy = 0.0, sxx = 0.0, syy = 0.0;
      for (int i = 0; i < n; ++i) {
        const double dx = x[static_cast<std::size_t>(i)] - mx;
        const double dy = y[static_cast<std::size_t>(i)] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
      }
      const double r2 = sxy * sxy / (sxx * syy);
      const double f = r2 * (n - 2) / (1.0 - r2);
      const boost::math::fisher_f dist(1.0, static_cast<double>(n - 2));
      const double pval = boost::math::cdf(boost::math::complement(dist, f));
      worst = std::max(worst,
                       std::abs(pval - w.p_value[static_cast<std::size_t>(j)]));
    }
  }
  report(7, "one-outcome screen p-values equal the regression F-test",
         worst <= kTol, "max dev " + num(worst) + " over 20 instances");
}

// ---------------------------------------------------------------------------
// 8 & 9. Variable-selection and prediction study at desk scale. One study
// per transform and signal level feeds both criteria. The generating scale
// is fixed: n=1000, p=50, Q=5, 15 active predictors, per-outcome R^2 in
// {0.05, 0.10}, 20 replications each.
// ---------------------------------------------------------------------------

struct StudyMeans {
  double auc_boost = 0.0, auc_cart = 0.0, auc_wilks = 0.0;
  double mse_boost = 0.0, mse_wilks = 0.0;
  int ok_boost = 0;
};

StudyMeans desk_study(Transform t, double r2) {
  ScenarioConfig cfg;
  cfg.n = 1000;
  cfg.p = 50;
  cfg.q = 5;
  cfg.n_active = 15;
  cfg.transform = t;
  cfg.target_r2 = r2;
  cfg.n_reps = 20;
  cfg.master_seed = 101;
  cfg.methods = {"mvtboost", "mvcart", "wilks"};
  cfg.shrinkages = {0.1, 0.01, 0.005};
  cfg.depths = {1, 3};
  cfg.max_trees = 2000;
  cfg.bag_fraction = 0.5;
  cfg.cv_folds = 5;
  cfg.min_node = 10;
  cfg.cp_grid = {0.001, 0.0025, 0.005, 0.0075, 0.01, 0.015, 0.02};
  cfg.k_prune = 10;
  cfg.wilks_alpha = 0.05;
  cfg.threads = 1;
  const StudyResult res = run_study(cfg);
  const auto summary = summarize_study(res);
  StudyMeans out;
  for (const StudySummaryRow& r : summary) {
    if (r.method == "mvtboost") {
      out.auc_boost = r.mean_auc;
      out.mse_boost = r.mean_mse;
      out.ok_boost = r.n_ok;
    } else if (r.method == "mvcart") {
      out.auc_cart = r.mean_auc;
    } else if (r.method == "wilks") {
      out.auc_wilks = r.mean_auc;
      out.mse_wilks = r.mean_mse;
    }
  }
  return out;
}

void criteria_8_and_9() {
  constexpr double kAucMargin = 0.05;      // boosted lead for x^2 and x^3
  constexpr double kIdentityAucBand = 0.05;
  constexpr double kIdentityMseRel = 0.05;
  std::cout << "... running the desk-scale selection study (3 transforms x 2 "
               "signal levels x 20 replications; this is the long part)"
            << std::endl;
  bool auc_ok = true, mse_ok = true;
  std::string auc_detail, mse_detail;
  for (double r2 : {0.05, 0.10}) {
    const StudyMeans sq = desk_study(Transform::square, r2);
    std::cout << "... square r2=" << r2 << " done: boost AUC "
              << num(sq.auc_boost) << ", cart " << num(sq.auc_cart)
              << ", screen " << num(sq.auc_wilks) << std::endl;
    const StudyMeans cu = desk_study(Transform::cube, r2);
    std::cout << "... cube r2=" << r2 << " done: boost AUC "
              << num(cu.auc_boost) << ", cart " << num(cu.auc_cart)
              << ", screen " << num(cu.auc_wilks) << std::endl;
    const StudyMeans id = desk_study(Transform::identity, r2);
    std::cout << "... identity r2=" << r2 << " done: boost AUC "
              << num(id.auc_boost) << ", screen " << num(id.auc_wilks)
              << std::endl;

    const bool sq_auc = sq.auc_boost >= sq.auc_wilks + kAucMargin &&
                        sq.auc_boost >= sq.auc_cart + kAucMargin;
    const bool cu_auc = cu.auc_boost >= cu.auc_wilks + kAucMargin &&
                        cu.auc_boost >= cu.auc_cart + kAucMargin;
    const bool id_auc =
        std::abs(id.auc_boost - id.auc_wilks) <= kIdentityAucBand;
    auc_ok = auc_ok && sq_auc && cu_auc && id_auc;
    if (!auc_detail.empty()) auc_detail += " | ";
    auc_detail += "r2=" + num(r2, 2) + ": x^2 boost/cart/screen " +
                  num(sq.auc_boost) + "/" + num(sq.auc_cart) + "/" +
                  num(sq.auc_wilks) + (sq_auc ? "" : " <margin miss>") +
                  "; x^3 " + num(cu.auc_boost) + "/" + num(cu.auc_cart) +
                  "/" + num(cu.auc_wilks) + (cu_auc ? "" : " <margin miss>") +
                  "; x " + num(id.auc_boost) + " vs " + num(id.auc_wilks) +
                  (id_auc ? "" : " <band miss>");

    const bool sq_mse = sq.mse_boost < sq.mse_wilks;
    const bool cu_mse = cu.mse_boost < cu.mse_wilks;
    const bool id_mse = std::abs(id.mse_boost - id.mse_wilks) <=
                        kIdentityMseRel * id.mse_wilks;
    mse_ok = mse_ok && sq_mse && cu_mse && id_mse;
    if (!mse_detail.empty()) mse_detail += " | ";
    mse_detail += "r2=" + num(r2, 2) + ": x^2 " + num(sq.mse_boost, 4) +
                  " vs " + num(sq.mse_wilks, 4) + (sq_mse ? "" : " <miss>") +
                  "; x^3 " + num(cu.mse_boost, 4) + " vs " +
                  num(cu.mse_wilks, 4) + (cu_mse ? "" : " <miss>") + "; x " +
                  num(id.mse_boost, 4) + " vs " + num(id.mse_wilks, 4) +
                  (id_mse ? "" : " <band miss>");
  }
  report(8,
         "selection AUC: boosting leads for curved transforms, ties the "
         "screen for linear",
         auc_ok, auc_detail);
  report(9,
         "test error: boosting beats select-then-refit for curved "
         "transforms, matches it for linear",
         mse_ok, mse_detail);
}

// ---------------------------------------------------------------------------
// 10. Bagging improves over a single pruned tree in most replications.
// ---------------------------------------------------------------------------

void criterion_10() {
  int wins = 0;
  for (int rep = 1; rep <= 20; ++rep) {
    const Dataset train = testutil::random_dataset(250, 6, 2, 500 + rep);
    const Dataset test = testutil::random_dataset(600, 6, 2, 900 + rep);
    MvCartParams p;
    p.cp = 0.002;
    p.k_prune = 5;
    p.min_node = 10;
    p.n_surrogates = 0;
    p.seed = static_cast<std::uint64_t>(rep);
    const MvCartResult single = fit_mvcart(train, p);
    const BaggedCart bag = bag_mvcart(train, 25, p, 1);
    const Matrix y = test.outcome_matrix();
    const double mse_single = mv_mse(y, predict_tree(single.tree, test));
    const double mse_bag = mv_mse(y, predict_bagged(bag, test));
    if (mse_bag <= mse_single) ++wins;
  }
  report(10, "bagged trees beat the single pruned tree in >= 16/20 runs",
         wins >= 16, num(wins, 2) + "/20 improved");
}

// ---------------------------------------------------------------------------
// 11. Determinism across reruns and thread counts for fit, cv, simulate.
// ---------------------------------------------------------------------------

void criterion_11() {
  bool fit_ok = false, cv_ok = false, sim_ok = true;
  {
    const Dataset d = testutil::random_dataset(100, 4, 2, 1234);
    BoostParams p;
    p.n_trees = 30;
    p.shrinkage = 0.1;
    p.depth = 2;
    p.seed = 77;
    const MvModel a = boost_multivariate(d, p);
    const MvModel b = boost_multivariate(d, p);
    const ScalingParams none;
    fit_ok = model_to_json(a, none) == model_to_json(b, none);
  }
  {
    const Dataset d = testutil::random_dataset(90, 3, 2, 4321);
    BoostParams p;
    p.n_trees = 25;
    p.shrinkage = 0.1;
    p.seed = 9;
    const CvSelection s1 =
        cv_select_trees(d, p, 3, 9, ScalingMode::fold_honest, nullptr, 1);
    const CvSelection s4 =
        cv_select_trees(d, p, 3, 9, ScalingMode::fold_honest, nullptr, 4);
    cv_ok = s1.cv.cv_curve == s4.cv.cv_curve &&
            s1.cv.per_fold_curves == s4.cv.per_fold_curves &&
            model_to_json(s1.model, s1.scaling) ==
                model_to_json(s4.model, s4.scaling);
  }
  {
    ScenarioConfig cfg;
    cfg.n = 60;
    cfg.p = 5;
    cfg.q = 2;
    cfg.n_active = 2;
    cfg.target_r2 = 0.4;
    cfg.n_reps = 2;
    cfg.master_seed = 6;
    cfg.methods = {"mvtboost", "mvcart", "wilks"};
    cfg.shrinkages = {0.1};
    cfg.depths = {1};
    cfg.max_trees = 15;
    cfg.cv_folds = 3;
    cfg.min_node = 5;
    cfg.cp_grid = {0.01};
    cfg.k_prune = 3;
    const StudyResult r1 = run_study(cfg);
    ScenarioConfig cfg4 = cfg;
    cfg4.threads = 4;
    const StudyResult r4 = run_study(cfg4);
    sim_ok = r1.rows.size() == r4.rows.size() && r1.truth == r4.truth;
    for (std::size_t i = 0; sim_ok && i < r1.rows.size(); ++i) {
      const StudyRow& a = r1.rows[i];
      const StudyRow& b = r4.rows[i];
      sim_ok = a.rep == b.rep && a.method == b.method && a.auc == b.auc &&
               a.mse == b.mse && a.error == b.error;
    }
  }
  report(11, "fit, cv, and simulate repeat bit-identically across threads",
         fit_ok && cv_ok && sim_ok,
         std::string("fit ") + (fit_ok ? "ok" : "DIFFERS") + ", cv " +
             (cv_ok ? "ok" : "DIFFERS") + ", simulate " +
             (sim_ok ? "ok" : "DIFFERS"));
}

// ---------------------------------------------------------------------------
// 12. Partial dependence matches brute force; the interacting pair tops the
// non-additivity scan.
// ---------------------------------------------------------------------------

double brute_pdp_point(const MvModel& m, const Dataset& d,
                       const std::vector<std::pair<std::string, double>>& fix,
                       int outcome) {
  std::vector<Column> cols;
  for (std::size_t j = 0; j < d.n_predictors(); ++j) {
    Column c = d.predictor(j);
    for (const auto& [name, value] : fix)
      if (c.name == name) {
        std::fill(c.values.begin(), c.values.end(), value);
        break;
      }
    cols.push_back(std::move(c));
  }
  for (std::size_t q = 0; q < d.n_outcomes(); ++q)
    cols.push_back(d.outcome(q));
  const Dataset fixed = Dataset::from_columns(std::move(cols));
  const Matrix pred = predict_ensemble(m, fixed, m.n_steps());
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.rows(); ++i)
    acc += pred(i, static_cast<std::size_t>(outcome));
  return acc / static_cast<double>(pred.rows());
}

void criterion_12() {
  constexpr double kPdpTol = 1e-10;
  double worst = 0.0;
  for (double missing : {0.0, 0.15}) {
    const Dataset d = testutil::random_dataset(80, 4, 2, 600, missing);
    BoostParams p;
    p.n_trees = 60;
    p.shrinkage = 0.1;
    p.depth = 2;
    p.bag_fraction = 0.5;
    p.min_node = 5;
    p.seed = 11;
    const MvModel m = boost_multivariate(d, p);
    const PdpResult one = partial_dependence(m, {0}, 1, 9, d);
    for (std::size_t i = 0; i < one.grid1.size(); ++i)
      worst = std::max(
          worst, std::abs(one.values(i, 0) -
                          brute_pdp_point(m, d, {{"x1", one.grid1[i]}}, 1)));
    const PdpResult two = partial_dependence(m, {1, 2}, 0, 5, d);
    for (std::size_t i = 0; i < two.grid1.size(); ++i)
      for (std::size_t j = 0; j < two.grid2.size(); ++j)
        worst = std::max(
            worst,
            std::abs(two.values(i, j) -
                     brute_pdp_point(
                         m, d,
                         {{"x2", two.grid1[i]}, {"x3", two.grid2[j]}}, 0)));
  }

  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed * 101);
    const int n = 400;
    std::vector<double> x1(static_cast<std::size_t>(n)),
        x2(static_cast<std::size_t>(n)), x3(static_cast<std::size_t>(n)),
        y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      x1[static_cast<std::size_t>(i)] = rng.normal();
      x2[static_cast<std::size_t>(i)] = rng.normal();
      x3[static_cast<std::size_t>(i)] = rng.normal();
      y[static_cast<std::size_t>(i)] =
          x1[static_cast<std::size_t>(i)] * x2[static_cast<std::size_t>(i)] +
          0.1 * rng.normal();
    }
    const Dataset d = testutil::make_dataset(
        {{"x1", x1}, {"x2", x2}, {"x3", x3}}, {{"y", y}});
    BoostParams p;
    p.n_trees = 300;
    p.shrinkage = 0.1;
    p.depth = 2;
    p.bag_fraction = 0.5;
    p.min_node = 10;
    p.seed = seed;
    const MvModel m = boost_multivariate(d, p);
    const auto ranked = nonlin_scan(m, d, 0, 0, 40);
    if (!ranked.empty() && ranked[0].a == 0 && ranked[0].b == 1) ++wins;
  }
  report(12,
         "partial dependence matches brute force; the product pair tops the "
         "scan in >= 18/20 seeds",
         worst <= kPdpTol && wins >= 18,
         "max pdp dev " + num(worst) + ", pair first in " + num(wins, 2) +
             "/20");
}

}  // namespace

int main() {
  std::cout << "acceptance checks (" << kToolName << " " << kToolVersion
            << ")" << std::endl;
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  // MVGB_ACCEPT_SKIP_STUDY exists for local iteration on the fast checks
  // only; a run with the study skipped always exits nonzero.
  const bool skip_study = std::getenv("MVGB_ACCEPT_SKIP_STUDY") != nullptr;
  if (skip_study) {
    std::cout << "SKIP criteria 8-9: selection study skipped by "
                 "MVGB_ACCEPT_SKIP_STUDY (dev only; run counts as failed)"
              << std::endl;
    ++g_failures;
  } else {
    criteria_8_and_9();
  }
  criterion_10();
  criterion_11();
  criterion_12();
  if (g_failures == 0) {
    std::cout << "all 12 criteria passed" << std::endl;
    return 0;
  }
  std::cout << g_failures << " criteria failed" << std::endl;
  return 1;
}
