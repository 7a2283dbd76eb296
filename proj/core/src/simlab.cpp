#include "mvgb/simlab.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "mvgb/baselines.hpp"
#include "mvgb/boosting.hpp"
#include "mvgb/csv.hpp"
#include "mvgb/interpret.hpp"
#include "mvgb/parallel.hpp"
#include "mvgb/rng.hpp"
#include "mvgb/tuning.hpp"

namespace mvgb {

std::string transform_name(Transform t) {
  switch (t) {
    case Transform::identity: return "identity";
    case Transform::square: return "square";
    case Transform::cube: return "cube";
    case Transform::exponential: return "exp";
  }
  return "identity";
}

Transform transform_from_name(const std::string& name) {
  if (name == "identity") return Transform::identity;
  if (name == "square") return Transform::square;
  if (name == "cube") return Transform::cube;
  if (name == "exp") return Transform::exponential;
  throw DataError("unknown transform '" + name +
                  "' (expected identity|square|cube|exp)");
}

void validate_config(const ScenarioConfig& cfg) {
  if (cfg.n < 4) throw DataError("scenario: n must be >= 4");
  if (cfg.p < 2) throw DataError("scenario: p must be >= 2");
  if (cfg.q < 2) throw DataError("scenario: q must be >= 2");
  if (cfg.n_active < 0 || cfg.n_active > cfg.p)
    throw DataError("scenario: n_active must lie in [0, p]");
  if (!(cfg.target_r2 > 0.0 && cfg.target_r2 < 1.0))
    throw DataError("scenario: target_r2 must lie in (0, 1)");
  if (cfg.n_reps < 1) throw DataError("scenario: n_reps must be >= 1");
  if (cfg.methods.empty()) throw DataError("scenario: no methods requested");
  for (const std::string& m : cfg.methods)
    if (m != "mvtboost" && m != "mvcart" && m != "bagged_mvcart" && m != "wilks")
      throw DataError("scenario: unknown method '" + m + "'");
  if (cfg.shrinkages.empty() || cfg.depths.empty())
    throw DataError("scenario: empty boosting condition grid");
  if (cfg.max_trees < 1) throw DataError("scenario: max_trees must be >= 1");
  if (cfg.cv_folds < 2) throw DataError("scenario: cv_folds must be >= 2");
  if (cfg.cp_grid.empty()) throw DataError("scenario: empty cp grid");
  if (cfg.k_prune < 2) throw DataError("scenario: k_prune must be >= 2");
  if (cfg.n_boot < 1) throw DataError("scenario: n_boot must be >= 1");
  if (!(cfg.wilks_alpha > 0.0 && cfg.wilks_alpha < 1.0))
    throw DataError("scenario: wilks_alpha must lie in (0, 1)");
}

// ---------------------------------------------------------------------------
// Data generation
// ---------------------------------------------------------------------------

namespace {

double apply_transform(Transform t, double x) {
  switch (t) {
    case Transform::identity: return x;
    case Transform::square: return x * x;
    case Transform::cube: return x * x * x;
    case Transform::exponential:
      // Centered so the systematic part is mean-zero for standard normal x.
      return std::exp(x) - std::exp(0.5);
  }
  return x;
}

}  // namespace

GeneratedData gen_data(const ScenarioConfig& cfg, int rep) {
  validate_config(cfg);
  const std::size_t n = static_cast<std::size_t>(cfg.n);
  const std::size_t p = static_cast<std::size_t>(cfg.p);
  const std::size_t q = static_cast<std::size_t>(cfg.q);
  Rng rng(derive_seed(cfg.master_seed, kSimDataStream,
                      static_cast<std::uint64_t>(rep)));

  // Fixed draw order: X column by column, then the active predictor set,
  // then each active row's two target outcomes (rows ascending), then the
  // training errors column by column, then the test errors.
  std::vector<std::vector<double>> x(p, std::vector<double>(n));
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t i = 0; i < n; ++i) x[j][i] = rng.normal();

  std::vector<bool> active(p, false);
  std::vector<int> active_rows = rng.sample(cfg.p, cfg.n_active);
  std::sort(active_rows.begin(), active_rows.end());
  for (int j : active_rows) active[static_cast<std::size_t>(j)] = true;

  Matrix b(p, q);
  for (int j : active_rows) {
    const std::vector<int> targets = rng.sample(cfg.q, 2);
    for (int t : targets)
      b(static_cast<std::size_t>(j), static_cast<std::size_t>(t)) = 1.0;
  }

  // Systematic part: the transform applies to each active predictor before
  // the linear map.
  std::vector<std::vector<double>> sys(q, std::vector<double>(n, 0.0));
  for (int j : active_rows)
    for (std::size_t c = 0; c < q; ++c) {
      if (b(static_cast<std::size_t>(j), c) == 0.0) continue;
      const auto& col = x[static_cast<std::size_t>(j)];
      for (std::size_t i = 0; i < n; ++i)
        sys[c][i] += apply_transform(cfg.transform, col[i]);
    }

  GeneratedData out;
  out.active = std::move(active);
  out.b_pattern = std::move(b);
  out.error_sd.resize(q);
  for (std::size_t c = 0; c < q; ++c) {
    double mean = 0.0;
    for (double v : sys[c]) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : sys[c]) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n - 1);
    if (!(var > 0.0))
      throw DataError("scenario: outcome 'y" + std::to_string(c + 1) +
                      "' has no systematic variance; target R^2 unreachable");
    out.error_sd[c] = std::sqrt(var * (1.0 - cfg.target_r2) / cfg.target_r2);
  }

  auto build = [&](Rng& r) {
    std::vector<Column> cols;
    cols.reserve(p + q);
    for (std::size_t j = 0; j < p; ++j) {
      Column c;
      c.name = "x" + std::to_string(j + 1);
      c.role = Role::predictor;
      c.values = x[j];
      cols.push_back(std::move(c));
    }
    for (std::size_t c2 = 0; c2 < q; ++c2) {
      Column c;
      c.name = "y" + std::to_string(c2 + 1);
      c.role = Role::outcome;
      c.values.resize(n);
      for (std::size_t i = 0; i < n; ++i)
        c.values[i] = sys[c2][i] + out.error_sd[c2] * r.normal();
      cols.push_back(std::move(c));
    }
    return Dataset::from_columns(std::move(cols));
  };
  out.train = build(rng);
  out.test = build(rng);  // same X, fresh errors
  return out;
}

// ---------------------------------------------------------------------------
// ROC / AUC
// ---------------------------------------------------------------------------

double roc_auc(const std::vector<double>& stat, const std::vector<bool>& truth,
               AucDirection direction) {
  if (stat.size() != truth.size() || stat.empty())
    throw DataError("auc: statistic and truth lengths differ");
  std::size_t n_true = 0;
  for (bool t : truth) n_true += t ? 1 : 0;
  const std::size_t n_false = truth.size() - n_true;
  if (n_true == 0 || n_false == 0)
    throw DataError("auc: both classes must be present");
  for (double v : stat)
    if (!std::isfinite(v)) throw DataError("auc: non-finite statistic");

  std::vector<double> s = stat;
  if (direction == AucDirection::lower_selects)
    for (double& v : s) v = -v;

  // Midranks over ties, 1-based.
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return s[a] < s[b]; });
  std::vector<double> rank(s.size(), 0.0);
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && s[idx[j + 1]] == s[idx[i]]) ++j;
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = mid;
    i = j + 1;
  }
  double rank_sum = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k)
    if (truth[k]) rank_sum += rank[k];
  const double nt = static_cast<double>(n_true);
  const double nf = static_cast<double>(n_false);
  return (rank_sum - nt * (nt + 1.0) / 2.0) / (nt * nf);
}

// ---------------------------------------------------------------------------
// Study driver
// ---------------------------------------------------------------------------

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

Matrix predict_boost_original(const CvSelection& sel, const Dataset& test) {
  if (sel.scaling.empty())
    return predict_ensemble(sel.model, test, sel.model.n_steps());
  const Dataset scaled = apply_scaling(test, sel.scaling);
  Matrix pred = predict_ensemble(sel.model, scaled, sel.model.n_steps());
  for (std::size_t c = 0; c < sel.model.outcome_names.size(); ++c) {
    const ColumnScaling* cs = sel.scaling.find(sel.model.outcome_names[c]);
    if (cs == nullptr) continue;
    for (std::size_t r = 0; r < pred.rows(); ++r)
      pred(r, c) = pred(r, c) * cs->sd + cs->mean;
  }
  return pred;
}

StudyRow run_mvtboost(const GeneratedData& g, const ScenarioConfig& cfg,
                      std::uint64_t rep_seed) {
  StudyRow row;
  const FoldPlan plan =
      make_folds(g.train.n_rows(), cfg.cv_folds,
                 derive_seed(rep_seed, kSimFoldStream));
  bool have = false;
  CvSelection best;
  double best_err = 0.0;
  std::uint64_t cond = 0;
  for (double v : cfg.shrinkages)
    for (int depth : cfg.depths) {
      BoostParams bp;
      bp.n_trees = cfg.max_trees;
      bp.shrinkage = v;
      bp.depth = depth;
      bp.bag_fraction = cfg.bag_fraction;
      bp.min_node = cfg.min_node;
      bp.seed = derive_seed(rep_seed, kSimBoostCondStream, cond);
      ++cond;
      CvSelection sel = cv_select_trees(g.train, bp, cfg.cv_folds, bp.seed,
                                        ScalingMode::fold_honest, &plan, 1);
      const double err =
          sel.cv.cv_curve[static_cast<std::size_t>(sel.cv.best_m - 1)];
      if (!have || err < best_err) {
        have = true;
        best_err = err;
        best = std::move(sel);
      }
    }
  const InfluenceTable inf = relative_influence(best.model);
  row.auc = roc_auc(inf.global, g.active, AucDirection::higher_selects);
  row.mse = mv_mse(g.test.outcome_matrix(), predict_boost_original(best, g.test));
  return row;
}

StudyRow run_mvcart(const GeneratedData& g, const ScenarioConfig& cfg,
                    std::uint64_t rep_seed, std::uint64_t stream,
                    double* chosen_cp) {
  StudyRow row;
  bool have = false;
  MvCartResult best;
  double best_cp = cfg.cp_grid.front();
  for (std::size_t i = 0; i < cfg.cp_grid.size(); ++i) {
    MvCartParams mp;
    mp.cp = cfg.cp_grid[i];
    mp.k_prune = cfg.k_prune;
    mp.min_node = cfg.min_node;
    mp.n_surrogates = 0;  // complete data: surrogate search changes nothing
    mp.seed = derive_seed(rep_seed, stream, i);
    MvCartResult r = fit_mvcart(g.train, mp);
    if (!have || r.cv_error < best.cv_error) {
      have = true;
      best = std::move(r);
      best_cp = cfg.cp_grid[i];
    }
  }
  std::vector<double> stat(static_cast<std::size_t>(cfg.p), 0.0);
  for (const auto& [pred, gain] : best.influence)
    stat[static_cast<std::size_t>(pred)] = gain;
  row.auc = roc_auc(stat, g.active, AucDirection::higher_selects);
  row.mse = mv_mse(g.test.outcome_matrix(), predict_tree(best.tree, g.test, {}));
  if (chosen_cp != nullptr) *chosen_cp = best_cp;
  return row;
}

StudyRow run_bagged(const GeneratedData& g, const ScenarioConfig& cfg,
                    std::uint64_t rep_seed) {
  // The penalty is selected by the single-tree cross-validation, then the
  // bagged ensemble is fit at that penalty.
  double cp = cfg.cp_grid.front();
  (void)run_mvcart(g, cfg, rep_seed, kSimBagStream + 1000, &cp);
  StudyRow row;
  MvCartParams mp;
  mp.cp = cp;
  mp.k_prune = cfg.k_prune;
  mp.min_node = cfg.min_node;
  mp.n_surrogates = 0;
  mp.seed = derive_seed(rep_seed, kSimBagStream);
  const BaggedCart bag = bag_mvcart(g.train, cfg.n_boot, mp, 1);
  std::vector<double> stat(static_cast<std::size_t>(cfg.p), 0.0);
  for (const auto& [pred, gain] : bag.influence)
    stat[static_cast<std::size_t>(pred)] = gain;
  row.auc = roc_auc(stat, g.active, AucDirection::higher_selects);
  row.mse = mv_mse(g.test.outcome_matrix(), predict_bagged(bag, g.test));
  return row;
}

StudyRow run_wilks(const GeneratedData& g, const ScenarioConfig& cfg) {
  StudyRow row;
  const WilksResult w = wilks_screen(g.train);
  row.auc = roc_auc(w.p_value, g.active, AucDirection::lower_selects);

  std::vector<int> selected;
  for (std::size_t j = 0; j < w.p_value.size(); ++j)
    if (w.p_value[j] <= cfg.wilks_alpha) selected.push_back(static_cast<int>(j));

  // Ordinary least squares refit on the selected predictors (always with an
  // intercept), predictions evaluated on the test set.
  const std::size_t n = g.train.n_rows();
  const std::size_t q = g.train.n_outcomes();
  const std::size_t k = selected.size();
  Eigen::MatrixXd xtr(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k + 1));
  Eigen::MatrixXd xte(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k + 1));
  for (std::size_t i = 0; i < n; ++i) {
    xtr(static_cast<Eigen::Index>(i), 0) = 1.0;
    xte(static_cast<Eigen::Index>(i), 0) = 1.0;
  }
  for (std::size_t c = 0; c < k; ++c) {
    const auto& tr = g.train.predictor(static_cast<std::size_t>(selected[c])).values;
    const auto& te = g.test.predictor(static_cast<std::size_t>(selected[c])).values;
    for (std::size_t i = 0; i < n; ++i) {
      xtr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c + 1)) = tr[i];
      xte(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c + 1)) = te[i];
    }
  }
  Eigen::MatrixXd ytr(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(q));
  for (std::size_t c = 0; c < q; ++c) {
    const auto& y = g.train.outcome(c).values;
    for (std::size_t i = 0; i < n; ++i)
      ytr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = y[i];
  }
  const Eigen::MatrixXd beta = xtr.colPivHouseholderQr().solve(ytr);
  const Eigen::MatrixXd pred = xte * beta;
  Matrix pm(n, q);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < q; ++c)
      pm(i, c) = pred(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
  row.mse = mv_mse(g.test.outcome_matrix(), pm);
  return row;
}

}  // namespace

StudyResult run_study(const ScenarioConfig& cfg) {
  validate_config(cfg);
  if (cfg.n_active < 1 || cfg.n_active >= cfg.p)
    throw DataError("scenario: a study needs 1 <= n_active < p");
  StudyResult result;
  result.cfg = cfg;
  const std::size_t n_methods = cfg.methods.size();
  result.rows.resize(static_cast<std::size_t>(cfg.n_reps) * n_methods);
  result.truth.resize(static_cast<std::size_t>(cfg.n_reps));

  parallel_for(cfg.n_reps, cfg.threads, [&](int rep) {
    const std::uint64_t rep_seed = derive_seed(
        cfg.master_seed, kSimRepStream, static_cast<std::uint64_t>(rep));
    bool gen_ok = true;
    GeneratedData g;
    std::string gen_error;
    try {
      g = gen_data(cfg, rep);
      result.truth[static_cast<std::size_t>(rep)] = g.active;
    } catch (const std::exception& e) {
      gen_ok = false;
      gen_error = e.what();
    }
    for (std::size_t m = 0; m < n_methods; ++m) {
      const std::string& method = cfg.methods[m];
      StudyRow row;
      row.rep = rep;
      row.method = method;
      const auto t0 = std::chrono::steady_clock::now();
      if (!gen_ok) {
        row.error = gen_error;
        row.auc = row.mse = std::numeric_limits<double>::quiet_NaN();
      } else {
        try {
          StudyRow r;
          if (method == "mvtboost") {
            r = run_mvtboost(g, cfg, rep_seed);
          } else if (method == "mvcart") {
            r = run_mvcart(g, cfg, rep_seed, kSimCartStream, nullptr);
          } else if (method == "bagged_mvcart") {
            r = run_bagged(g, cfg, rep_seed);
          } else {
            r = run_wilks(g, cfg);
          }
          row.auc = r.auc;
          row.mse = r.mse;
        } catch (const std::exception& e) {
          row.error = e.what();
          row.auc = row.mse = std::numeric_limits<double>::quiet_NaN();
        }
      }
      row.seconds = seconds_since(t0);
      result.rows[static_cast<std::size_t>(rep) * n_methods + m] =
          std::move(row);
    }
  });
  return result;
}

std::vector<StudySummaryRow> summarize_study(const StudyResult& r) {
  std::vector<StudySummaryRow> out;
  for (const std::string& method : r.cfg.methods) {
    StudySummaryRow s;
    s.method = method;
    std::vector<double> aucs, mses;
    for (const StudyRow& row : r.rows) {
      if (row.method != method || !row.error.empty()) continue;
      aucs.push_back(row.auc);
      mses.push_back(row.mse);
    }
    s.n_ok = static_cast<int>(aucs.size());
    auto mean_se = [](const std::vector<double>& v, double* mean, double* se) {
      if (v.empty()) {
        *mean = *se = std::numeric_limits<double>::quiet_NaN();
        return;
      }
      double m = 0.0;
      for (double x : v) m += x;
      m /= static_cast<double>(v.size());
      *mean = m;
      if (v.size() < 2) {
        *se = 0.0;
        return;
      }
      double var = 0.0;
      for (double x : v) var += (x - m) * (x - m);
      var /= static_cast<double>(v.size() - 1);
      *se = std::sqrt(var / static_cast<double>(v.size()));
    };
    mean_se(aucs, &s.mean_auc, &s.se_auc);
    mean_se(mses, &s.mean_mse, &s.se_mse);
    out.push_back(std::move(s));
  }
  return out;
}

void write_study_csv(const StudyResult& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "rep,method,transform,r2,auc,mse,seconds\n";
  for (const StudyRow& row : r.rows) {
    const std::vector<std::string> cells{
        std::to_string(row.rep),          row.method,
        transform_name(r.cfg.transform),  format_double(r.cfg.target_r2),
        format_double(row.auc),           format_double(row.mse),
        format_double(row.seconds)};
    out << join_csv(cells) << "\n";
  }
}

}  // namespace mvgb
