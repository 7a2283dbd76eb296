#include "mvgb/tuning.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "mvgb/csv.hpp"
#include "mvgb/parallel.hpp"
#include "mvgb/rng.hpp"

namespace mvgb {

namespace {
// Seed streams: folds get (kFoldStream, fold); the final refit gets its own.
constexpr std::uint64_t kFoldPlanStream = 10;
constexpr std::uint64_t kFoldFitStream = 11;
constexpr std::uint64_t kRefitStream = 12;
}  // namespace

double mv_mse(const Matrix& y, const Matrix& yhat) {
  if (y.rows() != yhat.rows() || y.cols() != yhat.cols())
    throw std::invalid_argument("mv_mse: shape mismatch");
  if (y.rows() == 0 || y.cols() == 0) throw std::invalid_argument("mv_mse: empty matrices");
  double s = 0.0;
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j) {
      const double d = y(i, j) - yhat(i, j);
      s += d * d;
    }
  return s / static_cast<double>(y.rows() * y.cols());
}

namespace {

// Held-out MSE at every tree count 1..M: start from the initial means, add
// each step's shrunken update into its outcome column, and keep per-column
// squared-error totals so each step costs O(held-out rows).
std::vector<double> heldout_curve(const MvModel& model, const Dataset& held) {
  const std::size_t n = held.n_rows();
  const auto q_n = static_cast<std::size_t>(model.n_outcomes());
  std::vector<int> pred_cols(model.predictor_names.size());
  for (std::size_t j = 0; j < model.predictor_names.size(); ++j) {
    const int c = held.find(model.predictor_names[j]);
    if (c < 0)
      throw DataError("cross-validation: held-out data lacks column '" +
                      model.predictor_names[j] + "'");
    pred_cols[j] = c;
  }
  Matrix y(n, q_n);
  for (std::size_t q = 0; q < q_n; ++q) {
    const int c = held.find(model.outcome_names[q]);
    if (c < 0)
      throw DataError("cross-validation: held-out data lacks column '" +
                      model.outcome_names[q] + "'");
    const auto& v = held.col(static_cast<std::size_t>(c)).values;
    for (std::size_t i = 0; i < n; ++i) y(i, q) = v[i];
  }

  Matrix pred(n, q_n);
  std::vector<double> col_err(q_n, 0.0);
  for (std::size_t q = 0; q < q_n; ++q) {
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      pred(i, q) = model.initial_means[q];
      const double d = y(i, q) - pred(i, q);
      e += d * d;
    }
    col_err[q] = e;
  }

  const double v_shrink = model.params.shrinkage;
  std::vector<double> curve(static_cast<std::size_t>(model.n_steps()), 0.0);
  for (int m = 0; m < model.n_steps(); ++m) {
    const StepRecord& rec = model.steps[static_cast<std::size_t>(m)];
    const auto q = static_cast<std::size_t>(rec.outcome);
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const TreeNode& leaf = route_row(rec.tree, held, static_cast<int>(i), &pred_cols);
      pred(i, q) += v_shrink * leaf.value[0];
      const double d = y(i, q) - pred(i, q);
      e += d * d;
    }
    col_err[q] = e;
    double total = 0.0;
    for (double ce : col_err) total += ce;
    curve[static_cast<std::size_t>(m)] = total / static_cast<double>(n * q_n);
  }
  return curve;
}

}  // namespace

CvSelection cv_select_trees(const Dataset& d, const BoostParams& params, int k,
                            std::uint64_t seed, ScalingMode scaling,
                            const FoldPlan* folds, int threads) {
  validate_params(params);
  if (params.n_trees < 1) throw DataError("cross-validation: n_trees must be >= 1");
  if (k < 2) throw DataError("cross-validation: k must be >= 2");

  FoldPlan plan = folds != nullptr
                      ? *folds
                      : make_folds(d.n_rows(), k, derive_seed(seed, kFoldPlanStream));
  if (plan.k != k || plan.assignment.size() != d.n_rows())
    throw DataError("cross-validation: fold plan does not match dataset");

  // Under global scaling all folds see the same standardized copy; fold-honest
  // scaling re-estimates inside each fold.
  const Dataset* base = &d;
  Dataset scaled_all;
  ScalingParams global_params;
  if (scaling == ScalingMode::global) {
    auto [z, p] = standardize(d, ColumnSelect::all());
    scaled_all = std::move(z);
    global_params = std::move(p);
    base = &scaled_all;
  }

  const auto m_trees = static_cast<std::size_t>(params.n_trees);
  Matrix fold_curves(static_cast<std::size_t>(k), m_trees);
  parallel_for(k, threads, [&](int f) {
    const std::vector<int> train_rows = plan.complement_rows(f);
    const std::vector<int> held_rows = plan.fold_rows(f);
    Dataset train = base->select_rows(train_rows);
    Dataset held = base->select_rows(held_rows);
    if (scaling == ScalingMode::fold_honest) {
      auto [z, p] = standardize(train, ColumnSelect::all());
      train = std::move(z);
      held = apply_scaling(held, p);
    }
    BoostParams fp = params;
    fp.seed = derive_seed(seed, kFoldFitStream, static_cast<std::uint64_t>(f));
    const MvModel model = boost_multivariate(train, fp);
    const std::vector<double> curve = heldout_curve(model, held);
    for (std::size_t m = 0; m < m_trees; ++m)
      fold_curves(static_cast<std::size_t>(f), m) = curve[m];
  });

  CvResult cv;
  cv.k = k;
  cv.per_fold_curves = fold_curves;
  cv.cv_curve.assign(m_trees, 0.0);
  for (std::size_t m = 0; m < m_trees; ++m) {
    double s = 0.0;
    for (int f = 0; f < k; ++f) s += fold_curves(static_cast<std::size_t>(f), m);
    cv.cv_curve[m] = s / static_cast<double>(k);
  }
  cv.best_m = 1;
  for (std::size_t m = 1; m < m_trees; ++m)
    if (cv.cv_curve[m] < cv.cv_curve[static_cast<std::size_t>(cv.best_m - 1)])
      cv.best_m = static_cast<int>(m) + 1;

  CvSelection out;
  out.cv = std::move(cv);
  Dataset final_train;
  const Dataset* fit_on = base;
  if (scaling == ScalingMode::fold_honest) {
    auto [z, p] = standardize(d, ColumnSelect::all());
    final_train = std::move(z);
    out.scaling = std::move(p);
    fit_on = &final_train;
  } else if (scaling == ScalingMode::global) {
    out.scaling = std::move(global_params);
  }
  BoostParams fp = params;
  fp.n_trees = out.cv.best_m;
  fp.seed = derive_seed(seed, kRefitStream);
  out.model = boost_multivariate(*fit_on, fp);
  return out;
}

void write_cv_csv(const CvResult& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  std::vector<std::string> fields{"tree_count"};
  for (int f = 1; f <= r.k; ++f) fields.push_back("fold_" + std::to_string(f));
  fields.push_back("mean");
  out << join_csv(fields) << '\n';
  for (std::size_t m = 0; m < r.cv_curve.size(); ++m) {
    fields.clear();
    fields.push_back(std::to_string(m + 1));
    for (int f = 0; f < r.k; ++f)
      fields.push_back(format_double(r.per_fold_curves(static_cast<std::size_t>(f), m)));
    fields.push_back(format_double(r.cv_curve[m]));
    out << join_csv(fields) << '\n';
  }
  if (!out) throw DataError("write to '" + path + "' failed");
}

}  // namespace mvgb
