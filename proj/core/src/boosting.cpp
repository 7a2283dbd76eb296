#include "mvgb/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "mvgb/rng.hpp"

namespace mvgb {

namespace {
// Stream id for the per-step subsample draw; the step number is the substream.
constexpr std::uint64_t kBagStream = 1;
}  // namespace

void validate_params(const BoostParams& p) {
  if (p.n_trees < 0) throw DataError("boosting: n_trees must be >= 0");
  if (!(p.shrinkage > 0.0 && p.shrinkage <= 1.0))
    throw DataError("boosting: shrinkage must be in (0, 1]");
  if (p.depth < 1) throw DataError("boosting: depth must be >= 1");
  if (!(p.bag_fraction > 0.0 && p.bag_fraction <= 1.0))
    throw DataError("boosting: bag_fraction must be in (0, 1]");
  if (p.min_node < 1) throw DataError("boosting: min_node must be >= 1");
}

void mean_and_covariance(const std::vector<std::vector<double>>& cols,
                         std::vector<double>& mean_out, Matrix& cov_out) {
  const std::size_t q = cols.size();
  const std::size_t n = q == 0 ? 0 : cols[0].size();
  if (n < 2) throw DataError("covariance needs at least 2 rows");
  mean_out.assign(q, 0.0);
  for (std::size_t a = 0; a < q; ++a) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += cols[a][i];
    mean_out[a] = s / static_cast<double>(n);
  }
  cov_out = Matrix(q, q);
  for (std::size_t a = 0; a < q; ++a)
    for (std::size_t b = a; b < q; ++b) {
      double s = 0.0;
      const double ma = mean_out[a];
      const double mb = mean_out[b];
      const double* va = cols[a].data();
      const double* vb = cols[b].data();
      for (std::size_t i = 0; i < n; ++i) s += (va[i] - ma) * (vb[i] - mb);
      const double c = s / static_cast<double>(n - 1);
      cov_out(a, b) = c;
      cov_out(b, a) = c;
    }
}

double cov_discrepancy(const Matrix& prev, const Matrix& next) {
  if (prev.rows() != next.rows() || prev.cols() != next.cols() ||
      prev.rows() != prev.cols())
    throw std::invalid_argument("cov_discrepancy: dimension mismatch");
  double d = 0.0;
  for (std::size_t a = 0; a < prev.rows(); ++a)
    for (std::size_t b = 0; b < prev.cols(); ++b) {
      const double delta = prev(a, b) - next(a, b);
      d += delta * delta;
    }
  return d;
}

namespace {

MvModel fit_boosted(const Dataset& d, const std::vector<int>& outcome_sel,
                    const BoostParams& p, std::span<const int> snapshot_steps) {
  validate_params(p);
  const int n = static_cast<int>(d.n_rows());
  if (n < 2) throw DataError("boosting: need at least 2 rows");
  if (d.n_predictors() == 0) throw DataError("boosting: no predictor columns");
  const int n_out = static_cast<int>(outcome_sel.size());
  for (int q : outcome_sel)
    for (double v : d.outcome(static_cast<std::size_t>(q)).values)
      if (is_missing(v))
        throw DataError("boosting: outcome '" + d.outcome(static_cast<std::size_t>(q)).name +
                        "' has missing values");

  MvModel m;
  m.params = p;
  m.predictor_names = d.predictor_names();
  for (int q : outcome_sel)
    m.outcome_names.push_back(d.outcome(static_cast<std::size_t>(q)).name);

  // Residuals start at the deviations of each outcome from its mean.
  std::vector<std::vector<double>> resid(static_cast<std::size_t>(n_out),
                                         std::vector<double>(static_cast<std::size_t>(n)));
  m.initial_means.assign(static_cast<std::size_t>(n_out), 0.0);
  for (int qi = 0; qi < n_out; ++qi) {
    const auto& y = d.outcome(static_cast<std::size_t>(outcome_sel[static_cast<std::size_t>(qi)])).values;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += y[static_cast<std::size_t>(i)];
    const double mean = s / n;
    m.initial_means[static_cast<std::size_t>(qi)] = mean;
    for (int i = 0; i < n; ++i)
      resid[static_cast<std::size_t>(qi)][static_cast<std::size_t>(i)] =
          y[static_cast<std::size_t>(i)] - mean;
  }

  // Residual covariance; its step-0 value is the sample covariance of the
  // outcomes. Unchanged entries are carried over exactly between steps, so
  // the recorded per-step differences telescope to S minus the final matrix
  // with no accumulation error beyond the recorded floats themselves.
  std::vector<double> mu;
  Matrix sigma;
  mean_and_covariance(resid, mu, sigma);
  m.initial_covariance = sigma;

  std::vector<double> sumsq(static_cast<std::size_t>(n_out), 0.0);
  for (int qi = 0; qi < n_out; ++qi) {
    double s = 0.0;
    for (double r : resid[static_cast<std::size_t>(qi)]) s += r * r;
    sumsq[static_cast<std::size_t>(qi)] = s;
  }

  const PredictorOrder order = build_predictor_order(d);
  TreeParams tp;
  tp.max_splits = p.depth;
  tp.min_node = p.min_node;
  // Surrogates only matter when the training predictors actually have holes;
  // on complete data they would never be consulted, so skip the search.
  tp.n_surrogates = order.any_missing ? 3 : 0;

  const int bag_n =
      std::max(1, static_cast<int>(std::floor(p.bag_fraction * static_cast<double>(n))));
  const std::set<int> snaps(snapshot_steps.begin(), snapshot_steps.end());

  std::vector<std::vector<double>> cand_col(
      static_cast<std::size_t>(n_out), std::vector<double>(static_cast<std::size_t>(n)));
  std::vector<double> pred(static_cast<std::size_t>(n));
  std::vector<Tree> cand_tree(static_cast<std::size_t>(n_out));
  std::vector<double> cand_mean(static_cast<std::size_t>(n_out), 0.0);
  std::vector<std::vector<double>> cand_cov(static_cast<std::size_t>(n_out),
                                            std::vector<double>(static_cast<std::size_t>(n_out)));
  std::vector<double> cand_d(static_cast<std::size_t>(n_out), 0.0);

  m.training_mse.reserve(static_cast<std::size_t>(p.n_trees));
  m.steps.reserve(static_cast<std::size_t>(p.n_trees));

  for (int step = 1; step <= p.n_trees; ++step) {
    Rng rng(derive_seed(p.seed, kBagStream, static_cast<std::uint64_t>(step)));
    const std::vector<int> sub = rng.sample(n, bag_n);
    const RootView view = build_root_view(d, sub, &order);

    for (int qi = 0; qi < n_out; ++qi) {
      auto& r_q = resid[static_cast<std::size_t>(qi)];
      const TargetView targets{r_q.data()};
      try {
        cand_tree[static_cast<std::size_t>(qi)] = fit_tree_with_view(d, view, targets, tp);
      } catch (const NumericError& e) {
        throw NumericError("boosting: step " + std::to_string(step) + ": " + e.what());
      }
      predict_tree_into(cand_tree[static_cast<std::size_t>(qi)], d, pred.data());

      // Hypothetical update for this candidate; committed verbatim if chosen.
      auto& cand = cand_col[static_cast<std::size_t>(qi)];
      const double v = p.shrinkage;
      for (int i = 0; i < n; ++i)
        cand[static_cast<std::size_t>(i)] =
            r_q[static_cast<std::size_t>(i)] - v * pred[static_cast<std::size_t>(i)];
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += cand[static_cast<std::size_t>(i)];
      const double mean_c = s / n;
      cand_mean[static_cast<std::size_t>(qi)] = mean_c;

      auto& cov = cand_cov[static_cast<std::size_t>(qi)];
      for (int b = 0; b < n_out; ++b) {
        double acc = 0.0;
        if (b == qi) {
          for (int i = 0; i < n; ++i) {
            const double dd = cand[static_cast<std::size_t>(i)] - mean_c;
            acc += dd * dd;
          }
        } else {
          const double mb = mu[static_cast<std::size_t>(b)];
          const auto& rb = resid[static_cast<std::size_t>(b)];
          for (int i = 0; i < n; ++i)
            acc += (cand[static_cast<std::size_t>(i)] - mean_c) *
                   (rb[static_cast<std::size_t>(i)] - mb);
        }
        cov[static_cast<std::size_t>(b)] = acc / static_cast<double>(n - 1);
      }
      double disc = 0.0;
      for (int b = 0; b < n_out; ++b) {
        const double delta = sigma(static_cast<std::size_t>(qi), static_cast<std::size_t>(b)) -
                             cov[static_cast<std::size_t>(b)];
        disc += (b == qi) ? delta * delta : 2.0 * delta * delta;
      }
      cand_d[static_cast<std::size_t>(qi)] = disc;
    }

    // Largest covariance change wins; ties go to the lowest outcome index.
    int qstar = 0;
    for (int qi = 1; qi < n_out; ++qi)
      if (cand_d[static_cast<std::size_t>(qi)] > cand_d[static_cast<std::size_t>(qstar)])
        qstar = qi;

    StepRecord rec;
    rec.step = step;
    rec.outcome = qstar;
    rec.discrepancy = cand_d[static_cast<std::size_t>(qstar)];
    rec.raw_discrepancy = Matrix(static_cast<std::size_t>(n_out), static_cast<std::size_t>(n_out));
    const auto& cov = cand_cov[static_cast<std::size_t>(qstar)];
    for (int b = 0; b < n_out; ++b) {
      const double delta = sigma(static_cast<std::size_t>(qstar), static_cast<std::size_t>(b)) -
                           cov[static_cast<std::size_t>(b)];
      rec.raw_discrepancy(static_cast<std::size_t>(qstar), static_cast<std::size_t>(b)) = delta;
      rec.raw_discrepancy(static_cast<std::size_t>(b), static_cast<std::size_t>(qstar)) = delta;
    }
    for (int b = 0; b < n_out; ++b) {
      sigma(static_cast<std::size_t>(qstar), static_cast<std::size_t>(b)) =
          cov[static_cast<std::size_t>(b)];
      sigma(static_cast<std::size_t>(b), static_cast<std::size_t>(qstar)) =
          cov[static_cast<std::size_t>(b)];
    }
    mu[static_cast<std::size_t>(qstar)] = cand_mean[static_cast<std::size_t>(qstar)];
    std::swap(resid[static_cast<std::size_t>(qstar)], cand_col[static_cast<std::size_t>(qstar)]);

    const auto influence = tree_influence(cand_tree[static_cast<std::size_t>(qstar)]);
    double best_gain = -1.0;
    for (const auto& [j, g] : influence)
      if (g > best_gain) {
        best_gain = g;
        rec.selected_predictor = j;
      }
    rec.tree = std::move(cand_tree[static_cast<std::size_t>(qstar)]);

    double s2 = 0.0;
    for (double r : resid[static_cast<std::size_t>(qstar)]) s2 += r * r;
    if (!std::isfinite(s2))
      throw NumericError("boosting: non-finite residuals at step " + std::to_string(step));
    sumsq[static_cast<std::size_t>(qstar)] = s2;
    double total = 0.0;
    for (double s2q : sumsq) total += s2q;
    m.training_mse.push_back(total / (static_cast<double>(n) * n_out));
    m.steps.push_back(std::move(rec));

    if (snaps.count(step) != 0) {
      Matrix snap(static_cast<std::size_t>(n), static_cast<std::size_t>(n_out));
      for (int qi = 0; qi < n_out; ++qi)
        for (int i = 0; i < n; ++i)
          snap(static_cast<std::size_t>(i), static_cast<std::size_t>(qi)) =
              resid[static_cast<std::size_t>(qi)][static_cast<std::size_t>(i)];
      m.residual_snapshots[step] = std::move(snap);
    }
  }

  m.final_covariance = sigma;
  m.final_residuals = Matrix(static_cast<std::size_t>(n), static_cast<std::size_t>(n_out));
  for (int qi = 0; qi < n_out; ++qi)
    for (int i = 0; i < n; ++i)
      m.final_residuals(static_cast<std::size_t>(i), static_cast<std::size_t>(qi)) =
          resid[static_cast<std::size_t>(qi)][static_cast<std::size_t>(i)];
  return m;
}

}  // namespace

MvModel boost_univariate(const Dataset& d, int outcome, const BoostParams& p,
                         std::span<const int> snapshot_steps) {
  if (outcome < 0 || static_cast<std::size_t>(outcome) >= d.n_outcomes())
    throw DataError("boosting: outcome index out of range");
  return fit_boosted(d, {outcome}, p, snapshot_steps);
}

MvModel boost_multivariate(const Dataset& d, const BoostParams& p,
                           std::span<const int> snapshot_steps) {
  if (d.n_outcomes() == 0) throw DataError("boosting: dataset has no outcome columns");
  std::vector<int> sel(d.n_outcomes());
  for (std::size_t q = 0; q < d.n_outcomes(); ++q) sel[q] = static_cast<int>(q);
  return fit_boosted(d, sel, p, snapshot_steps);
}

Matrix predict_ensemble(const MvModel& m, const Dataset& d, int n_trees) {
  if (n_trees < 0 || n_trees > m.n_steps())
    throw std::invalid_argument("predict_ensemble: n_trees must be in 0.." +
                                std::to_string(m.n_steps()));
  std::vector<int> pred_cols(m.predictor_names.size());
  for (std::size_t j = 0; j < m.predictor_names.size(); ++j) {
    const int c = d.find(m.predictor_names[j]);
    if (c < 0)
      throw DataError("prediction data lacks predictor column '" + m.predictor_names[j] + "'");
    pred_cols[j] = c;
  }
  const std::size_t n = d.n_rows();
  const auto n_out = static_cast<std::size_t>(m.n_outcomes());
  Matrix out(n, n_out);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t q = 0; q < n_out; ++q) out(i, q) = m.initial_means[q];
  const double v = m.params.shrinkage;
  for (int s = 0; s < n_trees; ++s) {
    const StepRecord& rec = m.steps[static_cast<std::size_t>(s)];
    const auto q = static_cast<std::size_t>(rec.outcome);
    for (std::size_t i = 0; i < n; ++i) {
      const TreeNode& leaf = route_row(rec.tree, d, static_cast<int>(i), &pred_cols);
      out(i, q) += v * leaf.value[0];
    }
  }
  return out;
}

}  // namespace mvgb
