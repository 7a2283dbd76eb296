#include "cli.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mvgb/baselines.hpp"
#include "mvgb/boosting.hpp"
#include "mvgb/csv.hpp"
#include "mvgb/dataset.hpp"
#include "mvgb/interpret.hpp"
#include "mvgb/rng.hpp"
#include "mvgb/serialize.hpp"
#include "mvgb/simlab.hpp"
#include "mvgb/tuning.hpp"

namespace mvgb::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Seed stream for the optional row subsample of the pdp command.
constexpr std::uint64_t kPdpSampleStream = 60;

struct CommonArgs {
  std::string output_dir = ".";
  int threads = 1;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonArgs* c) {
  cmd->add_option("--output-dir", c->output_dir,
                  "Directory receiving all artifacts")
      ->capture_default_str();
  cmd->add_option("--threads", c->threads, "Worker thread cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--seed", c->seed, "Random seed")->capture_default_str();
}

std::string artifact(const CommonArgs& c, const std::string& name) {
  fs::create_directories(c.output_dir);
  return (fs::path(c.output_dir) / name).string();
}

// Every command echoes its fully resolved configuration (defaults included,
// no timestamps) so a run can be reproduced from the manifest alone.
void write_manifest(const CommonArgs& c, const std::string& command,
                    json config) {
  config["output_dir"] = c.output_dir;
  config["threads"] = c.threads;
  config["seed"] = c.seed;
  json j;
  j["format_version"] = kFormatVersion;
  j["tool"] = kToolName;
  j["tool_version"] = kToolVersion;
  j["command"] = command;
  j["config"] = std::move(config);
  write_text_file(artifact(c, "manifest.json"), j.dump(2) + "\n");
}

struct BoostArgs {
  std::string input;
  std::vector<std::string> outcomes;
  double shrinkage = 0.01;
  int depth = 1;
  double bag_fraction = 0.5;
  int min_node = 10;
  int max_trees = 100;
  bool global_scaling = false;
};

void add_boost(CLI::App* cmd, BoostArgs* b, bool for_cv) {
  cmd->add_option("--input", b->input, "Training data CSV")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--outcomes", b->outcomes,
                  "Comma-separated outcome column names")
      ->required()
      ->delimiter(',');
  cmd->add_option("--shrinkage", b->shrinkage, "Step size in (0, 1]")
      ->capture_default_str();
  cmd->add_option("--depth", b->depth, "Splits per tree")
      ->capture_default_str();
  cmd->add_option("--bag-fraction", b->bag_fraction,
                  "Row subsample fraction per step")
      ->capture_default_str();
  cmd->add_option("--min-node", b->min_node, "Minimum rows per child")
      ->capture_default_str();
  cmd->add_option("--max-trees", b->max_trees, "Boosting steps M")
      ->capture_default_str();
  cmd->add_flag("--global-scaling", b->global_scaling,
                for_cv ? "Standardize all columns once on the full data "
                         "instead of per training fold"
                       : "Standardize all columns before fitting and store "
                         "the scaling in the model file");
}

BoostParams to_params(const BoostArgs& b, const CommonArgs& c) {
  BoostParams p;
  p.n_trees = b.max_trees;
  p.shrinkage = b.shrinkage;
  p.depth = b.depth;
  p.bag_fraction = b.bag_fraction;
  p.min_node = b.min_node;
  p.seed = c.seed;
  return p;
}

json boost_config(const BoostArgs& b) {
  json j;
  j["input"] = b.input;
  j["outcomes"] = b.outcomes;
  j["shrinkage"] = b.shrinkage;
  j["depth"] = b.depth;
  j["bag_fraction"] = b.bag_fraction;
  j["min_node"] = b.min_node;
  j["max_trees"] = b.max_trees;
  j["global_scaling"] = b.global_scaling;
  return j;
}

// step,outcome,predictor,discrepancy,training_mse — one row per boosting step.
void write_fit_report(const MvModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "step,outcome,predictor,discrepancy,training_mse\n";
  for (std::size_t i = 0; i < m.steps.size(); ++i) {
    const StepRecord& s = m.steps[i];
    const std::string pred =
        s.selected_predictor >= 0
            ? m.predictor_names[static_cast<std::size_t>(s.selected_predictor)]
            : "NA";
    const std::vector<std::string> cells{
        std::to_string(s.step),
        m.outcome_names[static_cast<std::size_t>(s.outcome)], pred,
        format_double(s.discrepancy), format_double(m.training_mse[i])};
    out << join_csv(cells) << "\n";
  }
}

void write_dendrogram_csv(const Dendrogram& d,
                          const std::vector<std::string>& labels,
                          const std::string& merges_path,
                          const std::string& order_path) {
  {
    std::ofstream out(merges_path);
    if (!out) throw DataError("cannot open for writing: " + merges_path);
    out << "step,a,b,height,size\n";
    for (std::size_t i = 0; i < d.merges.size(); ++i) {
      const Merge& m = d.merges[i];
      const std::vector<std::string> cells{
          std::to_string(i + 1), std::to_string(m.a), std::to_string(m.b),
          format_double(m.height), std::to_string(m.size)};
      out << join_csv(cells) << "\n";
    }
  }
  {
    std::ofstream out(order_path);
    if (!out) throw DataError("cannot open for writing: " + order_path);
    out << "position,label\n";
    for (std::size_t i = 0; i < d.order.size(); ++i) {
      const std::vector<std::string> cells{
          std::to_string(i + 1),
          labels[static_cast<std::size_t>(d.order[i])]};
      out << join_csv(cells) << "\n";
    }
  }
}

void write_summary_csv(const std::vector<StudySummaryRow>& rows,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "method,n_ok,mean_auc,se_auc,mean_mse,se_mse\n";
  for (const StudySummaryRow& r : rows) {
    const std::vector<std::string> cells{
        r.method,                 std::to_string(r.n_ok),
        format_double(r.mean_auc), format_double(r.se_auc),
        format_double(r.mean_mse), format_double(r.se_mse)};
    out << join_csv(cells) << "\n";
  }
}

int outcome_index(const MvModel& m, const std::string& name) {
  if (name.empty()) return 0;
  const auto it =
      std::find(m.outcome_names.begin(), m.outcome_names.end(), name);
  if (it == m.outcome_names.end())
    throw DataError("outcome '" + name + "' is not in the model");
  return static_cast<int>(it - m.outcome_names.begin());
}

// Interpretation commands read the data file with every column treated as a
// predictor (outcome columns, if present, are simply ignored by the model)
// and replay the model's stored scaling so the data enters the space the
// model was fit in.
Dataset load_for_model(const LoadedModel& lm, const std::string& path) {
  const Dataset d = load_csv(path, {});
  if (lm.scaling.empty()) return d;
  return apply_scaling(d, lm.scaling);
}

int do_fit(const BoostArgs& b, const CommonArgs& c) {
  const Dataset d = load_csv(b.input, b.outcomes);
  MvModel model;
  ScalingParams scaling;
  if (b.global_scaling) {
    auto [scaled, sp] = standardize(d, ColumnSelect::all());
    model = boost_multivariate(scaled, to_params(b, c));
    scaling = std::move(sp);
  } else {
    model = boost_multivariate(d, to_params(b, c));
  }
  save_model(artifact(c, "model.json"), model, scaling);
  write_fit_report(model, artifact(c, "fit_report.csv"));
  write_manifest(c, "fit", boost_config(b));
  return 0;
}

int do_cv(const BoostArgs& b, const CommonArgs& c, int folds) {
  const Dataset d = load_csv(b.input, b.outcomes);
  const ScalingMode mode =
      b.global_scaling ? ScalingMode::global : ScalingMode::fold_honest;
  const CvSelection sel = cv_select_trees(d, to_params(b, c), folds, c.seed,
                                          mode, nullptr, c.threads);
  write_cv_csv(sel.cv, artifact(c, "cv_curve.csv"));
  save_model(artifact(c, "model.json"), sel.model, sel.scaling);
  json cfg = boost_config(b);
  cfg["folds"] = folds;
  write_manifest(c, "cv", std::move(cfg));
  return 0;
}

int do_influence(const std::string& model_path, const std::string& input,
                 int n_perm, const CommonArgs& c) {
  const LoadedModel lm = load_model(model_path);
  write_influence_csv(relative_influence(lm.model),
                      artifact(c, "influence.csv"));
  if (n_perm > 0) {
    if (input.empty())
      throw DataError("--permutations needs --input evaluation data");
    const Dataset d = load_for_model(lm, input);
    const Matrix imp =
        permutation_importance(lm.model, d, n_perm, c.seed, c.threads);
    write_importance_csv(imp, lm.model.predictor_names,
                         lm.model.outcome_names,
                         artifact(c, "importance.csv"));
  }
  json cfg;
  cfg["model"] = model_path;
  cfg["input"] = input;
  cfg["permutations"] = n_perm;
  write_manifest(c, "influence", std::move(cfg));
  return 0;
}

int do_covex(const std::string& model_path, const std::string& cluster,
             const std::string& metric_name, const std::string& linkage_name,
             const CommonArgs& c) {
  const LoadedModel lm = load_model(model_path);
  const CovExMatrix cm = covex_matrix(lm.model);
  write_covex_csv(cm, artifact(c, "covex.csv"));
  if (!cluster.empty()) {
    const Metric metric =
        metric_name == "manhattan" ? Metric::manhattan : Metric::euclidean;
    const Linkage linkage =
        linkage_name == "complete" ? Linkage::complete : Linkage::average;
    const ClusterAxis axis = cluster == "rows"   ? ClusterAxis::rows
                             : cluster == "cols" ? ClusterAxis::cols
                                                 : ClusterAxis::both;
    const CovExClustering cc = cluster_covex(cm, metric, linkage, axis);
    if (cc.has_rows)
      write_dendrogram_csv(cc.rows, cm.row_labels,
                           artifact(c, "covex_row_merges.csv"),
                           artifact(c, "covex_row_order.csv"));
    if (cc.has_cols)
      write_dendrogram_csv(cc.cols, cm.col_labels,
                           artifact(c, "covex_col_merges.csv"),
                           artifact(c, "covex_col_order.csv"));
  }
  json cfg;
  cfg["model"] = model_path;
  cfg["cluster"] = cluster;
  cfg["metric"] = metric_name;
  cfg["linkage"] = linkage_name;
  write_manifest(c, "covex", std::move(cfg));
  return 0;
}

int do_pdp(const std::string& model_path, const std::string& input,
           const std::vector<std::string>& predictors,
           const std::string& outcome, int grid_size, int sample,
           const CommonArgs& c) {
  const LoadedModel lm = load_model(model_path);
  const Dataset d = load_for_model(lm, input);
  std::vector<int> pred_ids;
  for (const std::string& name : predictors) {
    const auto it = std::find(lm.model.predictor_names.begin(),
                              lm.model.predictor_names.end(), name);
    if (it == lm.model.predictor_names.end())
      throw DataError("predictor '" + name + "' is not in the model");
    pred_ids.push_back(
        static_cast<int>(it - lm.model.predictor_names.begin()));
  }
  const int q = outcome_index(lm.model, outcome);

  std::vector<int> rows;
  const int n = static_cast<int>(d.n_rows());
  if (sample > 0 && sample < n) {
    Rng rng(derive_seed(c.seed, kPdpSampleStream));
    rows = rng.sample(n, sample);
    std::sort(rows.begin(), rows.end());
  }
  PdpResult p = partial_dependence(lm.model, pred_ids, q, grid_size, d, rows);

  // Report grid axes and values in the original data units when the model
  // carries a scaling.
  if (!lm.scaling.empty()) {
    auto unscale_axis = [&](std::vector<double>& grid, const std::string& nm) {
      const ColumnScaling* cs = lm.scaling.find(nm);
      if (cs == nullptr) return;
      for (double& g : grid) g = g * cs->sd + cs->mean;
    };
    unscale_axis(p.grid1, p.names[0]);
    if (p.names.size() > 1) unscale_axis(p.grid2, p.names[1]);
    const ColumnScaling* cy = lm.scaling.find(
        lm.model.outcome_names[static_cast<std::size_t>(q)]);
    if (cy != nullptr)
      for (std::size_t i = 0; i < p.values.rows(); ++i)
        for (std::size_t j = 0; j < p.values.cols(); ++j)
          p.values(i, j) = p.values(i, j) * cy->sd + cy->mean;
  }
  write_pdp_csv(p, artifact(c, "pdp.csv"));

  json cfg;
  cfg["model"] = model_path;
  cfg["input"] = input;
  cfg["predictors"] = predictors;
  cfg["outcome"] = lm.model.outcome_names[static_cast<std::size_t>(q)];
  cfg["grid_size"] = grid_size;
  cfg["pdp_sample"] = sample;
  write_manifest(c, "pdp", std::move(cfg));
  return 0;
}

int do_nonlin(const std::string& model_path, const std::string& input,
              const std::string& outcome, int top_k, int grid_size,
              const CommonArgs& c) {
  const LoadedModel lm = load_model(model_path);
  const Dataset d = load_for_model(lm, input);
  const int q = outcome_index(lm.model, outcome);
  const auto entries =
      nonlin_scan(lm.model, d, q, top_k, grid_size, c.threads);
  write_nonlin_csv(entries, lm.model.predictor_names,
                   artifact(c, "nonlin.csv"));
  json cfg;
  cfg["model"] = model_path;
  cfg["input"] = input;
  cfg["outcome"] = lm.model.outcome_names[static_cast<std::size_t>(q)];
  cfg["top_k"] = top_k;
  cfg["grid_size"] = grid_size;
  write_manifest(c, "nonlin", std::move(cfg));
  return 0;
}

int do_simulate(const std::string& config_path, bool threads_given,
                const CommonArgs& c) {
  ScenarioConfig cfg = config_from_json(read_text_file(config_path));
  if (threads_given) cfg.threads = c.threads;
  const StudyResult res = run_study(cfg);
  write_study_csv(res, artifact(c, "study.csv"));
  write_summary_csv(summarize_study(res), artifact(c, "study_summary.csv"));
  json jcfg = json::parse(config_to_json(cfg));
  jcfg["config_file"] = config_path;
  write_manifest(c, "simulate", std::move(jcfg));
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Multivariate gradient-boosted trees: fitting, tuning, "
               "interpretation, and simulation studies"};
  app.set_version_flag("--version",
                       std::string(kToolName) + " " + kToolVersion +
                           " (format_version " +
                           std::to_string(kFormatVersion) + ")");
  app.require_subcommand(1);

  // fit
  auto fit_common = std::make_shared<CommonArgs>();
  auto fit_args = std::make_shared<BoostArgs>();
  CLI::App* fit = app.add_subcommand(
      "fit", "Fit a multivariate boosted model and write model.json");
  add_boost(fit, fit_args.get(), false);
  add_common(fit, fit_common.get());
  fit->callback([fit_args, fit_common] { do_fit(*fit_args, *fit_common); });

  // cv
  auto cv_common = std::make_shared<CommonArgs>();
  auto cv_args = std::make_shared<BoostArgs>();
  auto cv_folds = std::make_shared<int>(5);
  CLI::App* cv = app.add_subcommand(
      "cv", "Cross-validate the tree count and refit at the minimum");
  add_boost(cv, cv_args.get(), true);
  cv->add_option("--folds", *cv_folds, "Cross-validation folds")
      ->capture_default_str();
  add_common(cv, cv_common.get());
  cv->callback(
      [cv_args, cv_common, cv_folds] { do_cv(*cv_args, *cv_common, *cv_folds); });

  // influence
  auto inf_common = std::make_shared<CommonArgs>();
  auto inf_model = std::make_shared<std::string>();
  auto inf_input = std::make_shared<std::string>();
  auto inf_perm = std::make_shared<int>(0);
  CLI::App* influence = app.add_subcommand(
      "influence", "Relative influence table from a model file");
  influence->add_option("--model", *inf_model, "Model JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  influence->add_option("--input", *inf_input,
                        "Evaluation data CSV (for --permutations)")
      ->check(CLI::ExistingFile);
  influence->add_option("--permutations", *inf_perm,
                        "Also write permutation importance averaged over "
                        "this many shuffles")
      ->capture_default_str();
  add_common(influence, inf_common.get());
  influence->callback([inf_model, inf_input, inf_perm, inf_common] {
    do_influence(*inf_model, *inf_input, *inf_perm, *inf_common);
  });

  // covex
  auto cx_common = std::make_shared<CommonArgs>();
  auto cx_model = std::make_shared<std::string>();
  auto cx_cluster = std::make_shared<std::string>();
  auto cx_metric = std::make_shared<std::string>("euclidean");
  auto cx_linkage = std::make_shared<std::string>("average");
  CLI::App* covex = app.add_subcommand(
      "covex", "Covariance-explained table from a model file");
  covex->add_option("--model", *cx_model, "Model JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  covex->add_option("--cluster", *cx_cluster,
                    "Also cluster the table: rows, cols, or both")
      ->check(CLI::IsMember({"rows", "cols", "both"}));
  covex->add_option("--metric", *cx_metric, "Clustering distance")
      ->check(CLI::IsMember({"euclidean", "manhattan"}))
      ->capture_default_str();
  covex->add_option("--linkage", *cx_linkage, "Clustering linkage")
      ->check(CLI::IsMember({"average", "complete"}))
      ->capture_default_str();
  add_common(covex, cx_common.get());
  covex->callback([cx_model, cx_cluster, cx_metric, cx_linkage, cx_common] {
    do_covex(*cx_model, *cx_cluster, *cx_metric, *cx_linkage, *cx_common);
  });

  // pdp
  auto pdp_common = std::make_shared<CommonArgs>();
  auto pdp_model = std::make_shared<std::string>();
  auto pdp_input = std::make_shared<std::string>();
  auto pdp_preds = std::make_shared<std::vector<std::string>>();
  auto pdp_outcome = std::make_shared<std::string>();
  auto pdp_grid = std::make_shared<int>(50);
  auto pdp_sample = std::make_shared<int>(0);
  CLI::App* pdp = app.add_subcommand(
      "pdp", "Partial dependence grid for one or two predictors");
  pdp->add_option("--model", *pdp_model, "Model JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  pdp->add_option("--input", *pdp_input, "Data CSV averaged over")
      ->required()
      ->check(CLI::ExistingFile);
  pdp->add_option("--predictors", *pdp_preds,
                  "One or two comma-separated predictor names")
      ->required()
      ->delimiter(',')
      ->expected(1, 2);
  pdp->add_option("--outcome", *pdp_outcome,
                  "Outcome name (default: the model's first outcome)");
  pdp->add_option("--grid-size", *pdp_grid, "Grid points per predictor")
      ->capture_default_str();
  pdp->add_option("--pdp-sample", *pdp_sample,
                  "Average over a random subsample of this many rows "
                  "(0 = all rows)")
      ->capture_default_str();
  add_common(pdp, pdp_common.get());
  pdp->callback(
      [pdp_model, pdp_input, pdp_preds, pdp_outcome, pdp_grid, pdp_sample,
       pdp_common] {
        do_pdp(*pdp_model, *pdp_input, *pdp_preds, *pdp_outcome, *pdp_grid,
               *pdp_sample, *pdp_common);
      });

  // nonlin
  auto nl_common = std::make_shared<CommonArgs>();
  auto nl_model = std::make_shared<std::string>();
  auto nl_input = std::make_shared<std::string>();
  auto nl_outcome = std::make_shared<std::string>();
  auto nl_topk = std::make_shared<int>(0);
  auto nl_grid = std::make_shared<int>(100);
  CLI::App* nonlin = app.add_subcommand(
      "nonlin", "Rank predictor pairs by departure from an additive surface");
  nonlin->add_option("--model", *nl_model, "Model JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  nonlin->add_option("--input", *nl_input, "Data CSV averaged over")
      ->required()
      ->check(CLI::ExistingFile);
  nonlin->add_option("--outcome", *nl_outcome,
                     "Outcome name (default: the model's first outcome)");
  nonlin->add_option("--top-k", *nl_topk,
                     "Scan only pairs among the top-k predictors by global "
                     "influence (0 = all pairs)")
      ->capture_default_str();
  nonlin->add_option("--grid-size", *nl_grid, "Grid points per predictor")
      ->capture_default_str();
  add_common(nonlin, nl_common.get());
  nonlin->callback([nl_model, nl_input, nl_outcome, nl_topk, nl_grid,
                    nl_common] {
    do_nonlin(*nl_model, *nl_input, *nl_outcome, *nl_topk, *nl_grid,
              *nl_common);
  });

  // simulate
  auto sim_common = std::make_shared<CommonArgs>();
  auto sim_config = std::make_shared<std::string>();
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Run a seeded variable-selection and prediction study");
  simulate->add_option("--config", *sim_config, "Scenario JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  add_common(simulate, sim_common.get());
  CLI::Option* sim_threads = simulate->get_option("--threads");
  simulate->callback([sim_config, sim_common, sim_threads] {
    do_simulate(*sim_config, sim_threads->count() > 0, *sim_common);
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace mvgb::cli
