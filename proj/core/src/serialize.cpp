#include "mvgb/serialize.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mvgb {

using nlohmann::json;

namespace {

void check_version(const json& j, const char* what, bool required) {
  if (!j.is_object()) throw DataError(std::string(what) + ": not a JSON object");
  if (!j.contains("format_version")) {
    if (required)
      throw DataError(std::string(what) + ": missing format_version");
    return;
  }
  const int v = j.at("format_version").get<int>();
  if (v != kFormatVersion)
    throw DataError(std::string(what) + ": format_version " +
                    std::to_string(v) + " is not supported (expected " +
                    std::to_string(kFormatVersion) + ")");
}

json matrix_to_obj(const Matrix& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> values;
  values.reserve(m.rows() * m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) values.push_back(m(r, c));
  j["values"] = std::move(values);
  return j;
}

Matrix matrix_from_obj(const json& j) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  const auto values = j.at("values").get<std::vector<double>>();
  if (values.size() != rows * cols)
    throw DataError("matrix: value count does not match the declared shape");
  Matrix m(rows, cols);
  std::size_t i = 0;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = values[i++];
  return m;
}

json tree_to_obj(const Tree& t) {
  json nodes = json::array();
  for (const TreeNode& n : t.nodes) {
    json jn;
    jn["left"] = n.left;
    jn["right"] = n.right;
    jn["predictor"] = n.predictor;
    jn["threshold"] = n.threshold;
    jn["majority_left"] = n.majority_left;
    json surs = json::array();
    for (const Surrogate& s : n.surrogates) {
      json js;
      js["predictor"] = s.predictor;
      js["threshold"] = s.threshold;
      js["same_direction"] = s.same_direction;
      js["agreement"] = s.agreement;
      surs.push_back(std::move(js));
    }
    jn["surrogates"] = std::move(surs);
    jn["gain"] = n.gain;
    jn["sse"] = n.sse;
    jn["n_rows"] = n.n_rows;
    jn["value"] = n.value;
    nodes.push_back(std::move(jn));
  }
  json j;
  j["n_targets"] = t.n_targets;
  j["nodes"] = std::move(nodes);
  return j;
}

Tree tree_from_obj(const json& j) {
  Tree t;
  t.n_targets = j.at("n_targets").get<int>();
  const json& nodes = j.at("nodes");
  if (!nodes.is_array() || nodes.empty())
    throw DataError("tree: a tree needs at least its root node");
  const int n = static_cast<int>(nodes.size());
  for (const json& jn : nodes) {
    TreeNode node;
    node.left = jn.at("left").get<int>();
    node.right = jn.at("right").get<int>();
    node.predictor = jn.at("predictor").get<int>();
    node.threshold = jn.at("threshold").get<double>();
    node.majority_left = jn.at("majority_left").get<bool>();
    for (const json& js : jn.at("surrogates")) {
      Surrogate s;
      s.predictor = js.at("predictor").get<int>();
      s.threshold = js.at("threshold").get<double>();
      s.same_direction = js.at("same_direction").get<bool>();
      s.agreement = js.at("agreement").get<double>();
      node.surrogates.push_back(s);
    }
    node.gain = jn.at("gain").get<double>();
    node.sse = jn.at("sse").get<double>();
    node.n_rows = jn.at("n_rows").get<int>();
    node.value = jn.at("value").get<std::vector<double>>();
    if (static_cast<int>(node.value.size()) != t.n_targets)
      throw DataError("tree: node value length differs from n_targets");
    const bool left_ok = node.left == -1 || (node.left > 0 && node.left < n);
    const bool right_ok = node.right == -1 || (node.right > 0 && node.right < n);
    if (!left_ok || !right_ok || (node.left < 0) != (node.right < 0))
      throw DataError("tree: node child ids out of range");
    t.nodes.push_back(std::move(node));
  }
  return t;
}

json scaling_to_obj(const ScalingParams& p) {
  json cols = json::array();
  for (const ColumnScaling& c : p.columns) {
    json jc;
    jc["name"] = c.name;
    jc["mean"] = c.mean;
    jc["sd"] = c.sd;
    cols.push_back(std::move(jc));
  }
  json j;
  j["columns"] = std::move(cols);
  return j;
}

ScalingParams scaling_from_obj(const json& j) {
  ScalingParams p;
  for (const json& jc : j.at("columns")) {
    ColumnScaling c;
    c.name = jc.at("name").get<std::string>();
    c.mean = jc.at("mean").get<double>();
    c.sd = jc.at("sd").get<double>();
    if (!(c.sd > 0.0))
      throw DataError("scaling: column '" + c.name + "' has sd <= 0");
    p.columns.push_back(std::move(c));
  }
  return p;
}

json params_to_obj(const BoostParams& p) {
  json j;
  j["n_trees"] = p.n_trees;
  j["shrinkage"] = p.shrinkage;
  j["depth"] = p.depth;
  j["bag_fraction"] = p.bag_fraction;
  j["min_node"] = p.min_node;
  j["seed"] = p.seed;
  return j;
}

BoostParams params_from_obj(const json& j) {
  BoostParams p;
  p.n_trees = j.at("n_trees").get<int>();
  p.shrinkage = j.at("shrinkage").get<double>();
  p.depth = j.at("depth").get<int>();
  p.bag_fraction = j.at("bag_fraction").get<double>();
  p.min_node = j.at("min_node").get<int>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

template <typename Fn>
auto guarded(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw DataError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string tree_to_json(const Tree& t) {
  json j = tree_to_obj(t);
  j["format_version"] = kFormatVersion;
  return j.dump(2);
}

Tree tree_from_json(const std::string& text) {
  return guarded("tree", [&] {
    const json j = json::parse(text);
    check_version(j, "tree", true);
    return tree_from_obj(j);
  });
}

std::string scaling_to_json(const ScalingParams& p) {
  json j = scaling_to_obj(p);
  j["format_version"] = kFormatVersion;
  return j.dump(2);
}

ScalingParams scaling_from_json(const std::string& text) {
  return guarded("scaling", [&] {
    const json j = json::parse(text);
    check_version(j, "scaling", true);
    return scaling_from_obj(j);
  });
}

std::string foldplan_to_json(const FoldPlan& f) {
  json j;
  j["format_version"] = kFormatVersion;
  j["k"] = f.k;
  j["seed"] = f.seed;
  j["assignment"] = f.assignment;
  return j.dump(2);
}

FoldPlan foldplan_from_json(const std::string& text) {
  return guarded("fold plan", [&] {
    const json j = json::parse(text);
    check_version(j, "fold plan", true);
    FoldPlan f;
    f.k = j.at("k").get<int>();
    f.seed = j.at("seed").get<std::uint64_t>();
    f.assignment = j.at("assignment").get<std::vector<int>>();
    if (f.k < 2) throw DataError("fold plan: k must be >= 2");
    for (int a : f.assignment)
      if (a < 0 || a >= f.k)
        throw DataError("fold plan: assignment outside 0..k-1");
    return f;
  });
}

std::string config_to_json(const ScenarioConfig& cfg) {
  json j;
  j["format_version"] = kFormatVersion;
  j["n"] = cfg.n;
  j["p"] = cfg.p;
  j["q"] = cfg.q;
  j["n_active"] = cfg.n_active;
  j["transform"] = transform_name(cfg.transform);
  j["target_r2"] = cfg.target_r2;
  j["n_reps"] = cfg.n_reps;
  j["master_seed"] = cfg.master_seed;
  j["methods"] = cfg.methods;
  j["shrinkages"] = cfg.shrinkages;
  j["depths"] = cfg.depths;
  j["max_trees"] = cfg.max_trees;
  j["bag_fraction"] = cfg.bag_fraction;
  j["cv_folds"] = cfg.cv_folds;
  j["min_node"] = cfg.min_node;
  j["cp_grid"] = cfg.cp_grid;
  j["k_prune"] = cfg.k_prune;
  j["n_boot"] = cfg.n_boot;
  j["wilks_alpha"] = cfg.wilks_alpha;
  j["threads"] = cfg.threads;
  return j.dump(2);
}

ScenarioConfig config_from_json(const std::string& text) {
  return guarded("scenario", [&] {
    const json j = json::parse(text);
    check_version(j, "scenario", false);
    ScenarioConfig cfg;  // defaults fill whatever the file leaves out
    cfg.n = j.value("n", cfg.n);
    cfg.p = j.value("p", cfg.p);
    cfg.q = j.value("q", cfg.q);
    cfg.n_active = j.value("n_active", cfg.n_active);
    if (j.contains("transform"))
      cfg.transform = transform_from_name(j.at("transform").get<std::string>());
    cfg.target_r2 = j.value("target_r2", cfg.target_r2);
    cfg.n_reps = j.value("n_reps", cfg.n_reps);
    cfg.master_seed = j.value("master_seed", cfg.master_seed);
    cfg.methods = j.value("methods", cfg.methods);
    cfg.shrinkages = j.value("shrinkages", cfg.shrinkages);
    cfg.depths = j.value("depths", cfg.depths);
    cfg.max_trees = j.value("max_trees", cfg.max_trees);
    cfg.bag_fraction = j.value("bag_fraction", cfg.bag_fraction);
    cfg.cv_folds = j.value("cv_folds", cfg.cv_folds);
    cfg.min_node = j.value("min_node", cfg.min_node);
    cfg.cp_grid = j.value("cp_grid", cfg.cp_grid);
    cfg.k_prune = j.value("k_prune", cfg.k_prune);
    cfg.n_boot = j.value("n_boot", cfg.n_boot);
    cfg.wilks_alpha = j.value("wilks_alpha", cfg.wilks_alpha);
    cfg.threads = j.value("threads", cfg.threads);
    validate_config(cfg);
    return cfg;
  });
}

std::string model_to_json(const MvModel& m, const ScalingParams& scaling) {
  json steps = json::array();
  for (const StepRecord& s : m.steps) {
    json js;
    js["step"] = s.step;
    js["outcome"] = s.outcome;
    js["selected_predictor"] = s.selected_predictor;
    js["discrepancy"] = s.discrepancy;
    js["raw_discrepancy"] = matrix_to_obj(s.raw_discrepancy);
    js["tree"] = tree_to_obj(s.tree);
    steps.push_back(std::move(js));
  }
  json j;
  j["format_version"] = kFormatVersion;
  j["params"] = params_to_obj(m.params);
  j["predictor_names"] = m.predictor_names;
  j["outcome_names"] = m.outcome_names;
  j["initial_means"] = m.initial_means;
  j["initial_covariance"] = matrix_to_obj(m.initial_covariance);
  j["final_covariance"] = matrix_to_obj(m.final_covariance);
  j["training_mse"] = m.training_mse;
  j["steps"] = std::move(steps);
  j["scaling"] = scaling_to_obj(scaling);
  return j.dump(2);
}

LoadedModel model_from_json(const std::string& text) {
  return guarded("model", [&] {
    const json j = json::parse(text);
    check_version(j, "model", true);
    LoadedModel out;
    MvModel& m = out.model;
    m.params = params_from_obj(j.at("params"));
    m.predictor_names = j.at("predictor_names").get<std::vector<std::string>>();
    m.outcome_names = j.at("outcome_names").get<std::vector<std::string>>();
    m.initial_means = j.at("initial_means").get<std::vector<double>>();
    m.initial_covariance = matrix_from_obj(j.at("initial_covariance"));
    m.final_covariance = matrix_from_obj(j.at("final_covariance"));
    m.training_mse = j.at("training_mse").get<std::vector<double>>();
    const std::size_t q = m.outcome_names.size();
    if (m.initial_means.size() != q ||
        m.initial_covariance.rows() != q || m.initial_covariance.cols() != q ||
        m.final_covariance.rows() != q || m.final_covariance.cols() != q)
      throw DataError("model: outcome dimensions disagree");
    for (const json& js : j.at("steps")) {
      StepRecord s;
      s.step = js.at("step").get<int>();
      s.outcome = js.at("outcome").get<int>();
      s.selected_predictor = js.at("selected_predictor").get<int>();
      s.discrepancy = js.at("discrepancy").get<double>();
      s.raw_discrepancy = matrix_from_obj(js.at("raw_discrepancy"));
      s.tree = tree_from_obj(js.at("tree"));
      if (s.outcome < 0 || s.outcome >= static_cast<int>(q))
        throw DataError("model: step outcome out of range");
      if (s.raw_discrepancy.rows() != q || s.raw_discrepancy.cols() != q)
        throw DataError("model: raw discrepancy shape mismatch");
      m.steps.push_back(std::move(s));
    }
    if (m.training_mse.size() != m.steps.size())
      throw DataError("model: training curve length differs from step count");
    out.scaling = scaling_from_obj(j.at("scaling"));
    return out;
  });
}

void save_model(const std::string& path, const MvModel& m,
                const ScalingParams& scaling) {
  write_text_file(path, model_to_json(m, scaling));
}

LoadedModel load_model(const std::string& path) {
  return model_from_json(read_text_file(path));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << text;
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace mvgb
