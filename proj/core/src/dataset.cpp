#include "mvgb/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "mvgb/csv.hpp"
#include "mvgb/rng.hpp"

namespace mvgb {

Dataset Dataset::from_columns(std::vector<Column> cols) {
  if (cols.empty()) throw DataError("dataset has no columns");
  Dataset d;
  d.n_rows_ = cols.front().values.size();
  std::set<std::string> seen;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const Column& c = cols[i];
    if (c.name.empty()) throw DataError("column " + std::to_string(i) + " has an empty name");
    if (!seen.insert(c.name).second) throw DataError("duplicate column name '" + c.name + "'");
    if (c.values.size() != d.n_rows_)
      throw DataError("column '" + c.name + "' has " + std::to_string(c.values.size()) +
                      " rows, expected " + std::to_string(d.n_rows_));
    for (double v : c.values)
      if (!std::isnan(v) && !std::isfinite(v))
        throw DataError("non-finite value in column '" + c.name + "'");
    if (c.role == Role::predictor)
      d.predictor_ids_.push_back(static_cast<int>(i));
    else
      d.outcome_ids_.push_back(static_cast<int>(i));
  }
  d.cols_ = std::move(cols);
  return d;
}

int Dataset::find(const std::string& name) const {
  for (std::size_t i = 0; i < cols_.size(); ++i)
    if (cols_[i].name == name) return static_cast<int>(i);
  return -1;
}

std::vector<std::string> Dataset::predictor_names() const {
  std::vector<std::string> out;
  out.reserve(predictor_ids_.size());
  for (int i : predictor_ids_) out.push_back(cols_[static_cast<std::size_t>(i)].name);
  return out;
}

std::vector<std::string> Dataset::outcome_names() const {
  std::vector<std::string> out;
  out.reserve(outcome_ids_.size());
  for (int i : outcome_ids_) out.push_back(cols_[static_cast<std::size_t>(i)].name);
  return out;
}

Dataset Dataset::select_rows(std::span<const int> rows) const {
  Dataset d;
  d.n_rows_ = rows.size();
  d.predictor_ids_ = predictor_ids_;
  d.outcome_ids_ = outcome_ids_;
  d.cols_.reserve(cols_.size());
  for (const Column& c : cols_) {
    Column out{c.name, c.role, {}};
    out.values.reserve(rows.size());
    for (int r : rows) {
      if (r < 0 || static_cast<std::size_t>(r) >= n_rows_)
        throw DataError("row index " + std::to_string(r) + " out of range");
      out.values.push_back(c.values[static_cast<std::size_t>(r)]);
    }
    d.cols_.push_back(std::move(out));
  }
  return d;
}

Matrix Dataset::outcome_matrix() const {
  Matrix m(n_rows_, outcome_ids_.size());
  for (std::size_t q = 0; q < outcome_ids_.size(); ++q) {
    const auto& v = cols_[static_cast<std::size_t>(outcome_ids_[q])].values;
    for (std::size_t i = 0; i < n_rows_; ++i) m(i, q) = v[i];
  }
  return m;
}

Matrix Dataset::predictor_matrix() const {
  Matrix m(n_rows_, predictor_ids_.size());
  for (std::size_t j = 0; j < predictor_ids_.size(); ++j) {
    const auto& v = cols_[static_cast<std::size_t>(predictor_ids_[j])].values;
    for (std::size_t i = 0; i < n_rows_; ++i) m(i, j) = v[i];
  }
  return m;
}

Dataset load_csv(const std::string& path, const std::vector<std::string>& outcome_names) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file '" + path + "'");
  const std::vector<std::string> header = split_csv_line(line);

  std::vector<Column> cols(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) {
    cols[i].name = header[i];
    cols[i].role = std::find(outcome_names.begin(), outcome_names.end(), header[i]) !=
                           outcome_names.end()
                       ? Role::outcome
                       : Role::predictor;
  }
  for (const std::string& name : outcome_names)
    if (std::find(header.begin(), header.end(), name) == header.end())
      throw DataError("outcome column '" + name + "' not found in '" + path + "'");

  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() && in.eof()) break;  // trailing newline
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw DataError("row " + std::to_string(row) + " of '" + path + "' has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(header.size()));
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const std::string where = "'" + path + "' row " + std::to_string(row) +
                                " column '" + header[i] + "'";
      const auto v = parse_cell(fields[i], where);
      cols[i].values.push_back(v ? *v : kMissing);
    }
  }
  if (row == 0) throw DataError("no data rows in '" + path + "'");
  return Dataset::from_columns(std::move(cols));
}

void write_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  std::vector<std::string> fields;
  fields.reserve(d.n_cols());
  for (std::size_t i = 0; i < d.n_cols(); ++i) fields.push_back(d.col(i).name);
  out << join_csv(fields) << '\n';
  for (std::size_t r = 0; r < d.n_rows(); ++r) {
    fields.clear();
    for (std::size_t i = 0; i < d.n_cols(); ++i)
      fields.push_back(format_double(d.col(i).values[r]));
    out << join_csv(fields) << '\n';
  }
  if (!out) throw DataError("write to '" + path + "' failed");
}

const ColumnScaling* ScalingParams::find(const std::string& name) const {
  for (const ColumnScaling& c : columns)
    if (c.name == name) return &c;
  return nullptr;
}

namespace {

// Mean and sample sd (n-1) over present values.
std::pair<double, double> present_mean_sd(const std::vector<double>& v,
                                          const std::string& name) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double x : v)
    if (!is_missing(x)) {
      sum += x;
      ++n;
    }
  if (n < 2)
    throw DataError("column '" + name + "' has fewer than two present values");
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double x : v)
    if (!is_missing(x)) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (sd == 0.0) throw DataError("column '" + name + "' is constant; cannot standardize");
  return {mean, sd};
}

bool selected(const Column& c, const ColumnSelect& which) {
  if (!which.names.empty())
    return std::find(which.names.begin(), which.names.end(), c.name) != which.names.end();
  return c.role == Role::predictor ? which.predictors : which.outcomes;
}

}  // namespace

std::pair<Dataset, ScalingParams> standardize(const Dataset& d, const ColumnSelect& which) {
  for (const std::string& name : which.names)
    if (d.find(name) < 0) throw DataError("standardize: no column named '" + name + "'");
  std::vector<Column> cols;
  cols.reserve(d.n_cols());
  ScalingParams params;
  for (std::size_t i = 0; i < d.n_cols(); ++i) {
    Column c = d.col(i);
    if (selected(c, which)) {
      const auto [mean, sd] = present_mean_sd(c.values, c.name);
      for (double& x : c.values)
        if (!is_missing(x)) x = (x - mean) / sd;
      params.columns.push_back({c.name, mean, sd});
    }
    cols.push_back(std::move(c));
  }
  return {Dataset::from_columns(std::move(cols)), std::move(params)};
}

Dataset apply_scaling(const Dataset& d, const ScalingParams& p) {
  std::vector<Column> cols;
  cols.reserve(d.n_cols());
  for (std::size_t i = 0; i < d.n_cols(); ++i) {
    Column c = d.col(i);
    if (const ColumnScaling* s = p.find(c.name)) {
      for (double& x : c.values)
        if (!is_missing(x)) x = (x - s->mean) / s->sd;
    }
    cols.push_back(std::move(c));
  }
  return Dataset::from_columns(std::move(cols));
}

Dataset invert_scaling(const Dataset& d, const ScalingParams& p) {
  std::vector<Column> cols;
  cols.reserve(d.n_cols());
  for (std::size_t i = 0; i < d.n_cols(); ++i) {
    Column c = d.col(i);
    if (const ColumnScaling* s = p.find(c.name)) {
      for (double& x : c.values)
        if (!is_missing(x)) x = x * s->sd + s->mean;
    }
    cols.push_back(std::move(c));
  }
  return Dataset::from_columns(std::move(cols));
}

std::vector<int> FoldPlan::fold_rows(int fold) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] == fold) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> FoldPlan::complement_rows(int fold) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] != fold) out.push_back(static_cast<int>(i));
  return out;
}

FoldPlan make_folds(std::size_t n_rows, int k, std::uint64_t seed) {
  if (k < 2) throw DataError("k-fold split needs k >= 2");
  if (static_cast<std::size_t>(k) > n_rows)
    throw DataError("k-fold split needs at least k rows");
  Rng rng(seed);
  std::vector<int> perm = rng.permutation(static_cast<int>(n_rows));
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignment.assign(n_rows, 0);
  // Deal shuffled rows round-robin so fold sizes differ by at most one.
  for (std::size_t i = 0; i < n_rows; ++i)
    plan.assignment[static_cast<std::size_t>(perm[i])] = static_cast<int>(i % static_cast<std::size_t>(k));
  return plan;
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& d, double test_fraction,
                                             std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw DataError("test fraction must be in (0, 1)");
  const std::size_t n = d.n_rows();
  auto n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(n)));
  if (n_test == 0 || n_test == n)
    throw DataError("test fraction leaves an empty split");
  Rng rng(seed);
  std::vector<int> perm = rng.permutation(static_cast<int>(n));
  std::vector<int> test_rows(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<int> train_rows(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  std::sort(test_rows.begin(), test_rows.end());
  std::sort(train_rows.begin(), train_rows.end());
  return {d.select_rows(train_rows), d.select_rows(test_rows)};
}

}  // namespace mvgb
