#include "mvgb/tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace mvgb {

int Tree::n_leaves() const {
  int n = 0;
  for (const TreeNode& node : nodes)
    if (node.is_leaf()) ++n;
  return n;
}

PredictorOrder build_predictor_order(const Dataset& d) {
  PredictorOrder po;
  po.order.resize(d.n_predictors());
  for (std::size_t j = 0; j < d.n_predictors(); ++j) {
    const std::vector<double>& x = d.predictor(j).values;
    std::vector<std::int32_t>& ord = po.order[j];
    ord.reserve(x.size());
    for (std::size_t r = 0; r < x.size(); ++r) {
      if (is_missing(x[r]))
        po.any_missing = true;
      else
        ord.push_back(static_cast<std::int32_t>(r));
    }
    std::sort(ord.begin(), ord.end(), [&x](std::int32_t a, std::int32_t b) {
      const double va = x[static_cast<std::size_t>(a)];
      const double vb = x[static_cast<std::size_t>(b)];
      return va < vb || (va == vb && a < b);
    });
  }
  return po;
}

namespace {

// A view of some node's rows inside one predictor's sorted order.
struct Seg {
  const std::int32_t* ptr = nullptr;
  int len = 0;
};

// Bump allocator for the row segments produced when a split partitions its
// node. Chunked so previously returned pointers never move.
class ChunkArena {
 public:
  std::int32_t* alloc(std::size_t n) {
    if (chunks_.empty() || used_ + n > chunks_.back().size()) {
      chunks_.emplace_back(std::max(n, kChunk));
      used_ = 0;
    }
    std::int32_t* p = chunks_.back().data() + used_;
    used_ += n;
    return p;
  }

 private:
  static constexpr std::size_t kChunk = 1u << 18;
  std::vector<std::vector<std::int32_t>> chunks_;
  std::size_t used_ = 0;
};

// A grown-but-unsplit leaf plus its best admissible candidate split.
struct OpenLeaf {
  int node_id = -1;
  Seg rows;               // every row routed here, routing order
  std::vector<Seg> ord;   // per predictor: node rows sorted by value
  // Best candidate found by eval_leaf; pred < 0 means no admissible split.
  double gain = 0.0;
  int pred = -1;
  double thr = 0.0;
};

struct SurrogateCand {
  Surrogate s;
  int agree = 0;
  int n_both = 0;
};

class Fitter {
 public:
  Fitter(const Dataset& d, const TargetView& targets, const TreeParams& p)
      : d_(d), targets_(targets), p_(p),
        n_targets_(static_cast<int>(targets.size())),
        n_pred_(static_cast<int>(d.n_predictors())) {
    xcols_.reserve(static_cast<std::size_t>(n_pred_));
    for (int j = 0; j < n_pred_; ++j)
      xcols_.push_back(d_.predictor(static_cast<std::size_t>(j)).values.data());
    side_.assign(d_.n_rows(), 0);
  }

  Tree run(Seg root_rows, std::vector<Seg> root_ord) {
    tree_.n_targets = n_targets_;
    append_node(root_rows);
    min_gain_abs_ = p_.min_gain_rel > 0.0 ? p_.min_gain_rel * tree_.nodes[0].sse : 0.0;

    OpenLeaf root;
    root.node_id = 0;
    root.rows = root_rows;
    root.ord = std::move(root_ord);
    eval_leaf(root);
    open_.push_back(std::move(root));

    int splits = 0;
    while (splits < p_.max_splits) {
      const int best = pick_best();
      if (best < 0) break;
      commit(best, splits + 1 < p_.max_splits);
      ++splits;
    }
    return std::move(tree_);
  }

 private:
  // Appends a leaf node with stats over `rows`; returns its id.
  int append_node(Seg rows) {
    TreeNode node;
    node.n_rows = rows.len;
    node.value.assign(static_cast<std::size_t>(n_targets_), 0.0);
    for (int t = 0; t < n_targets_; ++t) {
      const double* y = targets_[static_cast<std::size_t>(t)];
      double sum = 0.0;
      for (int k = 0; k < rows.len; ++k) sum += y[rows.ptr[k]];
      node.value[static_cast<std::size_t>(t)] = sum / rows.len;
    }
    double sse = 0.0;
    for (int t = 0; t < n_targets_; ++t) {
      const double* y = targets_[static_cast<std::size_t>(t)];
      const double mu = node.value[static_cast<std::size_t>(t)];
      for (int k = 0; k < rows.len; ++k) {
        const double dlt = y[rows.ptr[k]] - mu;
        sse += dlt * dlt;
      }
    }
    node.sse = sse;
    tree_.nodes.push_back(std::move(node));
    return static_cast<int>(tree_.nodes.size()) - 1;
  }

  bool admissible(double gain) const {
    return gain > 0.0 && gain >= min_gain_abs_;
  }

  // Finds the open leaf with the best admissible candidate. Ties break to the
  // lower predictor index, then the lower threshold, then the earlier leaf.
  int pick_best() const {
    int best = -1;
    for (std::size_t i = 0; i < open_.size(); ++i) {
      const OpenLeaf& l = open_[i];
      if (l.pred < 0 || !admissible(l.gain)) continue;
      if (best < 0) {
        best = static_cast<int>(i);
        continue;
      }
      const OpenLeaf& b = open_[static_cast<std::size_t>(best)];
      if (l.gain != b.gain) {
        if (l.gain > b.gain) best = static_cast<int>(i);
      } else if (l.pred != b.pred) {
        if (l.pred < b.pred) best = static_cast<int>(i);
      } else if (l.thr != b.thr) {
        if (l.thr < b.thr) best = static_cast<int>(i);
      } else if (l.node_id < b.node_id) {
        best = static_cast<int>(i);
      }
    }
    return best;
  }

  // Scans every predictor for the best split of this leaf. Candidate gains
  // are SSE reductions over the rows with a present value on the candidate
  // predictor, with deviations measured about the node mean.
  void eval_leaf(OpenLeaf& leaf) {
    leaf.pred = -1;
    leaf.gain = 0.0;
    if (leaf.rows.len < 2 * p_.min_node) return;
    const TreeNode& node = tree_.nodes[static_cast<std::size_t>(leaf.node_id)];
    for (int j = 0; j < n_pred_; ++j) {
      const Seg seg = leaf.ord[static_cast<std::size_t>(j)];
      const int K = seg.len;
      if (K < 2 * p_.min_node) continue;
      const double* x = xcols_[static_cast<std::size_t>(j)];
      if (n_targets_ == 1) {
        scan_single(leaf, j, seg, x, node.value[0]);
      } else {
        scan_multi(leaf, j, seg, x, node.value);
      }
    }
  }

  void scan_single(OpenLeaf& leaf, int j, Seg seg, const double* x, double mu) {
    const double* y = targets_[0];
    const int K = seg.len;
    double tot = 0.0;
    for (int k = 0; k < K; ++k) tot += y[seg.ptr[k]] - mu;
    const double base = tot * tot / K;
    double acc = 0.0;
    const int last = K - p_.min_node;  // boundaries allow k+1 in [min_node, K-min_node]
    for (int k = 0; k < last; ++k) {
      acc += y[seg.ptr[k]] - mu;
      const int nl = k + 1;
      if (nl < p_.min_node) continue;
      const double vk = x[seg.ptr[k]];
      const double vk1 = x[seg.ptr[k + 1]];
      if (!(vk < vk1)) continue;
      const double thr = (vk + vk1) * 0.5;
      if (!(thr < vk1)) continue;  // midpoint rounded onto the upper value
      const int nr = K - nl;
      const double rest = tot - acc;
      const double gain = acc * acc / nl + rest * rest / nr - base;
      if (gain > leaf.gain || leaf.pred < 0) update_best(leaf, gain, j, thr);
    }
  }

  void scan_multi(OpenLeaf& leaf, int j, Seg seg, const double* x,
                  const std::vector<double>& mu) {
    const int K = seg.len;
    tot_.assign(static_cast<std::size_t>(n_targets_), 0.0);
    for (int t = 0; t < n_targets_; ++t) {
      const double* y = targets_[static_cast<std::size_t>(t)];
      double s = 0.0;
      const double m = mu[static_cast<std::size_t>(t)];
      for (int k = 0; k < K; ++k) s += y[seg.ptr[k]] - m;
      tot_[static_cast<std::size_t>(t)] = s;
    }
    double base = 0.0;
    for (int t = 0; t < n_targets_; ++t)
      base += tot_[static_cast<std::size_t>(t)] * tot_[static_cast<std::size_t>(t)];
    base /= K;
    acc_.assign(static_cast<std::size_t>(n_targets_), 0.0);
    const int last = K - p_.min_node;
    for (int k = 0; k < last; ++k) {
      const std::int32_t r = seg.ptr[k];
      for (int t = 0; t < n_targets_; ++t)
        acc_[static_cast<std::size_t>(t)] +=
            targets_[static_cast<std::size_t>(t)][r] - mu[static_cast<std::size_t>(t)];
      const int nl = k + 1;
      if (nl < p_.min_node) continue;
      const double vk = x[seg.ptr[k]];
      const double vk1 = x[seg.ptr[k + 1]];
      if (!(vk < vk1)) continue;
      const double thr = (vk + vk1) * 0.5;
      if (!(thr < vk1)) continue;
      const int nr = K - nl;
      double gain = -base;
      for (int t = 0; t < n_targets_; ++t) {
        const double a = acc_[static_cast<std::size_t>(t)];
        const double rest = tot_[static_cast<std::size_t>(t)] - a;
        gain += a * a / nl + rest * rest / nr;
      }
      if (gain > leaf.gain || leaf.pred < 0) update_best(leaf, gain, j, thr);
    }
  }

  // Strict improvement keeps the first-seen candidate on exact ties, which
  // realizes the lower-predictor-then-lower-threshold tie break, because
  // predictors are scanned in index order and thresholds ascend within one.
  void update_best(OpenLeaf& leaf, double gain, int j, double thr) {
    if (leaf.pred >= 0 && !(gain > leaf.gain)) return;
    leaf.gain = gain;
    leaf.pred = j;
    leaf.thr = thr;
  }

  // Surrogate splits: mimic the primary routing using another predictor, so
  // rows missing the primary value can still be routed. Candidates are scored
  // by how many rows they route to the same side as the primary, over rows
  // present on both predictors, and must beat always-taking-the-majority.
  std::vector<Surrogate> find_surrogates(const OpenLeaf& leaf, int pred, double thr) {
    std::vector<SurrogateCand> cands;
    const double* xp = xcols_[static_cast<std::size_t>(pred)];
    for (int s = 0; s < n_pred_; ++s) {
      if (s == pred) continue;
      const Seg seg = leaf.ord[static_cast<std::size_t>(s)];
      if (seg.len == 0) continue;
      const double* xs = xcols_[static_cast<std::size_t>(s)];
      both_rows_.clear();
      int total_left = 0;
      for (int k = 0; k < seg.len; ++k) {
        const std::int32_t r = seg.ptr[k];
        if (is_missing(xp[r])) continue;
        const bool left = xp[r] <= thr;
        both_rows_.push_back(r);
        total_left += left ? 1 : 0;
      }
      const int n_both = static_cast<int>(both_rows_.size());
      if (n_both == 0) continue;
      const int total_right = n_both - total_left;
      const int baseline = std::max(total_left, total_right);

      int best_agree = -1;
      double best_thr = 0.0;
      bool best_same = true;
      int pref_left = 0;
      for (int k = 0; k + 1 < n_both; ++k) {
        const std::int32_t r = both_rows_[static_cast<std::size_t>(k)];
        pref_left += (xp[r] <= thr) ? 1 : 0;
        const double vk = xs[r];
        const double vk1 = xs[both_rows_[static_cast<std::size_t>(k + 1)]];
        if (!(vk < vk1)) continue;
        const double sthr = (vk + vk1) * 0.5;
        if (!(sthr < vk1)) continue;
        const int nl = k + 1;
        const int pref_right = nl - pref_left;
        const int agree_same = pref_left + (total_right - pref_right);
        const int agree_rev = pref_right + (total_left - pref_left);
        if (agree_same > best_agree) {
          best_agree = agree_same;
          best_thr = sthr;
          best_same = true;
        }
        if (agree_rev > best_agree) {
          best_agree = agree_rev;
          best_thr = sthr;
          best_same = false;
        }
      }
      if (best_agree <= baseline) continue;
      SurrogateCand c;
      c.s.predictor = s;
      c.s.threshold = best_thr;
      c.s.same_direction = best_same;
      c.s.agreement = static_cast<double>(best_agree) / n_both;
      c.agree = best_agree;
      c.n_both = n_both;
      cands.push_back(c);
    }
    std::sort(cands.begin(), cands.end(), [](const SurrogateCand& a, const SurrogateCand& b) {
      const double ra = a.s.agreement;
      const double rb = b.s.agreement;
      if (ra != rb) return ra > rb;
      return a.s.predictor < b.s.predictor;
    });
    if (static_cast<int>(cands.size()) > p_.n_surrogates)
      cands.resize(static_cast<std::size_t>(p_.n_surrogates));
    std::vector<Surrogate> out;
    out.reserve(cands.size());
    for (const SurrogateCand& c : cands) out.push_back(c.s);
    return out;
  }

  void commit(int open_idx, bool grow_children) {
    OpenLeaf leaf = std::move(open_[static_cast<std::size_t>(open_idx)]);
    if (open_idx + 1 != static_cast<int>(open_.size()))
      open_[static_cast<std::size_t>(open_idx)] = std::move(open_.back());
    open_.pop_back();

    const int pred = leaf.pred;
    const double thr = leaf.thr;
    const double* xp = xcols_[static_cast<std::size_t>(pred)];

    // Majority direction among rows with the primary value present.
    const Seg pseg = leaf.ord[static_cast<std::size_t>(pred)];
    int present_left = 0;
    for (int k = 0; k < pseg.len; ++k)
      present_left += (xp[pseg.ptr[k]] <= thr) ? 1 : 0;
    const bool majority_left = present_left >= pseg.len - present_left;

    std::vector<Surrogate> surrogates;
    if (p_.n_surrogates > 0) surrogates = find_surrogates(leaf, pred, thr);

    // Route every node row: primary, then surrogates in rank order, then the
    // majority direction.
    for (int k = 0; k < leaf.rows.len; ++k) {
      const std::int32_t r = leaf.rows.ptr[k];
      bool left;
      if (!is_missing(xp[r])) {
        left = xp[r] <= thr;
      } else {
        left = majority_left;
        for (const Surrogate& s : surrogates) {
          const double v = xcols_[static_cast<std::size_t>(s.predictor)][r];
          if (is_missing(v)) continue;
          const bool sl = v <= s.threshold;
          left = s.same_direction ? sl : !sl;
          break;
        }
      }
      side_[static_cast<std::size_t>(r)] = left ? 1 : 2;
    }

    // Partition the row list and every per-predictor order into child
    // segments; stable, so sorted order is preserved.
    auto partition = [&](Seg seg, Seg& out_l, Seg& out_r) {
      std::int32_t* dst = arena_.alloc(static_cast<std::size_t>(seg.len));
      int nl = 0;
      for (int k = 0; k < seg.len; ++k)
        if (side_[static_cast<std::size_t>(seg.ptr[k])] == 1) dst[nl++] = seg.ptr[k];
      int nr = nl;
      for (int k = 0; k < seg.len; ++k)
        if (side_[static_cast<std::size_t>(seg.ptr[k])] == 2) dst[nr++] = seg.ptr[k];
      out_l = {dst, nl};
      out_r = {dst + nl, seg.len - nl};
    };

    OpenLeaf lchild, rchild;
    partition(leaf.rows, lchild.rows, rchild.rows);
    lchild.ord.resize(static_cast<std::size_t>(n_pred_));
    rchild.ord.resize(static_cast<std::size_t>(n_pred_));
    for (int j = 0; j < n_pred_; ++j)
      partition(leaf.ord[static_cast<std::size_t>(j)],
                lchild.ord[static_cast<std::size_t>(j)],
                rchild.ord[static_cast<std::size_t>(j)]);

    lchild.node_id = append_node(lchild.rows);
    rchild.node_id = append_node(rchild.rows);

    TreeNode& node = tree_.nodes[static_cast<std::size_t>(leaf.node_id)];
    node.predictor = pred;
    node.threshold = thr;
    node.majority_left = majority_left;
    node.surrogates = std::move(surrogates);
    node.left = lchild.node_id;
    node.right = rchild.node_id;
    node.gain = node.sse - tree_.nodes[static_cast<std::size_t>(lchild.node_id)].sse -
                tree_.nodes[static_cast<std::size_t>(rchild.node_id)].sse;

    if (grow_children) {
      eval_leaf(lchild);
      eval_leaf(rchild);
      open_.push_back(std::move(lchild));
      open_.push_back(std::move(rchild));
    }
  }

  const Dataset& d_;
  const TargetView& targets_;
  TreeParams p_;
  int n_targets_;
  int n_pred_;
  std::vector<const double*> xcols_;
  ChunkArena arena_;
  Tree tree_;
  std::vector<OpenLeaf> open_;
  double min_gain_abs_ = 0.0;
  std::vector<std::uint8_t> side_;
  std::vector<double> tot_, acc_;
  std::vector<std::int32_t> both_rows_;
};

}  // namespace

RootView build_root_view(const Dataset& d, std::span<const int> rows,
                         const PredictorOrder* order) {
  if (rows.empty()) throw DataError("fit_tree: no rows");
  std::vector<std::uint8_t> member(d.n_rows(), 0);
  for (int r : rows) {
    if (r < 0 || static_cast<std::size_t>(r) >= d.n_rows())
      throw DataError("fit_tree: row index out of range");
    if (member[static_cast<std::size_t>(r)])
      throw DataError("fit_tree: duplicate row index " + std::to_string(r));
    member[static_cast<std::size_t>(r)] = 1;
  }

  RootView view;
  view.rows.assign(rows.begin(), rows.end());
  view.ord.resize(d.n_predictors());
  if (order != nullptr) {
    if (order->order.size() != d.n_predictors())
      throw DataError("fit_tree: predictor order does not match dataset");
    for (std::size_t j = 0; j < d.n_predictors(); ++j) {
      const auto& full = order->order[j];
      auto& ord = view.ord[j];
      ord.reserve(rows.size());
      for (std::int32_t r : full)
        if (member[static_cast<std::size_t>(r)]) ord.push_back(r);
    }
  } else {
    for (std::size_t j = 0; j < d.n_predictors(); ++j) {
      const std::vector<double>& x = d.predictor(j).values;
      auto& ord = view.ord[j];
      ord.reserve(rows.size());
      for (std::int32_t r : view.rows)
        if (!is_missing(x[static_cast<std::size_t>(r)])) ord.push_back(r);
      std::sort(ord.begin(), ord.end(), [&x](std::int32_t a, std::int32_t b) {
        const double va = x[static_cast<std::size_t>(a)];
        const double vb = x[static_cast<std::size_t>(b)];
        return va < vb || (va == vb && a < b);
      });
    }
  }
  return view;
}

Tree fit_tree_with_view(const Dataset& d, const RootView& view,
                        const TargetView& targets, const TreeParams& params) {
  if (targets.empty()) throw DataError("fit_tree: no targets");
  if (params.min_node < 1) throw DataError("fit_tree: min_node must be >= 1");
  for (const double* y : targets)
    for (std::int32_t r : view.rows)
      if (!std::isfinite(y[r]))
        throw NumericError("fit_tree: non-finite target value at row " + std::to_string(r));

  Fitter fitter(d, targets, params);
  Seg rows_seg{view.rows.data(), static_cast<int>(view.rows.size())};
  std::vector<Seg> ord_segs(d.n_predictors());
  for (std::size_t j = 0; j < d.n_predictors(); ++j)
    ord_segs[j] = {view.ord[j].data(), static_cast<int>(view.ord[j].size())};
  return fitter.run(rows_seg, std::move(ord_segs));
}

Tree fit_tree_to_targets(const Dataset& d, std::span<const int> rows,
                         const TargetView& targets, const TreeParams& params,
                         const PredictorOrder* order) {
  const RootView view = build_root_view(d, rows, order);
  return fit_tree_with_view(d, view, targets, params);
}

Tree fit_tree(const Dataset& d, std::span<const int> rows, const TreeParams& params) {
  if (d.n_outcomes() == 0) throw DataError("fit_tree: dataset has no outcome columns");
  TargetView targets;
  for (std::size_t q = 0; q < d.n_outcomes(); ++q)
    targets.push_back(d.outcome(q).values.data());
  return fit_tree_to_targets(d, rows, targets, params);
}

Tree fit_tree(const Dataset& d, std::span<const int> rows, int outcome,
              const TreeParams& params) {
  if (outcome < 0 || static_cast<std::size_t>(outcome) >= d.n_outcomes())
    throw DataError("fit_tree: outcome index out of range");
  TargetView targets{d.outcome(static_cast<std::size_t>(outcome)).values.data()};
  return fit_tree_to_targets(d, rows, targets, params);
}

const TreeNode& route_row(const Tree& t, const Dataset& d, int row,
                          const std::vector<int>* predictor_cols) {
  const TreeNode* node = &t.nodes[0];
  while (!node->is_leaf()) {
    auto value_of = [&](int pred) {
      const int col = predictor_cols != nullptr
                          ? (*predictor_cols)[static_cast<std::size_t>(pred)]
                          : d.predictor_ids()[static_cast<std::size_t>(pred)];
      return d.col(static_cast<std::size_t>(col)).values[static_cast<std::size_t>(row)];
    };
    const double x = value_of(node->predictor);
    bool left;
    if (!is_missing(x)) {
      left = x <= node->threshold;
    } else {
      left = node->majority_left;
      for (const Surrogate& s : node->surrogates) {
        const double v = value_of(s.predictor);
        if (is_missing(v)) continue;
        const bool sl = v <= s.threshold;
        left = s.same_direction ? sl : !sl;
        break;
      }
    }
    node = &t.nodes[static_cast<std::size_t>(left ? node->left : node->right)];
  }
  return *node;
}

Matrix predict_tree(const Tree& t, const Dataset& d, std::span<const int> rows,
                    const std::vector<int>* predictor_cols) {
  std::vector<int> all;
  if (rows.empty()) {
    all.resize(d.n_rows());
    for (std::size_t i = 0; i < d.n_rows(); ++i) all[i] = static_cast<int>(i);
    rows = all;
  }
  Matrix out(rows.size(), static_cast<std::size_t>(t.n_targets));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const TreeNode& leaf = route_row(t, d, rows[i], predictor_cols);
    for (int q = 0; q < t.n_targets; ++q)
      out(i, static_cast<std::size_t>(q)) = leaf.value[static_cast<std::size_t>(q)];
  }
  return out;
}

void predict_tree_into(const Tree& t, const Dataset& d, double* out) {
  for (std::size_t i = 0; i < d.n_rows(); ++i)
    out[i] = route_row(t, d, static_cast<int>(i)).value[0];
}

std::map<int, double> tree_influence(const Tree& t) {
  std::map<int, double> inf;
  for (const TreeNode& node : t.nodes)
    if (!node.is_leaf()) inf[node.predictor] += node.gain;
  return inf;
}

}  // namespace mvgb
