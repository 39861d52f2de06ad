#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "symcast/errors.hpp"
#include "symcast/tabular.hpp"

#include "json.hpp"

namespace symcast {

// Histogram-based gradient-boosted trees with leaf-wise (best-first) growth
// and a multiclass softmax objective: one tree per class per boosting round,
// second-order split gains, quantile-binned continuous features (<= 255 bins)
// and one bin per category for categorical features.

inline constexpr int kMaxBins = 255;

struct GbdtParams {
  int max_depth = 6;
  int num_rounds = 100;
  double learning_rate = 0.1;
  int max_leaves = 31;
  int min_samples_per_leaf = 20;
  double l2_lambda = 1.0;
  double min_gain_to_split = 0.0;
  std::uint64_t rng_seed = 0;

  void validate() const {
    require_data(max_depth >= 1, "max_depth must be >= 1");
    require_data(num_rounds >= 0, "num_rounds must be >= 0");
    require_data(learning_rate > 0, "learning_rate must be positive");
    require_data(max_leaves >= 1, "max_leaves must be >= 1");
    require_data(min_samples_per_leaf >= 1,
                 "min_samples_per_leaf must be >= 1");
    require_data(l2_lambda > 0, "l2_lambda must be positive");
    require_data(min_gain_to_split >= 0, "min_gain_to_split must be >= 0");
  }
};

// ---------------------------------------------------------------------------
// Binning
// ---------------------------------------------------------------------------

struct BinnedDataset {
  std::size_t n_rows = 0;
  std::vector<FeatureInfo> schema;
  std::vector<std::vector<double>> boundaries;  // per feature; empty for categorical
  std::vector<std::vector<std::uint8_t>> bins;  // column-major [feature][row]
  std::vector<int> labels;

  int n_features() const { return static_cast<int>(schema.size()); }

  int n_bins(int f) const {
    return schema[f].kind == FeatureKind::categorical
               ? schema[f].n_categories
               : static_cast<int>(boundaries[f].size()) + 1;
  }
};

inline int bin_of_value(double v, const std::vector<double>& boundaries,
                        const FeatureInfo& info) {
  if (info.kind == FeatureKind::categorical) {
    int c = static_cast<int>(std::llround(v));
    if (c < 0) c = 0;
    if (c >= info.n_categories) c = info.n_categories - 1;
    return c;
  }
  // Index of the first boundary > v; out-of-range values clamp to the first
  // or last bin by construction.
  return static_cast<int>(
      std::upper_bound(boundaries.begin(), boundaries.end(), v) -
      boundaries.begin());
}

// Continuous boundaries sit between distinct values: midpoints when there are
// few distinct values, quantile cut points otherwise.
inline std::vector<double> continuous_boundaries(std::vector<double> sorted,
                                                 int max_bins) {
  std::vector<double> distinct;
  for (double v : sorted)
    if (distinct.empty() || v != distinct.back()) distinct.push_back(v);
  std::vector<double> bounds;
  if (static_cast<int>(distinct.size()) <= max_bins) {
    for (std::size_t i = 0; i + 1 < distinct.size(); ++i)
      bounds.push_back(0.5 * (distinct[i] + distinct[i + 1]));
    return bounds;
  }
  const std::size_t n = sorted.size();
  for (int k = 1; k < max_bins; ++k) {
    const std::size_t pos = (n * static_cast<std::size_t>(k)) / max_bins;
    if (pos == 0 || pos >= n) continue;
    if (sorted[pos - 1] == sorted[pos]) continue;
    const double cut = 0.5 * (sorted[pos - 1] + sorted[pos]);
    if (bounds.empty() || cut > bounds.back()) bounds.push_back(cut);
  }
  return bounds;
}

inline BinnedDataset bin_features(const RawMatrix& raw,
                                  int max_bins = kMaxBins) {
  require_data(raw.n_rows >= 1, "bin_features: empty matrix");
  BinnedDataset out;
  out.n_rows = raw.n_rows;
  out.schema = raw.schema;
  out.labels = raw.labels;
  out.boundaries.resize(raw.n_cols);
  out.bins.resize(raw.n_cols);
  std::vector<double> col(raw.n_rows);
  for (std::size_t f = 0; f < raw.n_cols; ++f) {
    if (raw.schema[f].kind == FeatureKind::continuous) {
      for (std::size_t r = 0; r < raw.n_rows; ++r) col[r] = raw.at(r, f);
      std::sort(col.begin(), col.end());
      out.boundaries[f] = continuous_boundaries(col, max_bins);
      check(static_cast<int>(out.boundaries[f].size()) + 1 <= max_bins,
            "bin_features: bin count overflow");
    } else {
      require_data(raw.schema[f].n_categories >= 1 &&
                       raw.schema[f].n_categories <= max_bins,
                   "bin_features: bad category count for feature " +
                       raw.schema[f].name);
    }
    auto& column = out.bins[f];
    column.resize(raw.n_rows);
    for (std::size_t r = 0; r < raw.n_rows; ++r)
      column[r] = static_cast<std::uint8_t>(
          bin_of_value(raw.at(r, f), out.boundaries[f], raw.schema[f]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Softmax objective
// ---------------------------------------------------------------------------

inline void softmax_inplace(std::span<double> scores) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double s : scores) mx = std::max(mx, s);
  double sum = 0.0;
  for (double& s : scores) {
    s = std::exp(s - mx);
    sum += s;
  }
  for (double& s : scores) s /= sum;
}

inline std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> p(scores.begin(), scores.end());
  softmax_inplace(p);
  return p;
}

// Multiclass cross-entropy derivatives at the current scores:
// grad_c = p_c - 1[c == true], hess_c = p_c * (1 - p_c).
inline void softmax_grad_hess(std::span<const double> scores, int true_class,
                              std::span<double> grad, std::span<double> hess) {
  check(scores.size() == grad.size() && scores.size() == hess.size(),
        "softmax_grad_hess: size mismatch");
  std::vector<double> p = softmax(scores);
  for (std::size_t c = 0; c < p.size(); ++c) {
    grad[c] = p[c] - (static_cast<int>(c) == true_class ? 1.0 : 0.0);
    hess[c] = p[c] * (1.0 - p[c]);
  }
}

inline double cross_entropy(std::span<const double> scores, int true_class) {
  std::vector<double> p = softmax(scores);
  return -std::log(std::max(p[true_class], 1e-300));
}

// ---------------------------------------------------------------------------
// Split finding
// ---------------------------------------------------------------------------

struct HistBin {
  double g = 0.0;
  double h = 0.0;
  std::uint32_t n = 0;
};

// Per-node histograms for every feature, flattened into one buffer.
struct NodeHist {
  std::vector<HistBin> data;
  const std::vector<int>* offsets = nullptr;  // per-feature start index

  std::span<HistBin> feature(int f) {
    return {data.data() + (*offsets)[f],
            static_cast<std::size_t>((*offsets)[f + 1] - (*offsets)[f])};
  }
  std::span<const HistBin> feature(int f) const {
    return {data.data() + (*offsets)[f],
            static_cast<std::size_t>((*offsets)[f + 1] - (*offsets)[f])};
  }
};

inline std::vector<int> bin_offsets(const BinnedDataset& data) {
  std::vector<int> off(data.n_features() + 1, 0);
  for (int f = 0; f < data.n_features(); ++f)
    off[f + 1] = off[f] + data.n_bins(f);
  return off;
}

inline void build_histograms(const BinnedDataset& data,
                             std::span<const std::uint32_t> indices,
                             std::span<const double> grad,
                             std::span<const double> hess, NodeHist& out) {
  std::fill(out.data.begin(), out.data.end(), HistBin{});
  for (int f = 0; f < data.n_features(); ++f) {
    HistBin* bins = out.data.data() + (*out.offsets)[f];
    const std::uint8_t* col = data.bins[f].data();
    for (std::uint32_t i : indices) {
      HistBin& b = bins[col[i]];
      b.g += grad[i];
      b.h += hess[i];
      b.n += 1;
    }
  }
}

inline void subtract_histograms(const NodeHist& parent, const NodeHist& child,
                                NodeHist& out) {
  for (std::size_t i = 0; i < parent.data.size(); ++i) {
    out.data[i].g = parent.data[i].g - child.data[i].g;
    out.data[i].h = parent.data[i].h - child.data[i].h;
    out.data[i].n = parent.data[i].n - child.data[i].n;
  }
}

struct SplitCandidate {
  double gain = -std::numeric_limits<double>::infinity();
  int feature = -1;
  int threshold_bin = -1;                // continuous: left iff bin <= threshold
  std::vector<std::uint8_t> left_cats;   // categorical: bins routed left
  bool categorical = false;
  double g_left = 0.0, h_left = 0.0;
  std::uint32_t n_left = 0;
};

inline double split_gain(double gl, double hl, double gr, double hr,
                         double lambda) {
  const double g = gl + gr;
  const double h = hl + hr;
  return gl * gl / (hl + lambda) + gr * gr / (hr + lambda) -
         g * g / (h + lambda);
}

// Best admissible split over all features and bin thresholds of one node's
// histograms. Categorical features scan prefixes of the bins sorted by
// G/(H+lambda) (one-vs-rest ordering). Ties keep the lowest feature index,
// then the lowest threshold bin / shortest prefix.
inline std::optional<SplitCandidate> best_split_from_histograms(
    const BinnedDataset& data, const NodeHist& hist, double g_total,
    double h_total, std::uint32_t n_total, const GbdtParams& params) {
  SplitCandidate best;
  const double lambda = params.l2_lambda;
  const std::uint32_t min_n =
      static_cast<std::uint32_t>(params.min_samples_per_leaf);

  for (int f = 0; f < data.n_features(); ++f) {
    auto bins = hist.feature(f);
    if (data.schema[f].kind == FeatureKind::continuous) {
      double gl = 0.0, hl = 0.0;
      std::uint32_t nl = 0;
      for (int t = 0; t + 1 < static_cast<int>(bins.size()); ++t) {
        gl += bins[t].g;
        hl += bins[t].h;
        nl += bins[t].n;
        const std::uint32_t nr = n_total - nl;
        if (nl < min_n || nr < min_n) continue;
        const double gain =
            split_gain(gl, hl, g_total - gl, h_total - hl, lambda);
        if (gain > best.gain) {
          best.gain = gain;
          best.feature = f;
          best.threshold_bin = t;
          best.categorical = false;
          best.left_cats.clear();
          best.g_left = gl;
          best.h_left = hl;
          best.n_left = nl;
        }
      }
    } else {
      std::vector<int> cats;
      for (int b = 0; b < static_cast<int>(bins.size()); ++b)
        if (bins[b].n > 0) cats.push_back(b);
      if (cats.size() < 2) continue;
      std::stable_sort(cats.begin(), cats.end(), [&](int a, int b) {
        const double ka = bins[a].g / (bins[a].h + lambda);
        const double kb = bins[b].g / (bins[b].h + lambda);
        if (ka != kb) return ka < kb;
        return a < b;
      });
      double gl = 0.0, hl = 0.0;
      std::uint32_t nl = 0;
      for (std::size_t j = 0; j + 1 < cats.size(); ++j) {
        gl += bins[cats[j]].g;
        hl += bins[cats[j]].h;
        nl += bins[cats[j]].n;
        const std::uint32_t nr = n_total - nl;
        if (nl < min_n || nr < min_n) continue;
        const double gain =
            split_gain(gl, hl, g_total - gl, h_total - hl, lambda);
        if (gain > best.gain) {
          best.gain = gain;
          best.feature = f;
          best.threshold_bin = static_cast<int>(j);  // prefix length - 1
          best.categorical = true;
          best.left_cats.assign(cats.begin(), cats.begin() + j + 1);
          std::sort(best.left_cats.begin(), best.left_cats.end());
          best.g_left = gl;
          best.h_left = hl;
          best.n_left = nl;
        }
      }
    }
  }
  if (best.feature < 0 || best.gain <= params.min_gain_to_split)
    return std::nullopt;
  return best;
}

// Convenience wrapper used by tests: histograms built on the fly.
inline std::optional<SplitCandidate> find_best_split(
    const BinnedDataset& data, std::span<const std::uint32_t> indices,
    std::span<const double> grad, std::span<const double> hess,
    const GbdtParams& params) {
  const auto offsets = bin_offsets(data);
  NodeHist hist;
  hist.offsets = &offsets;
  hist.data.resize(offsets.back());
  build_histograms(data, indices, grad, hess, hist);
  double g = 0.0, h = 0.0;
  for (std::uint32_t i : indices) {
    g += grad[i];
    h += hess[i];
  }
  return best_split_from_histograms(data, hist, g, h,
                                    static_cast<std::uint32_t>(indices.size()),
                                    params);
}

// ---------------------------------------------------------------------------
// Trees
// ---------------------------------------------------------------------------

struct TreeNode {
  int feature = -1;  // -1: leaf
  int threshold_bin = -1;
  std::vector<std::uint8_t> left_cats;
  bool categorical = false;
  double value = 0.0;  // leaf score contribution (unscaled)
  double gain = 0.0;
  std::uint32_t cover = 0;  // training samples through this node
  int split_order = -1;     // order this split was executed in (internal only)
  int left = -1, right = -1;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  bool routes_left(const TreeNode& node, int bin) const {
    if (node.categorical)
      return std::binary_search(node.left_cats.begin(), node.left_cats.end(),
                                static_cast<std::uint8_t>(bin));
    return bin <= node.threshold_bin;
  }
};

struct GrowResult {
  Tree tree;
  // (node_id, begin, end) ranges into the permutation used during growth.
  std::vector<std::array<std::size_t, 3>> leaf_ranges;
};

// Best-first growth: repeatedly split the pending leaf with the globally
// largest admissible gain until the leaf cap, the depth cap, or gain
// exhaustion stops it. Leaf values are the Newton step -G/(H+lambda).
inline GrowResult grow_tree_leafwise(const BinnedDataset& data,
                                     std::vector<std::uint32_t>& perm,
                                     std::span<const double> grad,
                                     std::span<const double> hess,
                                     const GbdtParams& params) {
  check(!perm.empty(), "grow_tree_leafwise: empty sample set");
  const auto offsets = bin_offsets(data);
  const double lambda = params.l2_lambda;

  GrowResult out;
  auto& nodes = out.tree.nodes;

  struct Live {
    int node_id;
    std::size_t begin, end;
    int depth;
  };
  struct Pending {
    int node_id;
    std::size_t begin, end;
    int depth;
    double g, h;
    NodeHist hist;
    SplitCandidate best;
    std::uint64_t seq;
  };
  std::vector<Live> live;
  std::vector<Pending> pending;
  std::uint64_t next_seq = 0;

  auto make_leaf = [&](std::size_t begin, std::size_t end, int depth, double g,
                       double h) {
    TreeNode leaf;
    leaf.value = -g / (h + lambda);
    leaf.cover = static_cast<std::uint32_t>(end - begin);
    nodes.push_back(leaf);
    const int id = static_cast<int>(nodes.size()) - 1;
    live.push_back({id, begin, end, depth});
    return id;
  };

  // Queues the leaf for splitting if it is allowed to split and has an
  // admissible candidate; takes ownership of its histograms.
  auto consider = [&](int node_id, std::size_t begin, std::size_t end,
                      int depth, double g, double h, NodeHist&& hist) {
    if (depth >= params.max_depth) return;
    const std::size_t count = end - begin;
    if (count < 2 * static_cast<std::size_t>(params.min_samples_per_leaf))
      return;
    auto best = best_split_from_histograms(
        data, hist, g, h, static_cast<std::uint32_t>(count), params);
    if (!best) return;
    pending.push_back({node_id, begin, end, depth, g, h, std::move(hist),
                       std::move(*best), next_seq++});
  };

  double g_root = 0.0, h_root = 0.0;
  for (std::uint32_t i : perm) {
    g_root += grad[i];
    h_root += hess[i];
  }
  make_leaf(0, perm.size(), 0, g_root, h_root);
  {
    NodeHist root_hist;
    root_hist.offsets = &offsets;
    root_hist.data.resize(offsets.back());
    build_histograms(data, perm, grad, hess, root_hist);
    consider(0, 0, perm.size(), 0, g_root, h_root, std::move(root_hist));
  }

  int n_leaves = 1;
  int split_order = 0;
  while (n_leaves < params.max_leaves && !pending.empty()) {
    std::size_t pick = 0;
    for (std::size_t i = 1; i < pending.size(); ++i) {
      if (pending[i].best.gain > pending[pick].best.gain ||
          (pending[i].best.gain == pending[pick].best.gain &&
           pending[i].seq < pending[pick].seq))
        pick = i;
    }
    Pending node = std::move(pending[pick]);
    pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(pick));

    // Partition this leaf's index range by the split predicate.
    const SplitCandidate& sc = node.best;
    bool left_mask[kMaxBins] = {};
    if (sc.categorical)
      for (std::uint8_t c : sc.left_cats) left_mask[c] = true;
    const std::uint8_t* col = data.bins[sc.feature].data();
    auto mid_it = std::partition(
        perm.begin() + static_cast<std::ptrdiff_t>(node.begin),
        perm.begin() + static_cast<std::ptrdiff_t>(node.end),
        [&](std::uint32_t i) {
          return sc.categorical ? left_mask[col[i]]
                                : col[i] <= sc.threshold_bin;
        });
    const std::size_t mid =
        static_cast<std::size_t>(mid_it - perm.begin());
    check(mid - node.begin == sc.n_left,
          "grow_tree_leafwise: partition/count mismatch");

    const double g_right = node.g - sc.g_left;
    const double h_right = node.h - sc.h_left;
    const int left_id = make_leaf(node.begin, mid, node.depth + 1, sc.g_left,
                                  sc.h_left);
    const int right_id =
        make_leaf(mid, node.end, node.depth + 1, g_right, h_right);
    live.erase(std::find_if(live.begin(), live.end(), [&](const Live& l) {
      return l.node_id == node.node_id;
    }));

    TreeNode& parent = nodes[node.node_id];
    parent.feature = sc.feature;
    parent.threshold_bin = sc.threshold_bin;
    parent.categorical = sc.categorical;
    parent.left_cats = sc.left_cats;
    parent.gain = sc.gain;
    parent.value = 0.0;
    parent.split_order = split_order++;
    parent.left = left_id;
    parent.right = right_id;
    ++n_leaves;

    // Histograms: build the smaller child directly, derive the sibling by
    // subtraction from the parent.
    const std::size_t n_left = mid - node.begin;
    const std::size_t n_right = node.end - mid;
    NodeHist small, large;
    small.offsets = large.offsets = &offsets;
    small.data.resize(offsets.back());
    large.data.resize(offsets.back());
    const bool left_is_small = n_left <= n_right;
    const std::size_t sb = left_is_small ? node.begin : mid;
    const std::size_t se = left_is_small ? mid : node.end;
    build_histograms(
        data, std::span<const std::uint32_t>(perm.data() + sb, se - sb), grad,
        hess, small);
    subtract_histograms(node.hist, small, large);
    if (left_is_small) {
      consider(left_id, node.begin, mid, node.depth + 1, sc.g_left, sc.h_left,
               std::move(small));
      consider(right_id, mid, node.end, node.depth + 1, g_right, h_right,
               std::move(large));
    } else {
      consider(left_id, node.begin, mid, node.depth + 1, sc.g_left, sc.h_left,
               std::move(large));
      consider(right_id, mid, node.end, node.depth + 1, g_right, h_right,
               std::move(small));
    }
  }

  for (const Live& l : live)
    out.leaf_ranges.push_back({static_cast<std::size_t>(l.node_id), l.begin,
                               l.end});
  return out;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct GbdtModel {
  static constexpr int kFormatVersion = 1;

  int num_classes = 11;
  std::string variant_tag = "custom";
  GbdtParams params;
  std::vector<FeatureInfo> schema;
  std::vector<std::vector<double>> bin_boundaries;
  std::vector<double> base_scores;           // per-class log prior
  std::vector<std::int64_t> train_class_counts;
  std::vector<double> train_loss;  // cross-entropy; [0] is the prior-only loss
  std::vector<Tree> trees;         // round-major, class ascending within round
  bool has_covers = true;
  std::vector<std::string> warnings;

  int n_features() const { return static_cast<int>(schema.size()); }
  int completed_rounds() const {
    return static_cast<int>(trees.size()) / num_classes;
  }

  int bin_of(int f, double v) const {
    return bin_of_value(v, bin_boundaries[f], schema[f]);
  }

  double tree_value(const Tree& tree, std::span<const double> row) const {
    int id = 0;
    while (!tree.nodes[id].is_leaf()) {
      const TreeNode& node = tree.nodes[id];
      const int bin = bin_of(node.feature, row[node.feature]);
      id = tree.routes_left(node, bin) ? node.left : node.right;
    }
    return tree.nodes[id].value;
  }

  std::vector<double> predict_scores(std::span<const double> row) const {
    check(row.size() == schema.size(),
          "predict_scores: feature vector does not match model schema");
    std::vector<double> scores = base_scores;
    for (std::size_t t = 0; t < trees.size(); ++t)
      scores[t % num_classes] +=
          params.learning_rate * tree_value(trees[t], row);
    return scores;
  }

  // Argmax of the softmax probabilities; ties resolve to the lowest class.
  int predict_class(std::span<const double> row) const {
    const std::vector<double> scores = predict_scores(row);
    int best = 0;
    for (int c = 1; c < num_classes; ++c)
      if (scores[c] > scores[best]) best = c;
    return best;
  }

  // Cover-weighted mean leaf value; the tree's output expectation over the
  // training distribution. Needs stored covers.
  double expected_tree_value(const Tree& tree, int id = 0) const {
    const TreeNode& node = tree.nodes[id];
    if (node.is_leaf()) return node.value;
    const double cl = tree.nodes[node.left].cover;
    const double cr = tree.nodes[node.right].cover;
    return (cl * expected_tree_value(tree, node.left) +
            cr * expected_tree_value(tree, node.right)) /
           (cl + cr);
  }
};

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

inline GbdtModel train_gbdt(const RawMatrix& train, const GbdtParams& params,
                            const std::string& variant_tag = "custom",
                            int num_classes = 11) {
  params.validate();
  require_data(train.n_rows >= 1, "train_gbdt: empty training set");
  require_data(train.labels.size() == train.n_rows,
               "train_gbdt: labels missing");
  for (int y : train.labels)
    require_data(y >= 0 && y < num_classes,
                 "train_gbdt: label outside [0, num_classes)");

  GbdtModel model;
  model.num_classes = num_classes;
  model.variant_tag = variant_tag;
  model.params = params;
  model.schema = train.schema;

  BinnedDataset binned = bin_features(train);
  model.bin_boundaries = binned.boundaries;

  model.train_class_counts.assign(num_classes, 0);
  for (int y : train.labels) model.train_class_counts[y] += 1;
  // Log priors; absent classes get a half-count floor to stay finite.
  model.base_scores.resize(num_classes);
  const double n = static_cast<double>(train.n_rows);
  for (int c = 0; c < num_classes; ++c)
    model.base_scores[c] =
        std::log(std::max<double>(model.train_class_counts[c], 0.5) / n);

  int present = 0;
  for (int c = 0; c < num_classes; ++c)
    if (model.train_class_counts[c] > 0) ++present;
  if (present == 1) {
    model.warnings.push_back(
        "training set has a single class; model reduces to its base scores");
    return model;
  }

  const std::size_t nr = train.n_rows;
  std::vector<double> scores(nr * num_classes);
  for (std::size_t i = 0; i < nr; ++i)
    for (int c = 0; c < num_classes; ++c)
      scores[i * num_classes + c] = model.base_scores[c];

  auto mean_loss = [&]() {
    double total = 0.0;
    for (std::size_t i = 0; i < nr; ++i)
      total += cross_entropy(
          std::span<const double>(scores.data() + i * num_classes,
                                  num_classes),
          train.labels[i]);
    return total / static_cast<double>(nr);
  };
  model.train_loss.push_back(mean_loss());

  std::vector<double> probs(nr * num_classes);
  std::vector<double> grad(nr), hess(nr);
  std::vector<std::uint32_t> perm(nr);

  for (int round = 0; round < params.num_rounds; ++round) {
    probs = scores;
    for (std::size_t i = 0; i < nr; ++i)
      softmax_inplace(
          std::span<double>(probs.data() + i * num_classes, num_classes));

    for (int c = 0; c < num_classes; ++c) {
      for (std::size_t i = 0; i < nr; ++i) {
        const double p = probs[i * num_classes + c];
        grad[i] = p - (train.labels[i] == c ? 1.0 : 0.0);
        hess[i] = p * (1.0 - p);
      }
      for (std::size_t i = 0; i < nr; ++i)
        perm[i] = static_cast<std::uint32_t>(i);
      GrowResult grown = grow_tree_leafwise(binned, perm, grad, hess, params);
      for (const auto& [node_id, begin, end] : grown.leaf_ranges) {
        const double delta =
            params.learning_rate * grown.tree.nodes[node_id].value;
        for (std::size_t p = begin; p < end; ++p)
          scores[perm[p] * num_classes + c] += delta;
      }
      model.trees.push_back(std::move(grown.tree));
    }
    model.train_loss.push_back(mean_loss());
  }
  return model;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json node_to_json(const Tree& tree, int id) {
  const TreeNode& n = tree.nodes[id];
  nlohmann::json j;
  j["cover"] = n.cover;
  if (n.is_leaf()) {
    j["value"] = n.value;
    return j;
  }
  j["feature"] = n.feature;
  if (n.categorical)
    j["categories"] = n.left_cats;
  else
    j["threshold_bin"] = n.threshold_bin;
  j["gain"] = n.gain;
  j["split_order"] = n.split_order;
  j["left"] = node_to_json(tree, n.left);
  j["right"] = node_to_json(tree, n.right);
  return j;
}

inline int node_from_json(const nlohmann::json& j, Tree& tree,
                          bool& has_covers) {
  TreeNode n;
  if (j.contains("cover"))
    n.cover = j.at("cover").get<std::uint32_t>();
  else
    has_covers = false;
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back(n);
  if (j.contains("value")) {
    tree.nodes[id].value = j.at("value").get<double>();
    return id;
  }
  const int feature = j.at("feature").get<int>();
  const bool categorical = j.contains("categories");
  int threshold_bin = -1;
  std::vector<std::uint8_t> cats;
  if (categorical)
    cats = j.at("categories").get<std::vector<std::uint8_t>>();
  else
    threshold_bin = j.at("threshold_bin").get<int>();
  const double gain = j.value("gain", 0.0);
  const int split_order = j.value("split_order", -1);
  const int left = node_from_json(j.at("left"), tree, has_covers);
  const int right = node_from_json(j.at("right"), tree, has_covers);
  TreeNode& node = tree.nodes[id];
  node.feature = feature;
  node.categorical = categorical;
  node.threshold_bin = threshold_bin;
  node.left_cats = std::move(cats);
  node.gain = gain;
  node.split_order = split_order;
  node.left = left;
  node.right = right;
  return id;
}

}  // namespace detail

inline nlohmann::json to_json(const GbdtParams& p) {
  return nlohmann::json{{"max_depth", p.max_depth},
                        {"num_rounds", p.num_rounds},
                        {"learning_rate", p.learning_rate},
                        {"max_leaves", p.max_leaves},
                        {"min_samples_per_leaf", p.min_samples_per_leaf},
                        {"l2_lambda", p.l2_lambda},
                        {"min_gain_to_split", p.min_gain_to_split},
                        {"rng_seed", p.rng_seed}};
}

inline GbdtParams gbdt_params_from_json(const nlohmann::json& j) {
  GbdtParams p;
  p.max_depth = j.at("max_depth").get<int>();
  p.num_rounds = j.at("num_rounds").get<int>();
  p.learning_rate = j.at("learning_rate").get<double>();
  p.max_leaves = j.at("max_leaves").get<int>();
  p.min_samples_per_leaf = j.at("min_samples_per_leaf").get<int>();
  p.l2_lambda = j.at("l2_lambda").get<double>();
  p.min_gain_to_split = j.at("min_gain_to_split").get<double>();
  p.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  return p;
}

inline nlohmann::json to_json(const GbdtModel& m) {
  nlohmann::json j;
  j["format_version"] = GbdtModel::kFormatVersion;
  j["model"] = "gbdt-multiclass-softmax";
  j["variant"] = m.variant_tag;
  j["num_classes"] = m.num_classes;
  j["params"] = to_json(m.params);
  nlohmann::json schema = nlohmann::json::array();
  for (const auto& f : m.schema) {
    schema.push_back(
        {{"name", f.name},
         {"kind", f.kind == FeatureKind::categorical ? "categorical"
                                                     : "continuous"},
         {"n_categories", f.n_categories},
         {"integer_valued", f.integer_valued},
         {"lo", f.lo == -std::numeric_limits<double>::infinity() ? nullptr
                                                                 : nlohmann::json(f.lo)},
         {"hi", f.hi == std::numeric_limits<double>::infinity() ? nullptr
                                                                : nlohmann::json(f.hi)}});
  }
  j["schema"] = schema;
  j["bin_boundaries"] = m.bin_boundaries;
  j["base_scores"] = m.base_scores;
  j["train_class_counts"] = m.train_class_counts;
  j["train_loss"] = m.train_loss;
  if (!m.warnings.empty()) j["warnings"] = m.warnings;
  nlohmann::json trees = nlohmann::json::array();
  for (std::size_t t = 0; t < m.trees.size(); ++t) {
    trees.push_back({{"round", t / m.num_classes},
                     {"class", t % m.num_classes},
                     {"root", detail::node_to_json(m.trees[t], 0)}});
  }
  j["trees"] = trees;
  return j;
}

inline GbdtModel gbdt_model_from_json(const nlohmann::json& j) {
  require_data(j.value("format_version", -1) == GbdtModel::kFormatVersion,
               "model file: unsupported format_version");
  GbdtModel m;
  m.variant_tag = j.at("variant").get<std::string>();
  m.num_classes = j.at("num_classes").get<int>();
  m.params = gbdt_params_from_json(j.at("params"));
  for (const auto& f : j.at("schema")) {
    FeatureInfo info;
    info.name = f.at("name").get<std::string>();
    info.kind = f.at("kind").get<std::string>() == "categorical"
                    ? FeatureKind::categorical
                    : FeatureKind::continuous;
    info.n_categories = f.at("n_categories").get<int>();
    info.integer_valued = f.at("integer_valued").get<bool>();
    if (!f.at("lo").is_null()) info.lo = f.at("lo").get<double>();
    if (!f.at("hi").is_null()) info.hi = f.at("hi").get<double>();
    m.schema.push_back(std::move(info));
  }
  m.bin_boundaries =
      j.at("bin_boundaries").get<std::vector<std::vector<double>>>();
  m.base_scores = j.at("base_scores").get<std::vector<double>>();
  m.train_class_counts =
      j.at("train_class_counts").get<std::vector<std::int64_t>>();
  m.train_loss = j.at("train_loss").get<std::vector<double>>();
  if (j.contains("warnings"))
    m.warnings = j.at("warnings").get<std::vector<std::string>>();
  m.has_covers = true;
  for (const auto& t : j.at("trees")) {
    Tree tree;
    detail::node_from_json(t.at("root"), tree, m.has_covers);
    m.trees.push_back(std::move(tree));
  }
  require_data(m.trees.size() % m.num_classes == 0,
               "model file: incomplete boosting round");
  return m;
}

inline void save_model(const GbdtModel& m, const std::string& path) {
  std::ofstream out(path);
  require_data(out.good(), "cannot write model file: " + path);
  out << to_json(m).dump(1) << '\n';
  require_data(out.good(), "model write failed: " + path);
}

inline GbdtModel load_model(const std::string& path) {
  std::ifstream in(path);
  require_data(in.good(), "cannot open model file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("model file " + path + ": " + e.what());
  }
  try {
    return gbdt_model_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("model file " + path + ": " + e.what());
  }
}

}  // namespace symcast
