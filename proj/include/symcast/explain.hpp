#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "symcast/csv.hpp"
#include "symcast/errors.hpp"
#include "symcast/gbdt.hpp"

namespace symcast {

// Path-dependent TreeSHAP: exact per-feature attribution of each class score,
// with conditional expectations weighted by training-set node covers. The
// attribution lives in pre-softmax (log-prior + tree score) space, where
// local accuracy is exact: base_c + sum_f phi_{c,f} = predicted score_c.

struct ShapAttribution {
  std::vector<double> base;               // per class: E[score] over training
  std::vector<std::vector<double>> phi;   // [class][feature]
};

namespace detail {

struct PathElement {
  int feature = -1;     // -1 for the root placeholder
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double pweight = 0.0;
};

class ShapPath {
 public:
  void extend(double pz, double po, int pi) {
    const int l = static_cast<int>(elems_.size());
    elems_.push_back({pi, pz, po, l == 0 ? 1.0 : 0.0});
    for (int i = l - 1; i >= 0; --i) {
      elems_[i + 1].pweight +=
          po * elems_[i].pweight * (i + 1) / static_cast<double>(l + 1);
      elems_[i].pweight =
          pz * elems_[i].pweight * (l - i) / static_cast<double>(l + 1);
    }
  }

  void unwind(int i0) {
    const int l = static_cast<int>(elems_.size());
    const double z = elems_[i0].zero_fraction;
    const double o = elems_[i0].one_fraction;
    double n = elems_[l - 1].pweight;
    for (int j = l - 2; j >= i0; --j) {
      if (o != 0.0) {
        const double t = elems_[j].pweight;
        elems_[j].pweight = n * l / ((j + 1) * o);
        n = t - elems_[j].pweight * z * (l - (j + 1)) / static_cast<double>(l);
      } else {
        elems_[j].pweight =
            elems_[j].pweight * l / (z * (l - (j + 1)));
      }
    }
    for (int j = i0; j < l - 1; ++j) {
      elems_[j].feature = elems_[j + 1].feature;
      elems_[j].zero_fraction = elems_[j + 1].zero_fraction;
      elems_[j].one_fraction = elems_[j + 1].one_fraction;
    }
    elems_.pop_back();
  }

  // Total weight the path would carry after unwinding element i0, without
  // mutating the path.
  double unwound_weight_sum(int i0) const {
    const int l = static_cast<int>(elems_.size());
    const double z = elems_[i0].zero_fraction;
    const double o = elems_[i0].one_fraction;
    double sum = 0.0;
    double n = elems_[l - 1].pweight;
    if (o != 0.0) {
      for (int j = l - 2; j >= i0; --j) {
        const double w = n * l / ((j + 1) * o);
        sum += w;
        n = elems_[j].pweight - w * z * (l - (j + 1)) / static_cast<double>(l);
      }
    } else {
      for (int j = l - 2; j >= i0; --j)
        sum += elems_[j].pweight * l / (z * (l - (j + 1)));
    }
    for (int j = 0; j < i0; ++j) sum += elems_[j].pweight;
    return sum;
  }

  int find_feature(int feature) const {
    for (int i = 1; i < static_cast<int>(elems_.size()); ++i)
      if (elems_[i].feature == feature) return i;
    return -1;
  }

  int size() const { return static_cast<int>(elems_.size()); }
  const PathElement& operator[](int i) const { return elems_[i]; }

 private:
  std::vector<PathElement> elems_;
};

inline void shap_recurse(const GbdtModel& model, const Tree& tree, int node_id,
                         std::span<const double> row, ShapPath path,
                         double pz, double po, int pi,
                         std::span<double> phi) {
  path.extend(pz, po, pi);
  const TreeNode& node = tree.nodes[node_id];
  if (node.is_leaf()) {
    for (int i = 1; i < path.size(); ++i) {
      const double w = path.unwound_weight_sum(i);
      phi[path[i].feature] +=
          w * (path[i].one_fraction - path[i].zero_fraction) * node.value;
    }
    return;
  }
  const int bin = model.bin_of(node.feature, row[node.feature]);
  const bool goes_left = tree.routes_left(node, bin);
  const int hot = goes_left ? node.left : node.right;
  const int cold = goes_left ? node.right : node.left;

  double iz = 1.0, io = 1.0;
  const int k = path.find_feature(node.feature);
  if (k >= 0) {
    iz = path[k].zero_fraction;
    io = path[k].one_fraction;
    path.unwind(k);
  }
  const double cover = static_cast<double>(node.cover);
  shap_recurse(model, tree, hot, row, path,
               iz * tree.nodes[hot].cover / cover, io, node.feature, phi);
  shap_recurse(model, tree, cold, row, path,
               iz * tree.nodes[cold].cover / cover, 0.0, node.feature, phi);
}

}  // namespace detail

inline ShapAttribution tree_shap(const GbdtModel& model,
                                 std::span<const double> row) {
  check(row.size() == model.schema.size(),
        "tree_shap: feature vector does not match model schema");
  require_data(model.has_covers,
               "tree_shap: model lacks stored cover counts; retrain (or "
               "re-export) the model with covers");
  ShapAttribution out;
  out.base = model.base_scores;
  out.phi.assign(model.num_classes,
                 std::vector<double>(model.schema.size(), 0.0));
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    const int cls = static_cast<int>(t) % model.num_classes;
    const Tree& tree = model.trees[t];
    std::vector<double> phi(model.schema.size(), 0.0);
    detail::shap_recurse(model, tree, 0, row, detail::ShapPath{}, 1.0, 1.0,
                         -1, phi);
    for (std::size_t f = 0; f < phi.size(); ++f)
      out.phi[cls][f] += model.params.learning_rate * phi[f];
    out.base[cls] +=
        model.params.learning_rate * model.expected_tree_value(tree);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregate importance
// ---------------------------------------------------------------------------

struct ImportanceRow {
  std::string feature;
  int cls = 0;
  double mean_abs_shap = 0.0;
  double total_gain = 0.0;  // per feature, repeated across its class rows
};

struct ImportanceSummary {
  std::vector<ImportanceRow> rows;  // sorted by per-feature total, class asc
  std::vector<double> feature_total_mean_abs;  // indexed like model schema
  std::vector<double> feature_total_gain;
};

inline ImportanceSummary importance_summary(const GbdtModel& model,
                                            const RawMatrix& sample) {
  require_data(sample.n_rows >= 1, "importance_summary: empty sample");
  check(sample.n_cols == model.schema.size(),
        "importance_summary: sample does not match model schema");
  const std::size_t nf = model.schema.size();

  std::vector<std::vector<double>> mean_abs(
      model.num_classes, std::vector<double>(nf, 0.0));
  for (std::size_t r = 0; r < sample.n_rows; ++r) {
    const ShapAttribution a = tree_shap(model, sample.row(r));
    for (int c = 0; c < model.num_classes; ++c)
      for (std::size_t f = 0; f < nf; ++f)
        mean_abs[c][f] += std::abs(a.phi[c][f]);
  }
  for (auto& row : mean_abs)
    for (double& v : row) v /= static_cast<double>(sample.n_rows);

  ImportanceSummary out;
  out.feature_total_gain.assign(nf, 0.0);
  for (const Tree& tree : model.trees)
    for (const TreeNode& node : tree.nodes)
      if (!node.is_leaf()) out.feature_total_gain[node.feature] += node.gain;

  out.feature_total_mean_abs.assign(nf, 0.0);
  for (std::size_t f = 0; f < nf; ++f)
    for (int c = 0; c < model.num_classes; ++c)
      out.feature_total_mean_abs[f] += mean_abs[c][f];

  std::vector<std::size_t> order(nf);
  for (std::size_t f = 0; f < nf; ++f) order[f] = f;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return out.feature_total_mean_abs[a] > out.feature_total_mean_abs[b];
  });
  for (std::size_t f : order)
    for (int c = 0; c < model.num_classes; ++c)
      out.rows.push_back({model.schema[f].name, c, mean_abs[c][f],
                          out.feature_total_gain[f]});
  return out;
}

inline void write_importance_csv(const std::string& path,
                                 const ImportanceSummary& summary) {
  CsvWriter w(path);
  w.write_row({"feature", "class", "mean_abs_shap", "total_gain"});
  for (const auto& r : summary.rows)
    w.write_row({r.feature, std::to_string(r.cls),
                 format_double(r.mean_abs_shap), format_double(r.total_gain)});
  w.close();
}

}  // namespace symcast
