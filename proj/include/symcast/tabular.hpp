#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "symcast/errors.hpp"

namespace symcast {

enum class FeatureKind { continuous, categorical };

// Per-column description of a tabular feature. `lo`/`hi` bound the legal
// value range for integer-valued features (used when SMOTE rounds synthetic
// coordinates back into the feature space).
struct FeatureInfo {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
  int n_categories = 0;  // categorical only
  bool integer_valued = false;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

// Dense row-major feature matrix with optional integer class labels.
struct RawMatrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<double> values;      // n_rows * n_cols
  std::vector<FeatureInfo> schema;  // size n_cols
  std::vector<int> labels;          // size n_rows or empty

  double at(std::size_t r, std::size_t c) const {
    return values[r * n_cols + c];
  }
  double& at(std::size_t r, std::size_t c) { return values[r * n_cols + c]; }

  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * n_cols, n_cols};
  }

  void reserve_rows(std::size_t n) { values.reserve(n * n_cols); }

  void push_row(std::span<const double> row_values, int label) {
    check(row_values.size() == n_cols, "push_row: column count mismatch");
    values.insert(values.end(), row_values.begin(), row_values.end());
    labels.push_back(label);
    ++n_rows;
  }
};

}  // namespace symcast
