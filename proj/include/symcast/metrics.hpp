#pragma once

#include <array>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "symcast/csv.hpp"
#include "symcast/domain.hpp"
#include "symcast/errors.hpp"

#include "json.hpp"

namespace symcast {

// Imbalance-aware evaluation: per-class MAE, inverse-frequency class weights
// (weight 1 for the largest class), and their weighted mean (WMAE). Classes
// are grouped by TRUE level; levels absent from the data carry no weight and
// are excluded from both sums.

struct EvalReport {
  std::map<int, double> per_class_mae;   // MAE_c, present classes only
  std::map<int, int> class_counts;       // N_c
  std::map<int, double> class_weights;   // w_c = max N / N_c
  double wmae = 0.0;
  double unweighted_macro_mae = 0.0;  // plain mean of MAE_c
  double global_mae = 0.0;            // pooled over all samples
  std::array<std::array<int, kNumLevels>, kNumLevels> confusion{};  // [true][pred]
  std::size_t n_samples = 0;
};

inline std::map<int, double> mae_per_class(std::span<const int> truths,
                                           std::span<const int> predictions) {
  require_data(truths.size() == predictions.size(),
               "mae_per_class: length mismatch");
  std::map<int, double> abs_err_sum;
  std::map<int, int> counts;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    require_data(truths[i] >= 0 && truths[i] < kNumLevels &&
                     predictions[i] >= 0 && predictions[i] < kNumLevels,
                 "mae_per_class: level outside [0, 10]");
    abs_err_sum[truths[i]] += std::abs(truths[i] - predictions[i]);
    counts[truths[i]] += 1;
  }
  std::map<int, double> mae;
  for (const auto& [c, sum] : abs_err_sum) mae[c] = sum / counts[c];
  return mae;
}

inline std::map<int, double> class_weights(
    const std::map<int, int>& class_counts) {
  int max_count = 0;
  for (const auto& [c, n] : class_counts)
    if (n > max_count) max_count = n;
  require_data(max_count > 0, "class_weights: all counts zero");
  std::map<int, double> w;
  for (const auto& [c, n] : class_counts)
    if (n > 0) w[c] = static_cast<double>(max_count) / n;
  return w;
}

inline double wmae(const std::map<int, double>& per_class_mae,
                   const std::map<int, double>& weights) {
  require_data(!per_class_mae.empty(), "wmae: empty inputs");
  double num = 0.0, den = 0.0;
  for (const auto& [c, mae] : per_class_mae) {
    auto it = weights.find(c);
    require_data(it != weights.end(), "wmae: weight missing for class " +
                                          std::to_string(c));
    num += it->second * mae;
    den += it->second;
  }
  require_data(weights.size() == per_class_mae.size(),
               "wmae: key sets differ");
  return num / den;
}

inline EvalReport evaluate(std::span<const int> truths,
                           std::span<const int> predictions) {
  EvalReport r;
  r.per_class_mae = mae_per_class(truths, predictions);
  r.n_samples = truths.size();
  double total_abs = 0.0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    r.class_counts[truths[i]] += 1;
    r.confusion[truths[i]][predictions[i]] += 1;
    total_abs += std::abs(truths[i] - predictions[i]);
  }
  r.class_weights = class_weights(r.class_counts);
  r.wmae = wmae(r.per_class_mae, r.class_weights);
  double macro = 0.0;
  for (const auto& [c, mae] : r.per_class_mae) macro += mae;
  r.unweighted_macro_mae = macro / r.per_class_mae.size();
  r.global_mae = truths.empty() ? 0.0 : total_abs / truths.size();
  return r;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  auto maps = [](const auto& m) {
    nlohmann::json o = nlohmann::json::object();
    for (const auto& [k, v] : m) o[std::to_string(k)] = v;
    return o;
  };
  j["per_class_mae"] = maps(r.per_class_mae);
  j["class_counts"] = maps(r.class_counts);
  j["class_weights"] = maps(r.class_weights);
  j["wmae"] = r.wmae;
  j["unweighted_macro_mae"] = r.unweighted_macro_mae;
  j["global_mae"] = r.global_mae;
  j["n_samples"] = r.n_samples;
  nlohmann::json conf = nlohmann::json::array();
  for (const auto& row : r.confusion) conf.push_back(row);
  j["confusion"] = conf;
  return j;
}

// Flat CSV: one row per present class, then summary rows.
inline void write_eval_csv(const std::string& path, const EvalReport& r) {
  CsvWriter w(path);
  w.write_row({"row", "value"});
  for (const auto& [c, mae] : r.per_class_mae)
    w.write_row({"mae_" + std::to_string(c), format_double(mae)});
  w.write_row({"wmae", format_double(r.wmae)});
  w.write_row({"macro_mae", format_double(r.unweighted_macro_mae)});
  w.write_row({"global_mae", format_double(r.global_mae)});
  w.write_row({"n_samples", std::to_string(r.n_samples)});
  w.close();
}

}  // namespace symcast
