#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "symcast/baselines.hpp"
#include "symcast/csv.hpp"
#include "symcast/domain.hpp"
#include "symcast/errors.hpp"
#include "symcast/gbdt.hpp"
#include "symcast/metrics.hpp"
#include "symcast/random.hpp"
#include "symcast/sampling.hpp"

#include "json.hpp"

namespace symcast {

// Experimental protocol: patient-disjoint 5-fold CV over max_depth with SMOTE
// recomputed inside each fold's training portion, retraining at the selected
// depth on the SMOTE-balanced full training set, and a four-strategy
// evaluation (NP, PV, and both GBDT variants of the symptom) on the untouched
// test set.

// ---------------------------------------------------------------------------
// Folds
// ---------------------------------------------------------------------------

// Patient-disjoint fold assignment with near-equal transition counts:
// patients are shuffled (seeded), ordered by transition count, and greedily
// placed into the currently smallest fold.
inline std::vector<int> make_folds(std::span<const TransitionExample> train,
                                   int n_folds, std::uint64_t seed) {
  require_data(n_folds >= 2, "make_folds: need at least 2 folds");
  std::map<std::string, std::vector<std::size_t>> by_patient;
  for (std::size_t i = 0; i < train.size(); ++i)
    by_patient[train[i].patient_id].push_back(i);
  require_data(static_cast<int>(by_patient.size()) >= n_folds,
               "make_folds: fewer patients (" +
                   std::to_string(by_patient.size()) + ") than folds (" +
                   std::to_string(n_folds) + ")");

  struct Group {
    const std::string* id;
    const std::vector<std::size_t>* rows;
  };
  std::vector<Group> groups;
  groups.reserve(by_patient.size());
  for (const auto& [id, rows] : by_patient) groups.push_back({&id, &rows});

  Rng rng(mix_seed(seed, 0xF01D5u));
  for (std::size_t i = groups.size(); i > 1; --i)
    std::swap(groups[i - 1],
              groups[static_cast<std::size_t>(rng.uniform_int(0, i - 1))]);
  std::stable_sort(groups.begin(), groups.end(),
                   [](const Group& a, const Group& b) {
                     return a.rows->size() > b.rows->size();
                   });

  std::vector<std::size_t> load(n_folds, 0);
  std::vector<int> fold_of(train.size(), -1);
  for (const Group& g : groups) {
    int target = 0;
    for (int f = 1; f < n_folds; ++f)
      if (load[f] < load[target]) target = f;
    for (std::size_t row : *g.rows) fold_of[row] = target;
    load[target] += g.rows->size();
  }
  return fold_of;
}

// ---------------------------------------------------------------------------
// Cross-validated depth selection
// ---------------------------------------------------------------------------

struct CvResult {
  std::vector<int> depths;
  std::vector<std::vector<double>> fold_wmae;  // [depth][fold]
  std::vector<double> mean_wmae;               // per depth
  int selected_depth = 0;                      // argmin; ties -> smallest depth
  int n_folds = 5;
};

inline nlohmann::json to_json(const CvResult& r) {
  return nlohmann::json{{"depths", r.depths},
                        {"fold_wmae", r.fold_wmae},
                        {"mean_wmae", r.mean_wmae},
                        {"selected_depth", r.selected_depth},
                        {"n_folds", r.n_folds}};
}

namespace detail {

inline double wmae_of_predictions(std::span<const int> truths,
                                  std::span<const int> preds) {
  const EvalReport r = evaluate(truths, preds);
  return r.wmae;
}

// Runs `cells` tasks on `jobs` threads; results land in preassigned slots so
// the outcome is independent of scheduling.
inline void run_cells(std::size_t n_cells, int jobs,
                      const std::function<void(std::size_t)>& work) {
  if (jobs <= 1 || n_cells <= 1) {
    for (std::size_t i = 0; i < n_cells; ++i) work(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n_cells) return;
      work(i);
    }
  };
  std::vector<std::thread> threads;
  const int n_threads = std::min<int>(jobs, static_cast<int>(n_cells));
  threads.reserve(n_threads);
  for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
}

}  // namespace detail

// For each depth and fold: SMOTE on the fold-train portion only, train, and
// score WMAE on the held-out fold with the fold's own class counts.
inline CvResult cv_depth_sweep(const std::vector<TransitionExample>& train,
                               ModelVariant variant,
                               std::span<const int> depths,
                               const GbdtParams& base_params,
                               const SmoteConfig& smote, int n_folds,
                               std::uint64_t seed, int jobs = 1) {
  require_data(!depths.empty(), "cv_depth_sweep: empty depth list");
  for (const auto& e : train)
    check(!e.synthetic, "cv_depth_sweep: synthetic rows in CV input");

  const Symptom symptom = target_symptom(variant);
  const std::vector<int> fold_of = make_folds(train, n_folds, seed);

  // Fold-train balanced sets are depth-independent; compute them once.
  std::vector<RawMatrix> fold_train_matrix(n_folds);
  std::vector<RawMatrix> fold_valid_matrix(n_folds);
  for (int f = 0; f < n_folds; ++f) {
    std::vector<TransitionExample> fold_train;
    std::vector<TransitionExample> fold_valid;
    for (std::size_t i = 0; i < train.size(); ++i)
      (fold_of[i] == f ? fold_valid : fold_train).push_back(train[i]);
    require_data(!fold_train.empty() && !fold_valid.empty(),
                 "cv_depth_sweep: empty fold");
    SmoteConfig fold_smote = smote;
    fold_smote.rng_seed = mix_seed(smote.rng_seed, 0xCFu, f);
    const OversampleResult balanced =
        oversample(fold_train, symptom, fold_smote);
    for (const auto& e : fold_valid)
      check(!e.synthetic, "cv_depth_sweep: synthetic row in validation fold");
    fold_train_matrix[f] = to_matrix(balanced.examples, variant);
    fold_valid_matrix[f] = to_matrix(fold_valid, variant);
  }

  CvResult result;
  result.depths.assign(depths.begin(), depths.end());
  result.n_folds = n_folds;
  result.fold_wmae.assign(depths.size(), std::vector<double>(n_folds, 0.0));

  const std::size_t n_cells = depths.size() * static_cast<std::size_t>(n_folds);
  detail::run_cells(n_cells, jobs, [&](std::size_t cell) {
    const std::size_t d = cell / n_folds;
    const int f = static_cast<int>(cell % n_folds);
    GbdtParams params = base_params;
    params.max_depth = depths[d];
    params.rng_seed = mix_seed(seed, depths[d], f);
    const GbdtModel model =
        train_gbdt(fold_train_matrix[f], params, to_string(variant));
    const RawMatrix& valid = fold_valid_matrix[f];
    std::vector<int> preds(valid.n_rows);
    for (std::size_t i = 0; i < valid.n_rows; ++i)
      preds[i] = model.predict_class(valid.row(i));
    result.fold_wmae[d][f] =
        detail::wmae_of_predictions(valid.labels, preds);
  });

  result.mean_wmae.resize(depths.size());
  for (std::size_t d = 0; d < depths.size(); ++d) {
    double sum = 0.0;
    for (int f = 0; f < n_folds; ++f) sum += result.fold_wmae[d][f];
    result.mean_wmae[d] = sum / n_folds;
  }
  result.selected_depth = result.depths[0];
  double best = result.mean_wmae[0];
  for (std::size_t d = 1; d < depths.size(); ++d) {
    if (result.mean_wmae[d] < best ||
        (result.mean_wmae[d] == best &&
         result.depths[d] < result.selected_depth)) {
      best = result.mean_wmae[d];
      result.selected_depth = result.depths[d];
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Full experiment
// ---------------------------------------------------------------------------

struct StrategyResult {
  std::string name;
  EvalReport report;
};

struct ExperimentReport {
  Symptom symptom = Symptom::pain;
  Date split_date;
  std::size_t n_train = 0, n_test = 0;
  std::uint64_t test_hash = 0;
  std::vector<StrategyResult> strategies;  // NP, PV, variant1, variant2
  CvResult cv_variant1, cv_variant2;
  GbdtParams params;  // base params (max_depth is per-variant via CV)
  std::uint64_t seed = 0;
  GbdtModel model_variant1, model_variant2;
};

inline std::pair<ModelVariant, ModelVariant> variants_for(Symptom s) {
  return s == Symptom::pain
             ? std::make_pair(ModelVariant::LP1, ModelVariant::LP2)
             : std::make_pair(ModelVariant::LT1, ModelVariant::LT2);
}

inline ExperimentReport run_experiment(const SplitDataset& split,
                                       Symptom symptom,
                                       const GbdtParams& base_params,
                                       const SmoteConfig& smote,
                                       std::span<const int> depths,
                                       std::uint64_t seed, int jobs = 1) {
  require_data(!split.train.empty(), "run_experiment: empty training set");
  require_data(!split.test.empty(), "run_experiment: empty test set");
  for (const auto& e : split.train)
    check(!e.synthetic, "run_experiment: synthetic rows in training input");
  for (const auto& e : split.test)
    check(!e.synthetic, "run_experiment: synthetic rows in test input");

  ExperimentReport report;
  report.symptom = symptom;
  report.split_date = split.split_date;
  report.n_train = split.train.size();
  report.n_test = split.test.size();
  report.params = base_params;
  report.seed = seed;
  report.test_hash = dataset_hash(split.test);

  std::vector<int> truths(split.test.size());
  for (std::size_t i = 0; i < split.test.size(); ++i)
    truths[i] = target_level(split.test[i], symptom);

  // Baselines learn from the original (unbalanced) training labels.
  std::vector<int> train_labels(split.train.size());
  for (std::size_t i = 0; i < split.train.size(); ++i)
    train_labels[i] = target_level(split.train[i], symptom);
  const NaivePrior np = np_fit(train_labels);
  {
    std::vector<int> preds(split.test.size());
    for (std::size_t i = 0; i < split.test.size(); ++i)
      preds[i] = np_predict(np, split.test[i]);
    report.strategies.push_back({"NP", evaluate(truths, preds)});
  }
  {
    std::vector<int> preds(split.test.size());
    for (std::size_t i = 0; i < split.test.size(); ++i)
      preds[i] = pv_predict(split.test[i], symptom);
    report.strategies.push_back({"PV", evaluate(truths, preds)});
  }

  // Both GBDT variants share the symptom's balanced training set.
  SmoteConfig full_smote = smote;
  full_smote.rng_seed = mix_seed(smote.rng_seed, 0xF111u);
  const OversampleResult balanced =
      oversample(split.train, symptom, full_smote);

  const auto [v1, v2] = variants_for(symptom);
  auto run_variant = [&](ModelVariant v, CvResult& cv_out, GbdtModel& model_out) {
    cv_out = cv_depth_sweep(split.train, v, depths, base_params, smote,
                            /*n_folds=*/5, mix_seed(seed, static_cast<int>(v)),
                            jobs);
    GbdtParams params = base_params;
    params.max_depth = cv_out.selected_depth;
    params.rng_seed = mix_seed(seed, 0xF17u, static_cast<int>(v));
    const RawMatrix matrix = to_matrix(balanced.examples, v);
    model_out = train_gbdt(matrix, params, to_string(v));
    std::vector<int> preds(split.test.size());
    for (std::size_t i = 0; i < split.test.size(); ++i)
      preds[i] = model_out.predict_class(select_features(split.test[i], v));
    report.strategies.push_back({to_string(v), evaluate(truths, preds)});
  };
  run_variant(v1, report.cv_variant1, report.model_variant1);
  run_variant(v2, report.cv_variant2, report.model_variant2);

  check(dataset_hash(split.test) == report.test_hash,
        "run_experiment: test set changed during the pipeline");
  return report;
}

// ---------------------------------------------------------------------------
// Report output
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const ExperimentReport& r) {
  nlohmann::json j;
  j["symptom"] = to_string(r.symptom);
  j["split_date"] = r.split_date.to_string();
  j["n_train"] = r.n_train;
  j["n_test"] = r.n_test;
  j["test_hash"] = r.test_hash;
  j["params"] = to_json(r.params);
  j["seed"] = r.seed;
  j["cv_variant1"] = to_json(r.cv_variant1);
  j["cv_variant2"] = to_json(r.cv_variant2);
  nlohmann::json strategies = nlohmann::json::object();
  for (const auto& s : r.strategies) strategies[s.name] = to_json(s.report);
  j["strategies"] = strategies;
  return j;
}

// Tables 2-3 layout: rows MAE_0..MAE_10 then WMAE; one column per strategy.
inline void write_table_csv(const std::string& path,
                            std::span<const StrategyResult> strategies) {
  CsvWriter w(path);
  std::vector<std::string> header = {"class"};
  for (const auto& s : strategies) header.push_back(s.name);
  w.write_row(header);
  for (int c = 0; c < kNumLevels; ++c) {
    std::vector<std::string> row = {std::to_string(c)};
    for (const auto& s : strategies) {
      auto it = s.report.per_class_mae.find(c);
      row.push_back(it == s.report.per_class_mae.end()
                        ? std::string{}
                        : format_double(it->second));
    }
    w.write_row(row);
  }
  std::vector<std::string> last = {"WMAE"};
  for (const auto& s : strategies) last.push_back(format_double(s.report.wmae));
  w.write_row(last);
  w.close();
}

}  // namespace symcast
