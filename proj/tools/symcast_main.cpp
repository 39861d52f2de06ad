// symcast: symptom-level forecasting pipeline on survey transition data.
// Subcommands cover the full flow: synthetic cohort generation, CSV
// ingestion, date-based splitting, cross-validated depth selection, SMOTE +
// GBDT training, imbalance-aware evaluation, and SHAP-based explanation.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 internal error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "symcast/baselines.hpp"
#include "symcast/domain.hpp"
#include "symcast/explain.hpp"
#include "symcast/gbdt.hpp"
#include "symcast/harness.hpp"
#include "symcast/metrics.hpp"
#include "symcast/sampling.hpp"
#include "symcast/synthgen.hpp"

namespace {

using namespace symcast;

std::vector<int> parse_depth_list(const std::string& spec) {
  std::vector<int> depths;
  std::size_t pos = 0;
  while (pos < spec.size()) {
    std::size_t comma = spec.find(',', pos);
    if (comma == std::string::npos) comma = spec.size();
    const std::string token = spec.substr(pos, comma - pos);
    const std::size_t dots = token.find("..");
    if (dots == std::string::npos) {
      depths.push_back(static_cast<int>(
          parse_int_field(token, "--depths")));
    } else {
      const int lo = static_cast<int>(
          parse_int_field(token.substr(0, dots), "--depths"));
      const int hi = static_cast<int>(
          parse_int_field(token.substr(dots + 2), "--depths"));
      require_data(lo >= 1 && hi >= lo, "--depths: bad range '" + token + "'");
      for (int d = lo; d <= hi; ++d) depths.push_back(d);
    }
    pos = comma + 1;
  }
  require_data(!depths.empty(), "--depths: empty list");
  return depths;
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  require_data(out.good(), "cannot write file: " + path);
  out << j.dump(1) << '\n';
  require_data(out.good(), "write failed: " + path);
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  require_data(in.good(), "cannot open file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return j;
}

struct GbdtFlags {
  int rounds = 100;
  double learning_rate = 0.1;
  int max_leaves = 31;
  int min_samples_leaf = 20;
  double l2_lambda = 1.0;
  double min_gain = 0.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--rounds", rounds, "Boosting rounds");
    cmd->add_option("--learning-rate", learning_rate, "Shrinkage per round");
    cmd->add_option("--max-leaves", max_leaves, "Leaf cap per tree");
    cmd->add_option("--min-samples-leaf", min_samples_leaf,
                    "Minimum samples per leaf");
    cmd->add_option("--l2", l2_lambda, "L2 regularization on leaf values");
    cmd->add_option("--min-gain", min_gain, "Minimum admissible split gain");
  }

  GbdtParams params(int depth, std::uint64_t seed) const {
    GbdtParams p;
    p.max_depth = depth;
    p.num_rounds = rounds;
    p.learning_rate = learning_rate;
    p.max_leaves = max_leaves;
    p.min_samples_per_leaf = min_samples_leaf;
    p.l2_lambda = l2_lambda;
    p.min_gain_to_split = min_gain;
    p.rng_seed = seed;
    return p;
  }
};

int cmd_synth(const std::string& config_path, const std::string& out_dir,
              std::optional<int> patients, std::optional<std::uint64_t> seed) {
  CohortConfig config;
  if (!config_path.empty())
    config = cohort_config_from_json(read_json_file(config_path));
  if (patients) config.n_patients = *patients;
  if (seed) config.rng_seed = *seed;
  config.validate();

  std::filesystem::create_directories(out_dir);
  const Cohort cohort = generate(config);
  write_profiles_csv(out_dir + "/profiles.csv", cohort.profiles);
  write_surveys_csv(out_dir + "/surveys.csv", cohort.surveys);
  const AuditReport report = audit(cohort, config.split_date);
  nlohmann::json j = to_json(report);
  j["config"] = to_json(config);
  write_json_file(out_dir + "/audit.json", j);
  std::cout << "wrote " << cohort.profiles.size() << " patients, "
            << cohort.surveys.size() << " surveys to " << out_dir
            << " (train fraction " << report.train_fraction << ")\n";
  return 0;
}

int cmd_ingest(const std::string& profiles_path, const std::string& surveys_path,
               const std::string& out_path) {
  const IngestResult ingested = ingest_csv(profiles_path, surveys_path);
  for (const auto& w : ingested.warnings) std::cerr << "warning: " << w << '\n';
  const auto transitions =
      build_transitions(ingested.profiles, ingested.surveys);
  write_transitions_csv(out_path, transitions);
  std::cout << "wrote " << transitions.size() << " transitions to " << out_path
            << '\n';
  return 0;
}

int cmd_split(const std::string& in_path, const std::string& date_str,
              const std::string& out_train, const std::string& out_test) {
  const auto examples = read_transitions_csv(in_path);
  const Date split_date = parse_date(date_str, "--date");
  const SplitDataset split = date_split(examples, split_date);
  write_transitions_csv(out_train, split.train);
  write_transitions_csv(out_test, split.test);
  std::cout << "train " << split.train.size() << ", test "
            << split.test.size() << " (split at " << split_date.to_string()
            << ")\n";
  return 0;
}

int cmd_cv(const std::string& train_path, const std::string& variant_str,
           const std::string& depths_str, std::uint64_t seed,
           const std::string& out_path, const GbdtFlags& flags, int folds,
           int jobs, int smote_k) {
  const auto train = read_transitions_csv(train_path);
  for (const auto& e : train)
    require_data(!e.synthetic,
                 "cv: input contains synthetic rows; pass the original "
                 "training transitions");
  const ModelVariant variant = parse_variant(variant_str);
  const std::vector<int> depths = parse_depth_list(depths_str);
  SmoteConfig smote;
  smote.k = smote_k;
  smote.rng_seed = seed;
  const CvResult result =
      cv_depth_sweep(train, variant, depths, flags.params(1, seed), smote,
                     folds, seed, jobs);
  nlohmann::json j = to_json(result);
  j["variant"] = to_string(variant);
  j["seed"] = seed;
  write_json_file(out_path, j);
  std::cout << "selected depth " << result.selected_depth << " (mean WMAE ";
  for (std::size_t d = 0; d < result.depths.size(); ++d)
    if (result.depths[d] == result.selected_depth)
      std::cout << result.mean_wmae[d];
  std::cout << ") -> " << out_path << '\n';
  return 0;
}

int cmd_train(const std::string& train_path, const std::string& variant_str,
              int depth, bool use_smote, std::uint64_t seed,
              const std::string& out_path, const GbdtFlags& flags, int smote_k,
              const std::string& dump_balanced) {
  const auto train = read_transitions_csv(train_path);
  for (const auto& e : train)
    require_data(!e.synthetic,
                 "train: input contains synthetic rows; pass the original "
                 "training transitions");
  const ModelVariant variant = parse_variant(variant_str);
  std::vector<TransitionExample> training = train;
  if (use_smote) {
    SmoteConfig smote;
    smote.k = smote_k;
    smote.rng_seed = seed;
    OversampleResult balanced =
        oversample(train, target_symptom(variant), smote);
    for (const auto& w : balanced.warnings)
      std::cerr << "warning: " << w << '\n';
    training = std::move(balanced.examples);
    if (!dump_balanced.empty())
      write_transitions_csv(dump_balanced, training,
                            /*with_synthetic_col=*/true);
  }
  const RawMatrix matrix = to_matrix(training, variant);
  const GbdtModel model =
      train_gbdt(matrix, flags.params(depth, seed), to_string(variant));
  for (const auto& w : model.warnings) std::cerr << "warning: " << w << '\n';
  save_model(model, out_path);
  std::cout << "trained " << to_string(variant) << " on " << matrix.n_rows
            << " rows (depth " << depth << ", " << model.completed_rounds()
            << " rounds) -> " << out_path << '\n';
  return 0;
}

int cmd_evaluate(const std::vector<std::string>& model_paths,
                 const std::string& test_path, const std::string& baselines,
                 const std::string& report_path, const std::string& table_path) {
  require_data(!model_paths.empty() && model_paths.size() <= 2,
               "evaluate: pass one or two --model files");
  const auto test = read_transitions_csv(test_path);
  require_data(!test.empty(), "evaluate: empty test set");

  std::vector<GbdtModel> models;
  for (const auto& p : model_paths) models.push_back(load_model(p));
  const ModelVariant first_variant = parse_variant(models[0].variant_tag);
  const Symptom symptom = target_symptom(first_variant);
  for (const auto& m : models)
    require_data(target_symptom(parse_variant(m.variant_tag)) == symptom,
                 "evaluate: models target different symptoms");

  std::vector<int> truths(test.size());
  for (std::size_t i = 0; i < test.size(); ++i)
    truths[i] = target_level(test[i], symptom);

  std::vector<StrategyResult> strategies;
  std::size_t pos = 0;
  while (pos < baselines.size()) {
    std::size_t comma = baselines.find(',', pos);
    if (comma == std::string::npos) comma = baselines.size();
    const std::string name = baselines.substr(pos, comma - pos);
    pos = comma + 1;
    if (name.empty()) continue;
    std::vector<int> preds(test.size());
    if (name == "np") {
      // NP's dominant class comes from the first model's stored training
      // label distribution (ties go to the lowest level).
      int dominant = 0;
      for (int c = 1; c < models[0].num_classes; ++c)
        if (models[0].train_class_counts[c] >
            models[0].train_class_counts[dominant])
          dominant = c;
      for (auto& p : preds) p = dominant;
      strategies.push_back({"NP", evaluate(truths, preds)});
    } else if (name == "pv") {
      for (std::size_t i = 0; i < test.size(); ++i)
        preds[i] = pv_predict(test[i], symptom);
      strategies.push_back({"PV", evaluate(truths, preds)});
    } else {
      throw DataError("evaluate: unknown baseline '" + name +
                      "' (expected np, pv)");
    }
  }
  for (const auto& model : models) {
    const ModelVariant v = parse_variant(model.variant_tag);
    std::vector<int> preds(test.size());
    for (std::size_t i = 0; i < test.size(); ++i)
      preds[i] = model.predict_class(select_features(test[i], v));
    strategies.push_back({model.variant_tag, evaluate(truths, preds)});
  }

  nlohmann::json j;
  j["symptom"] = to_string(symptom);
  j["test"] = test_path;
  j["n_test"] = test.size();
  j["test_hash"] = dataset_hash(test);
  nlohmann::json per_strategy = nlohmann::json::object();
  for (const auto& s : strategies) per_strategy[s.name] = to_json(s.report);
  j["strategies"] = per_strategy;
  write_json_file(report_path, j);
  if (!table_path.empty()) write_table_csv(table_path, strategies);

  for (const auto& s : strategies)
    std::cout << s.name << " WMAE " << s.report.wmae << ", global MAE "
              << s.report.global_mae << '\n';
  return 0;
}

int cmd_explain(const std::string& model_path, const std::string& data_path,
                const std::string& out_path, std::size_t limit) {
  const GbdtModel model = load_model(model_path);
  const ModelVariant variant = parse_variant(model.variant_tag);
  auto rows = read_transitions_csv(data_path);
  require_data(!rows.empty(), "explain: empty data file");
  if (limit > 0 && rows.size() > limit) rows.resize(limit);
  const RawMatrix matrix = to_matrix(rows, variant);
  const ImportanceSummary summary = importance_summary(model, matrix);
  write_importance_csv(out_path, summary);
  std::cout << "wrote SHAP importance over " << matrix.n_rows << " rows to "
            << out_path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"symcast: symptom-level forecasting pipeline"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort");
  std::string synth_config, synth_out_dir = "data";
  std::optional<int> synth_patients;
  std::optional<std::uint64_t> synth_seed;
  synth->add_option("--config", synth_config, "Cohort config JSON");
  synth->add_option("--out-dir", synth_out_dir, "Output directory");
  synth->add_option("--patients", synth_patients, "Override patient count");
  synth->add_option("--seed", synth_seed, "Override RNG seed");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Build transitions from CSVs");
  std::string ingest_profiles, ingest_surveys, ingest_out;
  ingest->add_option("--profiles", ingest_profiles, "profiles.csv")->required();
  ingest->add_option("--surveys", ingest_surveys, "surveys.csv")->required();
  ingest->add_option("--out", ingest_out, "transitions.csv")->required();

  // split
  auto* split = app.add_subcommand("split", "Date-based train/test split");
  std::string split_in, split_date, split_train, split_test;
  split->add_option("--in", split_in, "transitions.csv")->required();
  split->add_option("--date", split_date, "Split date (YYYY-MM-DD)")->required();
  split->add_option("--out-train", split_train, "Train output")->required();
  split->add_option("--out-test", split_test, "Test output")->required();

  // cv
  auto* cv = app.add_subcommand("cv", "Cross-validated depth sweep");
  std::string cv_train, cv_variant, cv_depths = "1..25", cv_out;
  std::uint64_t cv_seed = 0;
  int cv_folds = 5, cv_jobs = 1, cv_smote_k = 5;
  GbdtFlags cv_flags;
  cv->add_option("--train", cv_train, "Training transitions CSV")->required();
  cv->add_option("--variant", cv_variant, "lp1|lp2|lt1|lt2")->required();
  cv->add_option("--depths", cv_depths, "Depth list, e.g. 1..25 or 2,4,8");
  cv->add_option("--seed", cv_seed, "RNG seed");
  cv->add_option("--out", cv_out, "cv.json output")->required();
  cv->add_option("--folds", cv_folds, "Fold count");
  cv->add_option("--jobs", cv_jobs, "Parallel (depth, fold) cells");
  cv->add_option("--smote-k", cv_smote_k, "SMOTE neighbor count");
  cv_flags.attach(cv);

  // train
  auto* train = app.add_subcommand("train", "Train a GBDT variant");
  std::string train_in, train_variant, train_out, train_dump;
  int train_depth = 0;
  bool train_smote = false;
  std::uint64_t train_seed = 0;
  int train_smote_k = 5;
  GbdtFlags train_flags;
  train->add_option("--train", train_in, "Training transitions CSV")->required();
  train->add_option("--variant", train_variant, "lp1|lp2|lt1|lt2")->required();
  train->add_option("--depth", train_depth, "Maximum tree depth")->required();
  train->add_flag("--smote", train_smote, "SMOTE-balance the training set");
  train->add_option("--seed", train_seed, "RNG seed");
  train->add_option("--out", train_out, "model.json output")->required();
  train->add_option("--smote-k", train_smote_k, "SMOTE neighbor count");
  train->add_option("--dump-balanced", train_dump,
                    "Also write the balanced training set (CSV with a "
                    "synthetic column)");
  train_flags.attach(train);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate on a test set");
  std::vector<std::string> eval_models;
  std::string eval_test, eval_baselines = "np,pv", eval_report = "report.json";
  std::string eval_table;
  evaluate->add_option("--model", eval_models, "Model file (repeat for two)")
      ->required();
  evaluate->add_option("--test", eval_test, "Test transitions CSV")->required();
  evaluate->add_option("--baselines", eval_baselines,
                       "Baselines to include (np,pv)");
  evaluate->add_option("--out", eval_report, "report.json output");
  evaluate->add_option("--table", eval_table, "table.csv output");

  // explain
  auto* explain = app.add_subcommand("explain", "SHAP feature importance");
  std::string explain_model, explain_data, explain_out = "shap.csv";
  std::size_t explain_limit = 0;
  explain->add_option("--model", explain_model, "Model file")->required();
  explain->add_option("--data", explain_data, "Transitions CSV")->required();
  explain->add_option("--out", explain_out, "shap.csv output");
  explain->add_option("--limit", explain_limit,
                      "Explain at most N rows (0 = all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed())
      return cmd_synth(synth_config, synth_out_dir, synth_patients, synth_seed);
    if (ingest->parsed())
      return cmd_ingest(ingest_profiles, ingest_surveys, ingest_out);
    if (split->parsed())
      return cmd_split(split_in, split_date, split_train, split_test);
    if (cv->parsed())
      return cmd_cv(cv_train, cv_variant, cv_depths, cv_seed, cv_out, cv_flags,
                    cv_folds, cv_jobs, cv_smote_k);
    if (train->parsed())
      return cmd_train(train_in, train_variant, train_depth, train_smote,
                       train_seed, train_out, train_flags, train_smote_k,
                       train_dump);
    if (evaluate->parsed())
      return cmd_evaluate(eval_models, eval_test, eval_baselines, eval_report,
                          eval_table);
    if (explain->parsed())
      return cmd_explain(explain_model, explain_data, explain_out,
                         explain_limit);
  } catch (const symcast::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const symcast::InternalError& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 4;
  }
  return 2;
}
