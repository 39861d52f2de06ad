#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "symcast/csv.hpp"
#include "symcast/dates.hpp"
#include "symcast/errors.hpp"
#include "symcast/tabular.hpp"

namespace symcast {

inline constexpr int kNumLevels = 11;  // ESAS scale 0..10

// ---------------------------------------------------------------------------
// Core clinical types
// ---------------------------------------------------------------------------

enum class Sex : int { male = 0, female = 1 };
enum class CancerType : int {
  breast = 0,
  head_and_neck = 1,
  lymphoma = 2,
  colorectal = 3
};
enum class Symptom { pain, tiredness };

inline const char* to_string(Sex s) {
  return s == Sex::male ? "male" : "female";
}

inline const char* to_string(CancerType t) {
  switch (t) {
    case CancerType::breast: return "breast";
    case CancerType::head_and_neck: return "head_and_neck";
    case CancerType::lymphoma: return "lymphoma";
    case CancerType::colorectal: return "colorectal";
  }
  return "?";
}

inline const char* to_string(Symptom s) {
  return s == Symptom::pain ? "pain" : "tiredness";
}

inline Sex parse_sex(const std::string& s, const std::string& context) {
  if (s == "male") return Sex::male;
  if (s == "female") return Sex::female;
  throw DataError(context + ": unknown sex '" + s + "'");
}

inline CancerType parse_cancer_type(const std::string& s,
                                    const std::string& context) {
  if (s == "breast") return CancerType::breast;
  if (s == "head_and_neck") return CancerType::head_and_neck;
  if (s == "lymphoma") return CancerType::lymphoma;
  if (s == "colorectal") return CancerType::colorectal;
  throw DataError(context + ": unknown cancer_type '" + s + "'");
}

// ESAS level, an integer in [0, 10]. Construction from anything else fails.
class SymptomLevel {
 public:
  SymptomLevel() = default;

  static SymptomLevel checked(long long v, const std::string& context = {}) {
    if (v < 0 || v > 10)
      throw DataError((context.empty() ? std::string("symptom level")
                                       : context) +
                      ": value " + std::to_string(v) + " outside [0, 10]");
    SymptomLevel l;
    l.value_ = static_cast<int>(v);
    return l;
  }

  int value() const { return value_; }

  friend auto operator<=>(const SymptomLevel&, const SymptomLevel&) = default;

 private:
  int value_ = 0;
};

struct SurveyRecord {
  std::string patient_id;
  Date survey_date;
  SymptomLevel pain;
  SymptomLevel tiredness;
};

struct PatientProfile {
  std::string patient_id;
  Sex sex = Sex::male;
  int age_at_diagnosis = 0;
  CancerType cancer_type = CancerType::breast;
  Date diagnosis_date;
};

// Predictor variables for one transition (previous visit -> current visit).
// `age` is age at diagnosis, constant per patient.
struct FeatureVector {
  Sex sex = Sex::male;
  int age = 0;
  CancerType cancer_type = CancerType::breast;
  std::int64_t days_since_diagnosis = 0;   // diagnosis -> target survey
  std::int64_t days_since_prev_survey = 1;  // previous -> target survey
  SymptomLevel prev_pain;
  SymptomLevel prev_tiredness;
};

struct TransitionExample {
  FeatureVector features;
  SymptomLevel target_pain;
  SymptomLevel target_tiredness;
  Date survey_date;  // the target visit's date; governs split membership
  std::string patient_id;
  bool synthetic = false;  // true for SMOTE-generated rows
};

struct SplitDataset {
  std::vector<TransitionExample> train;
  std::vector<TransitionExample> test;
  Date split_date;
};

// ---------------------------------------------------------------------------
// Feature schema and model variants
// ---------------------------------------------------------------------------

enum CanonicalFeature : int {
  kSexFeature = 0,
  kAgeFeature = 1,
  kCancerTypeFeature = 2,
  kDaysSinceDiagnosisFeature = 3,
  kDaysSincePrevSurveyFeature = 4,
  kPrevPainFeature = 5,
  kPrevTirednessFeature = 6,
};

inline const std::vector<FeatureInfo>& full_feature_schema() {
  static const std::vector<FeatureInfo> schema = {
      {"sex", FeatureKind::categorical, 2, false, 0, 1},
      {"age", FeatureKind::continuous, 0, true, 18, 93},
      {"cancer_type", FeatureKind::categorical, 4, false, 0, 3},
      {"days_since_diagnosis", FeatureKind::continuous, 0, true, 0, 1e9},
      {"days_since_prev_survey", FeatureKind::continuous, 0, true, 1, 1e9},
      {"prev_pain", FeatureKind::continuous, 0, true, 0, 10},
      {"prev_tiredness", FeatureKind::continuous, 0, true, 0, 10},
  };
  return schema;
}

inline double canonical_feature_value(const FeatureVector& f, int index) {
  switch (index) {
    case kSexFeature: return static_cast<double>(static_cast<int>(f.sex));
    case kAgeFeature: return static_cast<double>(f.age);
    case kCancerTypeFeature:
      return static_cast<double>(static_cast<int>(f.cancer_type));
    case kDaysSinceDiagnosisFeature:
      return static_cast<double>(f.days_since_diagnosis);
    case kDaysSincePrevSurveyFeature:
      return static_cast<double>(f.days_since_prev_survey);
    case kPrevPainFeature: return static_cast<double>(f.prev_pain.value());
    case kPrevTirednessFeature:
      return static_cast<double>(f.prev_tiredness.value());
  }
  throw InternalError("canonical_feature_value: bad index");
}

// LP*/LT* model variants: target symptom x feature set. The "1" variants use
// the five clinical variables plus the previous level of the predicted
// symptom only; the "2" variants use all seven features.
enum class ModelVariant { LP1, LP2, LT1, LT2 };

inline const char* to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::LP1: return "LP1";
    case ModelVariant::LP2: return "LP2";
    case ModelVariant::LT1: return "LT1";
    case ModelVariant::LT2: return "LT2";
  }
  return "?";
}

inline ModelVariant parse_variant(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  if (s == "LP1") return ModelVariant::LP1;
  if (s == "LP2") return ModelVariant::LP2;
  if (s == "LT1") return ModelVariant::LT1;
  if (s == "LT2") return ModelVariant::LT2;
  throw DataError("unknown model variant '" + s +
                  "' (expected lp1, lp2, lt1, or lt2)");
}

inline Symptom target_symptom(ModelVariant v) {
  return (v == ModelVariant::LP1 || v == ModelVariant::LP2) ? Symptom::pain
                                                            : Symptom::tiredness;
}

inline std::vector<int> variant_feature_indices(ModelVariant v) {
  switch (v) {
    case ModelVariant::LP1:
      return {kSexFeature, kAgeFeature, kCancerTypeFeature,
              kDaysSinceDiagnosisFeature, kDaysSincePrevSurveyFeature,
              kPrevPainFeature};
    case ModelVariant::LT1:
      return {kSexFeature, kAgeFeature, kCancerTypeFeature,
              kDaysSinceDiagnosisFeature, kDaysSincePrevSurveyFeature,
              kPrevTirednessFeature};
    case ModelVariant::LP2:
    case ModelVariant::LT2:
      return {kSexFeature,   kAgeFeature,  kCancerTypeFeature,
              kDaysSinceDiagnosisFeature,  kDaysSincePrevSurveyFeature,
              kPrevPainFeature,            kPrevTirednessFeature};
  }
  throw InternalError("variant_feature_indices: bad variant");
}

inline std::vector<FeatureInfo> variant_schema(ModelVariant v) {
  std::vector<FeatureInfo> out;
  for (int idx : variant_feature_indices(v))
    out.push_back(full_feature_schema()[idx]);
  return out;
}

inline int target_level(const TransitionExample& e, Symptom s) {
  return s == Symptom::pain ? e.target_pain.value()
                            : e.target_tiredness.value();
}

inline int prev_level(const TransitionExample& e, Symptom s) {
  return s == Symptom::pain ? e.features.prev_pain.value()
                            : e.features.prev_tiredness.value();
}

// Reduced feature row for one example under a variant.
inline std::vector<double> select_features(const TransitionExample& e,
                                           ModelVariant v) {
  std::vector<double> row;
  for (int idx : variant_feature_indices(v))
    row.push_back(canonical_feature_value(e.features, idx));
  return row;
}

inline RawMatrix to_matrix(std::span<const TransitionExample> examples,
                           ModelVariant v) {
  RawMatrix m;
  m.schema = variant_schema(v);
  m.n_cols = m.schema.size();
  m.reserve_rows(examples.size());
  const Symptom target = target_symptom(v);
  for (const auto& e : examples)
    m.push_row(select_features(e, v), target_level(e, target));
  return m;
}

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

struct IngestResult {
  std::vector<PatientProfile> profiles;
  std::vector<SurveyRecord> surveys;  // sorted by (patient_id, survey_date)
  std::vector<std::string> warnings;
};

inline const std::vector<std::string>& profiles_header() {
  static const std::vector<std::string> h = {"patient_id", "sex", "age",
                                             "cancer_type", "diagnosis_date"};
  return h;
}

inline const std::vector<std::string>& surveys_header() {
  static const std::vector<std::string> h = {"patient_id", "survey_date",
                                             "pain", "tiredness"};
  return h;
}

inline IngestResult ingest_csv(const std::string& profiles_path,
                               const std::string& surveys_path) {
  IngestResult result;

  CsvTable ptab = read_csv(profiles_path);
  expect_header(ptab, profiles_header(), profiles_path);
  std::unordered_set<std::string> profile_ids;
  for (std::size_t i = 0; i < ptab.rows.size(); ++i) {
    const auto& row = ptab.rows[i];
    const std::string ctx =
        profiles_path + ":" + std::to_string(ptab.line_numbers[i]);
    PatientProfile p;
    p.patient_id = row[0];
    require_data(!p.patient_id.empty(), ctx + ": empty patient_id");
    require_data(profile_ids.insert(p.patient_id).second,
                 ctx + ": duplicate patient_id '" + p.patient_id + "'");
    p.sex = parse_sex(row[1], ctx);
    p.age_at_diagnosis =
        static_cast<int>(parse_int_field(row[2], ctx + ": age"));
    if (p.age_at_diagnosis < 18 || p.age_at_diagnosis > 93)
      result.warnings.push_back(ctx + ": age " +
                                std::to_string(p.age_at_diagnosis) +
                                " outside observed range [18, 93]");
    p.cancer_type = parse_cancer_type(row[3], ctx);
    p.diagnosis_date = parse_date(row[4], ctx + ": diagnosis_date");
    result.profiles.push_back(std::move(p));
  }

  CsvTable stab = read_csv(surveys_path);
  expect_header(stab, surveys_header(), surveys_path);
  std::unordered_set<std::string> seen_visits;
  for (std::size_t i = 0; i < stab.rows.size(); ++i) {
    const auto& row = stab.rows[i];
    const std::string ctx =
        surveys_path + ":" + std::to_string(stab.line_numbers[i]);
    SurveyRecord s;
    s.patient_id = row[0];
    require_data(profile_ids.count(s.patient_id) > 0,
                 ctx + ": survey references unknown patient_id '" +
                     s.patient_id + "'");
    s.survey_date = parse_date(row[1], ctx + ": survey_date");
    s.pain = SymptomLevel::checked(parse_int_field(row[2], ctx + ": pain"),
                                   ctx + ": pain");
    s.tiredness = SymptomLevel::checked(
        parse_int_field(row[3], ctx + ": tiredness"), ctx + ": tiredness");
    const std::string key = s.patient_id + "|" + s.survey_date.to_string();
    require_data(seen_visits.insert(key).second,
                 ctx + ": duplicate survey for patient '" + s.patient_id +
                     "' on " + s.survey_date.to_string());
    result.surveys.push_back(std::move(s));
  }

  std::sort(result.surveys.begin(), result.surveys.end(),
            [](const SurveyRecord& a, const SurveyRecord& b) {
              if (a.patient_id != b.patient_id)
                return a.patient_id < b.patient_id;
              return a.survey_date < b.survey_date;
            });
  return result;
}

// ---------------------------------------------------------------------------
// Transition construction and split
// ---------------------------------------------------------------------------

// One supervised example per consecutive visit pair of a patient. Surveys
// must be sorted per patient; patients with one visit contribute nothing.
inline std::vector<TransitionExample> build_transitions(
    std::span<const PatientProfile> profiles,
    std::span<const SurveyRecord> surveys) {
  std::unordered_map<std::string, const PatientProfile*> by_id;
  for (const auto& p : profiles) by_id[p.patient_id] = &p;

  std::vector<TransitionExample> out;
  for (std::size_t i = 0; i + 1 < surveys.size(); ++i) {
    const SurveyRecord& prev = surveys[i];
    const SurveyRecord& cur = surveys[i + 1];
    if (prev.patient_id != cur.patient_id) continue;

    auto it = by_id.find(cur.patient_id);
    require_data(it != by_id.end(),
                 "build_transitions: unknown patient '" + cur.patient_id + "'");
    const PatientProfile& profile = *it->second;

    const std::int64_t gap = days_between(prev.survey_date, cur.survey_date);
    require_data(gap != 0, "build_transitions: patient '" + cur.patient_id +
                               "' has two surveys on " +
                               cur.survey_date.to_string());
    require_data(gap > 0, "build_transitions: surveys not sorted for patient '" +
                              cur.patient_id + "'");
    const std::int64_t since_diag =
        days_between(profile.diagnosis_date, cur.survey_date);
    require_data(since_diag >= 0,
                 "build_transitions: patient '" + cur.patient_id +
                     "' surveyed before diagnosis date");

    TransitionExample e;
    e.features.sex = profile.sex;
    e.features.age = profile.age_at_diagnosis;
    e.features.cancer_type = profile.cancer_type;
    e.features.days_since_diagnosis = since_diag;
    e.features.days_since_prev_survey = gap;
    e.features.prev_pain = prev.pain;
    e.features.prev_tiredness = prev.tiredness;
    e.target_pain = cur.pain;
    e.target_tiredness = cur.tiredness;
    e.survey_date = cur.survey_date;
    e.patient_id = cur.patient_id;
    out.push_back(std::move(e));
  }
  return out;
}

// Partition by the target visit's date: before split_date -> train,
// otherwise test. The previous visit may predate the split; the label is
// what must not leak.
inline SplitDataset date_split(std::span<const TransitionExample> examples,
                               Date split_date) {
  SplitDataset out;
  out.split_date = split_date;
  for (const auto& e : examples) {
    if (e.survey_date < split_date)
      out.train.push_back(e);
    else
      out.test.push_back(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transitions CSV
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& transitions_header() {
  static const std::vector<std::string> h = {
      "patient_id",          "survey_date",
      "sex",                 "age",
      "cancer_type",         "days_since_diagnosis",
      "days_since_prev_survey", "prev_pain",
      "prev_tiredness",      "target_pain",
      "target_tiredness"};
  return h;
}

inline void write_transitions_csv(const std::string& path,
                                  std::span<const TransitionExample> examples,
                                  bool with_synthetic_col = false) {
  CsvWriter w(path);
  auto header = transitions_header();
  if (with_synthetic_col) header.push_back("synthetic");
  w.write_row(header);
  for (const auto& e : examples) {
    std::vector<std::string> row = {
        e.patient_id,
        e.survey_date.to_string(),
        to_string(e.features.sex),
        std::to_string(e.features.age),
        to_string(e.features.cancer_type),
        std::to_string(e.features.days_since_diagnosis),
        std::to_string(e.features.days_since_prev_survey),
        std::to_string(e.features.prev_pain.value()),
        std::to_string(e.features.prev_tiredness.value()),
        std::to_string(e.target_pain.value()),
        std::to_string(e.target_tiredness.value())};
    if (with_synthetic_col) row.push_back(e.synthetic ? "1" : "0");
    w.write_row(row);
  }
  w.close();
}

inline std::vector<TransitionExample> read_transitions_csv(
    const std::string& path) {
  CsvTable tab = read_csv(path);
  bool has_synthetic = false;
  {
    auto expected = transitions_header();
    if (tab.header == expected) {
      has_synthetic = false;
    } else {
      expected.push_back("synthetic");
      expect_header(tab, expected, path);
      has_synthetic = true;
    }
  }
  std::vector<TransitionExample> out;
  out.reserve(tab.rows.size());
  for (std::size_t i = 0; i < tab.rows.size(); ++i) {
    const auto& row = tab.rows[i];
    const std::string ctx = path + ":" + std::to_string(tab.line_numbers[i]);
    TransitionExample e;
    e.patient_id = row[0];
    e.survey_date = parse_date(row[1], ctx + ": survey_date");
    e.features.sex = parse_sex(row[2], ctx);
    e.features.age = static_cast<int>(parse_int_field(row[3], ctx + ": age"));
    e.features.cancer_type = parse_cancer_type(row[4], ctx);
    e.features.days_since_diagnosis =
        parse_int_field(row[5], ctx + ": days_since_diagnosis");
    e.features.days_since_prev_survey =
        parse_int_field(row[6], ctx + ": days_since_prev_survey");
    require_data(e.features.days_since_prev_survey >= 1,
                 ctx + ": days_since_prev_survey must be >= 1");
    require_data(e.features.days_since_diagnosis >= 0,
                 ctx + ": days_since_diagnosis must be >= 0");
    e.features.prev_pain = SymptomLevel::checked(
        parse_int_field(row[7], ctx + ": prev_pain"), ctx + ": prev_pain");
    e.features.prev_tiredness =
        SymptomLevel::checked(parse_int_field(row[8], ctx + ": prev_tiredness"),
                              ctx + ": prev_tiredness");
    e.target_pain = SymptomLevel::checked(
        parse_int_field(row[9], ctx + ": target_pain"), ctx + ": target_pain");
    e.target_tiredness = SymptomLevel::checked(
        parse_int_field(row[10], ctx + ": target_tiredness"),
        ctx + ": target_tiredness");
    if (has_synthetic)
      e.synthetic = parse_int_field(row[11], ctx + ": synthetic") != 0;
    out.push_back(std::move(e));
  }
  return out;
}

// Canonical string form of one example; basis for hashing and the
// byte-for-byte determinism guarantee.
inline std::string serialize_example(const TransitionExample& e) {
  std::string s;
  s += e.patient_id;
  s += '|';
  s += e.survey_date.to_string();
  s += '|';
  s += to_string(e.features.sex);
  s += '|';
  s += std::to_string(e.features.age);
  s += '|';
  s += to_string(e.features.cancer_type);
  s += '|';
  s += std::to_string(e.features.days_since_diagnosis);
  s += '|';
  s += std::to_string(e.features.days_since_prev_survey);
  s += '|';
  s += std::to_string(e.features.prev_pain.value());
  s += '|';
  s += std::to_string(e.features.prev_tiredness.value());
  s += '|';
  s += std::to_string(e.target_pain.value());
  s += '|';
  s += std::to_string(e.target_tiredness.value());
  s += '|';
  s += e.synthetic ? '1' : '0';
  return s;
}

// FNV-1a over the canonical serialization; used by the harness to prove the
// test set is untouched across the pipeline.
inline std::uint64_t dataset_hash(std::span<const TransitionExample> examples) {
  std::uint64_t h = 1469598103934665603ULL;
  auto eat = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= '\n';
    h *= 1099511628211ULL;
  };
  for (const auto& e : examples) eat(serialize_example(e));
  return h;
}

}  // namespace symcast
