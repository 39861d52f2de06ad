#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "symcast/dates.hpp"
#include "symcast/domain.hpp"
#include "symcast/errors.hpp"
#include "symcast/random.hpp"

#include "json.hpp"

namespace symcast {

// Synthetic cohorts that mirror the clinical dataset's structure: irregular
// visit schedules, the feature ranges of the survey data model, decaying
// (inverse-frequency) symptom level distributions, and learnable persistence
// dynamics. Symptom transitions mix a persistence component (previous level
// plus noise) with redraws from a covariate-shifted decaying base
// distribution; tiredness is additionally pulled toward the previous pain
// level with weight `coupling`.

struct CohortConfig {
  int n_patients = 2000;
  double mean_visits = 5.95;
  Date window_start{2013, 1, 1};
  Date window_end{2019, 12, 31};
  Date last_first_visit{2018, 7, 15};  // calibrated for a ~75/25 date split
  Date split_date{2017, 10, 4};
  double persistence = 0.7;  // rho: probability the next level persists
  double coupling = 0.3;     // kappa: pull of tiredness toward previous pain
  double pain_decay = 1.18;  // gamma: base mass at level L is ~ e^(-gamma L)
  double tiredness_decay = 0.33;
  double noise_sd = 1.0;   // jitter of the persistence component
  double flare_prob = 0.05;  // base draws: chance of a uniform 0..10 flare
  // Covariate severity flattens a patient's base distribution:
  // gamma_eff = gamma * exp(-severity), severity from cancer type and age.
  std::array<double, 4> cancer_severity = {0.0, 0.8, 0.4, 0.25};
  double age_effect = 0.5;  // severity per normalized age
  std::array<double, 4> cancer_mix = {0.40, 0.20, 0.15, 0.25};
  double age_mean = 60.0, age_sd = 13.0;
  int min_gap_days = 1, max_gap_days = 365;
  int min_diagnosis_lead_days = 5, max_diagnosis_lead_days = 1095;
  std::uint64_t rng_seed = 0;

  void validate() const {
    require_data(n_patients >= 1, "cohort config: n_patients must be >= 1");
    require_data(mean_visits > 1.0, "cohort config: mean_visits must be > 1");
    require_data(persistence >= 0.0 && persistence <= 1.0,
                 "cohort config: persistence must be in [0, 1]");
    require_data(coupling >= 0.0 && coupling <= 1.0,
                 "cohort config: coupling must be in [0, 1]");
    require_data(pain_decay > 0.0 && tiredness_decay > 0.0,
                 "cohort config: decay rates must be positive");
    require_data(noise_sd >= 0.0, "cohort config: noise_sd must be >= 0");
    require_data(flare_prob >= 0.0 && flare_prob <= 1.0,
                 "cohort config: flare_prob must be in [0, 1]");
    require_data(window_start < window_end,
                 "cohort config: empty date window");
    require_data(min_gap_days >= 1 && max_gap_days >= min_gap_days,
                 "cohort config: bad gap range");
    double mix = 0.0;
    for (double m : cancer_mix) {
      require_data(m >= 0.0, "cohort config: negative cancer mix weight");
      mix += m;
    }
    require_data(mix > 0.0, "cohort config: cancer mix sums to zero");
  }
};

struct Cohort {
  std::vector<PatientProfile> profiles;
  std::vector<SurveyRecord> surveys;  // sorted by (patient, date)
};

namespace detail {

inline int draw_decay_level(Rng& rng, double gamma_eff, double flare_prob) {
  if (rng.uniform() < flare_prob)
    return static_cast<int>(rng.uniform_int(0, 10));
  std::array<double, kNumLevels> w;
  double total = 0.0;
  for (int l = 0; l < kNumLevels; ++l) {
    w[l] = std::exp(-gamma_eff * l);
    total += w[l];
  }
  double u = rng.uniform() * total;
  for (int l = 0; l < kNumLevels; ++l) {
    u -= w[l];
    if (u <= 0.0) return l;
  }
  return kNumLevels - 1;
}

inline int clamp_level(double v) {
  return static_cast<int>(std::clamp(std::nearbyint(v), 0.0, 10.0));
}

}  // namespace detail

inline Cohort generate(const CohortConfig& config) {
  config.validate();
  Cohort out;
  out.profiles.reserve(config.n_patients);

  const std::int64_t first_visit_lo = config.window_start.serial();
  const std::int64_t first_visit_hi =
      std::max(config.last_first_visit.serial(), first_visit_lo);
  double mix_total = 0.0;
  for (double m : config.cancer_mix) mix_total += m;

  for (int p = 0; p < config.n_patients; ++p) {
    Rng rng(mix_seed(config.rng_seed, 0xC0F0u,
                     static_cast<std::uint64_t>(p) + 1));

    PatientProfile profile;
    {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "P%06d", p);
      profile.patient_id = buf;
    }
    profile.sex = rng.uniform() < 0.5 ? Sex::male : Sex::female;
    {
      double u = rng.uniform() * mix_total;
      int type = 0;
      for (int t = 0; t < 4; ++t) {
        u -= config.cancer_mix[t];
        if (u <= 0.0) {
          type = t;
          break;
        }
      }
      profile.cancer_type = static_cast<CancerType>(type);
    }
    profile.age_at_diagnosis = static_cast<int>(std::clamp(
        std::nearbyint(rng.normal(config.age_mean, config.age_sd)), 18.0,
        93.0));

    const std::int64_t first_visit =
        rng.uniform_int(first_visit_lo, first_visit_hi);
    const std::int64_t lead = rng.log_uniform_int(
        config.min_diagnosis_lead_days, config.max_diagnosis_lead_days);
    profile.diagnosis_date = Date::from_serial(first_visit - lead);

    const int n_visits = 1 + rng.poisson(config.mean_visits - 1.0);

    const double severity =
        config.cancer_severity[static_cast<int>(profile.cancer_type)] +
        config.age_effect * (profile.age_at_diagnosis - 55.0) / 38.0;
    const double pain_gamma = config.pain_decay * std::exp(-severity);
    const double tired_gamma = config.tiredness_decay * std::exp(-severity);

    std::int64_t day = first_visit;
    int pain =
        detail::draw_decay_level(rng, pain_gamma, config.flare_prob);
    int tired =
        detail::draw_decay_level(rng, tired_gamma, config.flare_prob);
    for (int v = 0; v < n_visits; ++v) {
      if (v > 0) {
        day += rng.log_uniform_int(config.min_gap_days, config.max_gap_days);
        const int prev_pain = pain;
        const int prev_tired = tired;
        if (rng.uniform() < config.persistence)
          pain = detail::clamp_level(prev_pain +
                                     rng.normal(0.0, config.noise_sd));
        else
          pain = detail::draw_decay_level(rng, pain_gamma, config.flare_prob);
        if (rng.uniform() < config.persistence)
          tired = detail::clamp_level(
              (1.0 - config.coupling) * prev_tired +
              config.coupling * prev_pain + rng.normal(0.0, config.noise_sd));
        else
          tired =
              detail::draw_decay_level(rng, tired_gamma, config.flare_prob);
      }
      SurveyRecord s;
      s.patient_id = profile.patient_id;
      s.survey_date = Date::from_serial(day);
      s.pain = SymptomLevel::checked(pain);
      s.tiredness = SymptomLevel::checked(tired);
      out.surveys.push_back(std::move(s));
    }
    out.profiles.push_back(std::move(profile));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Audit
// ---------------------------------------------------------------------------

struct AuditReport {
  std::size_t n_patients = 0;
  std::size_t n_surveys = 0;
  std::size_t n_transitions = 0;
  double mean_visits_per_patient = 0.0;
  std::array<double, kNumLevels> pain_target_freq{};   // over transition targets
  std::array<double, kNumLevels> tired_target_freq{};
  std::map<std::string, double> gap_quantiles;  // over days_since_prev_survey
  double train_fraction = 0.0;  // transitions dated before split_date
  Date split_date;
};

inline AuditReport audit(const Cohort& cohort, Date split_date) {
  AuditReport r;
  r.split_date = split_date;
  r.n_patients = cohort.profiles.size();
  r.n_surveys = cohort.surveys.size();
  r.mean_visits_per_patient =
      r.n_patients == 0
          ? 0.0
          : static_cast<double>(r.n_surveys) / static_cast<double>(r.n_patients);

  const auto transitions = build_transitions(cohort.profiles, cohort.surveys);
  r.n_transitions = transitions.size();
  if (transitions.empty()) return r;

  std::array<std::size_t, kNumLevels> pain_counts{}, tired_counts{};
  std::vector<double> gaps;
  gaps.reserve(transitions.size());
  std::size_t n_train = 0;
  for (const auto& t : transitions) {
    pain_counts[t.target_pain.value()] += 1;
    tired_counts[t.target_tiredness.value()] += 1;
    gaps.push_back(static_cast<double>(t.features.days_since_prev_survey));
    if (t.survey_date < split_date) ++n_train;
  }
  const double n = static_cast<double>(transitions.size());
  for (int l = 0; l < kNumLevels; ++l) {
    r.pain_target_freq[l] = pain_counts[l] / n;
    r.tired_target_freq[l] = tired_counts[l] / n;
  }
  std::sort(gaps.begin(), gaps.end());
  auto quantile = [&](double q) {
    const std::size_t idx = std::min<std::size_t>(
        gaps.size() - 1, static_cast<std::size_t>(q * (gaps.size() - 1)));
    return gaps[idx];
  };
  r.gap_quantiles = {{"min", gaps.front()}, {"p25", quantile(0.25)},
                     {"p50", quantile(0.50)}, {"p75", quantile(0.75)},
                     {"max", gaps.back()}};
  r.train_fraction = n_train / n;
  return r;
}

// ---------------------------------------------------------------------------
// JSON config / report
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const CohortConfig& c) {
  return nlohmann::json{
      {"n_patients", c.n_patients},
      {"mean_visits", c.mean_visits},
      {"window_start", c.window_start.to_string()},
      {"window_end", c.window_end.to_string()},
      {"last_first_visit", c.last_first_visit.to_string()},
      {"split_date", c.split_date.to_string()},
      {"persistence", c.persistence},
      {"coupling", c.coupling},
      {"pain_decay", c.pain_decay},
      {"tiredness_decay", c.tiredness_decay},
      {"noise_sd", c.noise_sd},
      {"flare_prob", c.flare_prob},
      {"cancer_severity", c.cancer_severity},
      {"age_effect", c.age_effect},
      {"cancer_mix", c.cancer_mix},
      {"age_mean", c.age_mean},
      {"age_sd", c.age_sd},
      {"min_gap_days", c.min_gap_days},
      {"max_gap_days", c.max_gap_days},
      {"min_diagnosis_lead_days", c.min_diagnosis_lead_days},
      {"max_diagnosis_lead_days", c.max_diagnosis_lead_days},
      {"rng_seed", c.rng_seed}};
}

inline CohortConfig cohort_config_from_json(const nlohmann::json& j) {
  CohortConfig c;
  c.n_patients = j.value("n_patients", c.n_patients);
  c.mean_visits = j.value("mean_visits", c.mean_visits);
  if (j.contains("window_start"))
    c.window_start = parse_date(j.at("window_start").get<std::string>());
  if (j.contains("window_end"))
    c.window_end = parse_date(j.at("window_end").get<std::string>());
  if (j.contains("last_first_visit"))
    c.last_first_visit =
        parse_date(j.at("last_first_visit").get<std::string>());
  if (j.contains("split_date"))
    c.split_date = parse_date(j.at("split_date").get<std::string>());
  c.persistence = j.value("persistence", c.persistence);
  c.coupling = j.value("coupling", c.coupling);
  c.pain_decay = j.value("pain_decay", c.pain_decay);
  c.tiredness_decay = j.value("tiredness_decay", c.tiredness_decay);
  c.noise_sd = j.value("noise_sd", c.noise_sd);
  c.flare_prob = j.value("flare_prob", c.flare_prob);
  if (j.contains("cancer_severity"))
    c.cancer_severity = j.at("cancer_severity").get<std::array<double, 4>>();
  c.age_effect = j.value("age_effect", c.age_effect);
  if (j.contains("cancer_mix"))
    c.cancer_mix = j.at("cancer_mix").get<std::array<double, 4>>();
  c.age_mean = j.value("age_mean", c.age_mean);
  c.age_sd = j.value("age_sd", c.age_sd);
  c.min_gap_days = j.value("min_gap_days", c.min_gap_days);
  c.max_gap_days = j.value("max_gap_days", c.max_gap_days);
  c.min_diagnosis_lead_days =
      j.value("min_diagnosis_lead_days", c.min_diagnosis_lead_days);
  c.max_diagnosis_lead_days =
      j.value("max_diagnosis_lead_days", c.max_diagnosis_lead_days);
  c.rng_seed = j.value("rng_seed", c.rng_seed);
  return c;
}

inline nlohmann::json to_json(const AuditReport& r) {
  return nlohmann::json{{"n_patients", r.n_patients},
                        {"n_surveys", r.n_surveys},
                        {"n_transitions", r.n_transitions},
                        {"mean_visits_per_patient", r.mean_visits_per_patient},
                        {"pain_target_freq", r.pain_target_freq},
                        {"tiredness_target_freq", r.tired_target_freq},
                        {"gap_quantiles", r.gap_quantiles},
                        {"train_fraction", r.train_fraction},
                        {"split_date", r.split_date.to_string()}};
}

inline void write_profiles_csv(const std::string& path,
                               std::span<const PatientProfile> profiles) {
  CsvWriter w(path);
  w.write_row(profiles_header());
  for (const auto& p : profiles)
    w.write_row({p.patient_id, to_string(p.sex),
                 std::to_string(p.age_at_diagnosis), to_string(p.cancer_type),
                 p.diagnosis_date.to_string()});
  w.close();
}

inline void write_surveys_csv(const std::string& path,
                              std::span<const SurveyRecord> surveys) {
  CsvWriter w(path);
  w.write_row(surveys_header());
  for (const auto& s : surveys)
    w.write_row({s.patient_id, s.survey_date.to_string(),
                 std::to_string(s.pain.value()),
                 std::to_string(s.tiredness.value())});
  w.close();
}

}  // namespace symcast
