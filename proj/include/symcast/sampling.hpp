#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "symcast/domain.hpp"
#include "symcast/errors.hpp"
#include "symcast/random.hpp"
#include "symcast/tabular.hpp"

namespace symcast {

// SMOTE over the mixed continuous/categorical transition space, balancing the
// chosen target symptom's classes up to the majority count. Categorical
// features follow the SMOTE-NC conventions: a fixed squared-distance penalty
// per mismatch and majority vote at synthesis time. Applied to training data
// only; synthetic rows carry a provenance flag.

struct SmoteConfig {
  int k = 5;
  std::uint64_t rng_seed = 0;
};

struct StandardizeResult {
  RawMatrix scaled;              // continuous columns z-scored, categorical untouched
  std::vector<double> mean;      // per column (0 for categorical)
  std::vector<double> stddev;    // population std; 1 where flagged
  std::vector<bool> zero_variance;
};

// Population-variance z-scoring of the continuous columns. Zero-variance
// columns keep scale 1 and are flagged.
inline StandardizeResult standardize(const RawMatrix& features) {
  require_data(features.n_rows >= 2, "standardize: need at least 2 samples");
  StandardizeResult out;
  out.scaled = features;
  out.mean.assign(features.n_cols, 0.0);
  out.stddev.assign(features.n_cols, 1.0);
  out.zero_variance.assign(features.n_cols, false);
  const double n = static_cast<double>(features.n_rows);
  for (std::size_t c = 0; c < features.n_cols; ++c) {
    if (features.schema[c].kind != FeatureKind::continuous) continue;
    double sum = 0.0;
    for (std::size_t r = 0; r < features.n_rows; ++r) sum += features.at(r, c);
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t r = 0; r < features.n_rows; ++r) {
      const double d = features.at(r, c) - mean;
      ss += d * d;
    }
    double sd = std::sqrt(ss / n);
    if (sd == 0.0) {
      out.zero_variance[c] = true;
      sd = 1.0;
    }
    out.mean[c] = mean;
    out.stddev[c] = sd;
    for (std::size_t r = 0; r < features.n_rows; ++r)
      out.scaled.at(r, c) = (features.at(r, c) - mean) / sd;
  }
  return out;
}

// Squared-distance penalty for one categorical mismatch: the median of the
// standardized continuous columns' standard deviations, squared.
inline double categorical_penalty_sq(const StandardizeResult& st) {
  std::vector<double> stds;
  for (std::size_t c = 0; c < st.scaled.n_cols; ++c) {
    if (st.scaled.schema[c].kind != FeatureKind::continuous) continue;
    stds.push_back(st.zero_variance[c] ? 0.0 : 1.0);
  }
  if (stds.empty()) return 1.0;
  std::sort(stds.begin(), stds.end());
  const std::size_t m = stds.size();
  const double median =
      (m % 2 == 1) ? stds[m / 2] : 0.5 * (stds[m / 2 - 1] + stds[m / 2]);
  return median * median;
}

inline double smote_distance_sq(const RawMatrix& scaled, std::size_t a,
                                std::size_t b, double cat_penalty_sq) {
  double d = 0.0;
  for (std::size_t c = 0; c < scaled.n_cols; ++c) {
    if (scaled.schema[c].kind == FeatureKind::continuous) {
      const double diff = scaled.at(a, c) - scaled.at(b, c);
      d += diff * diff;
    } else if (scaled.at(a, c) != scaled.at(b, c)) {
      d += cat_penalty_sq;
    }
  }
  return d;
}

// k nearest same-class neighbors of `query`, excluding itself, ordered by
// ascending distance with ties broken by ascending sample index.
inline std::vector<std::size_t> knn_minority(
    const RawMatrix& scaled, std::size_t query,
    std::span<const std::size_t> class_members, int k,
    double cat_penalty_sq) {
  require_data(k >= 1, "knn_minority: k must be >= 1");
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(class_members.size());
  for (std::size_t m : class_members) {
    if (m == query) continue;
    dist.emplace_back(smote_distance_sq(scaled, query, m, cat_penalty_sq), m);
  }
  require_data(!dist.empty(), "knn_minority: no candidate neighbors");
  const std::size_t take = std::min<std::size_t>(k, dist.size());
  std::partial_sort(dist.begin(), dist.begin() + take, dist.end());
  std::vector<std::size_t> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(dist[i].second);
  return out;
}

namespace detail {

inline double round_clamp(double v, const FeatureInfo& info) {
  if (info.integer_valued) v = std::nearbyint(v);
  if (v < info.lo) v = info.lo;
  if (v > info.hi) v = info.hi;
  return v;
}

// Majority vote over the neighbor values; ties fall back to the seed
// sample's own value.
inline double categorical_vote(double own, std::span<const double> neighbor_values) {
  std::map<double, int> counts;
  for (double v : neighbor_values) counts[v] += 1;
  int best = 0;
  for (const auto& [v, n] : counts) best = std::max(best, n);
  std::vector<double> winners;
  for (const auto& [v, n] : counts)
    if (n == best) winners.push_back(v);
  return winners.size() == 1 ? winners[0] : own;
}

}  // namespace detail

// Interpolates a synthetic row between `sample` and `neighbor` with one
// shared u per row, so the continuous part lies on the joining segment.
// `neighborhood` is the sample's full k-neighbor set (for categorical votes).
inline TransitionExample synthesize(
    const TransitionExample& sample, const TransitionExample& neighbor,
    std::span<const TransitionExample> neighborhood, double u) {
  const auto& schema = full_feature_schema();
  std::array<double, 7> values{};
  for (int f = 0; f < 7; ++f) {
    const double own = canonical_feature_value(sample.features, f);
    if (schema[f].kind == FeatureKind::continuous) {
      const double other = canonical_feature_value(neighbor.features, f);
      values[f] = detail::round_clamp(own + u * (other - own), schema[f]);
    } else {
      std::vector<double> nv;
      nv.reserve(neighborhood.size());
      for (const auto& n : neighborhood)
        nv.push_back(canonical_feature_value(n.features, f));
      values[f] = detail::categorical_vote(own, nv);
    }
  }

  TransitionExample out;
  out.features.sex = static_cast<Sex>(static_cast<int>(values[kSexFeature]));
  out.features.age = static_cast<int>(values[kAgeFeature]);
  out.features.cancer_type =
      static_cast<CancerType>(static_cast<int>(values[kCancerTypeFeature]));
  out.features.days_since_diagnosis =
      static_cast<std::int64_t>(values[kDaysSinceDiagnosisFeature]);
  out.features.days_since_prev_survey =
      static_cast<std::int64_t>(values[kDaysSincePrevSurveyFeature]);
  out.features.prev_pain =
      SymptomLevel::checked(static_cast<int>(values[kPrevPainFeature]));
  out.features.prev_tiredness =
      SymptomLevel::checked(static_cast<int>(values[kPrevTirednessFeature]));

  // Targets: the balanced symptom is set by the caller to the class label;
  // the other one is interpolated like any integer feature.
  auto interp_level = [&](int a, int b) {
    double v = a + u * (b - a);
    v = std::nearbyint(v);
    return SymptomLevel::checked(
        static_cast<int>(std::clamp(v, 0.0, 10.0)));
  };
  out.target_pain =
      interp_level(sample.target_pain.value(), neighbor.target_pain.value());
  out.target_tiredness = interp_level(sample.target_tiredness.value(),
                                      neighbor.target_tiredness.value());
  out.survey_date = sample.survey_date;
  out.patient_id = sample.patient_id;
  out.synthetic = true;
  return out;
}

struct OversampleResult {
  std::vector<TransitionExample> examples;  // originals first, synthetic appended
  std::vector<std::string> warnings;
  std::size_t n_synthetic = 0;
};

// Balances every present class of the target symptom up to the majority
// count. Deterministic under config.rng_seed; per-class RNG streams keep the
// draw sequence independent of processing order.
inline OversampleResult oversample(std::span<const TransitionExample> train,
                                   Symptom target, const SmoteConfig& config) {
  require_data(!train.empty(), "oversample: empty training set");
  require_data(config.k >= 1, "oversample: k must be >= 1");
  for (const auto& e : train)
    check(!e.synthetic, "oversample: input already contains synthetic rows");

  OversampleResult out;
  out.examples.assign(train.begin(), train.end());

  std::array<std::vector<std::size_t>, kNumLevels> members;
  for (std::size_t i = 0; i < train.size(); ++i)
    members[target_level(train[i], target)].push_back(i);
  std::size_t majority = 0;
  for (const auto& m : members) majority = std::max(majority, m.size());

  // Distance space: all seven features of the full training set.
  RawMatrix features;
  features.schema = full_feature_schema();
  features.n_cols = features.schema.size();
  features.reserve_rows(train.size());
  for (const auto& e : train) {
    std::array<double, 7> row;
    for (int f = 0; f < 7; ++f)
      row[f] = canonical_feature_value(e.features, f);
    features.push_row(row, target_level(e, target));
  }
  StandardizeResult st;
  double penalty_sq = 1.0;
  const bool need_knn = train.size() >= 2;
  if (need_knn) {
    st = standardize(features);
    penalty_sq = categorical_penalty_sq(st);
  }

  for (int cls = 0; cls < kNumLevels; ++cls) {
    const auto& idx = members[cls];
    if (idx.empty() || idx.size() >= majority) continue;
    std::size_t need = majority - idx.size();
    Rng rng(mix_seed(config.rng_seed, 0x5340u /* stream tag */, cls));

    if (idx.size() == 1) {
      out.warnings.push_back("class " + std::to_string(cls) +
                             " has a single member; duplicating it verbatim");
      TransitionExample dup = train[idx[0]];
      dup.synthetic = true;
      for (std::size_t t = 0; t < need; ++t) out.examples.push_back(dup);
      out.n_synthetic += need;
      continue;
    }

    const int k_eff = static_cast<int>(
        std::min<std::size_t>(config.k, idx.size() - 1));
    std::vector<std::vector<std::size_t>> neighbors(idx.size());
    for (std::size_t q = 0; q < idx.size(); ++q)
      neighbors[q] = knn_minority(st.scaled, idx[q], idx, k_eff, penalty_sq);

    for (std::size_t t = 0; t < need; ++t) {
      const std::size_t q = t % idx.size();
      const auto& nn = neighbors[q];
      const std::size_t pick =
          static_cast<std::size_t>(rng.uniform_int(0, k_eff - 1));
      const double u = rng.uniform();
      std::vector<TransitionExample> hood;
      hood.reserve(nn.size());
      for (std::size_t n : nn) hood.push_back(train[n]);
      TransitionExample synth =
          synthesize(train[idx[q]], train[nn[pick]], hood, u);
      if (target == Symptom::pain)
        synth.target_pain = SymptomLevel::checked(cls);
      else
        synth.target_tiredness = SymptomLevel::checked(cls);
      out.examples.push_back(std::move(synth));
      ++out.n_synthetic;
    }
  }
  return out;
}

}  // namespace symcast
