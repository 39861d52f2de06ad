#pragma once

#include <array>
#include <span>

#include "symcast/domain.hpp"
#include "symcast/errors.hpp"

namespace symcast {

// Naive prior: always predicts the most frequent training level.
// Ties go to the lowest level.
struct NaivePrior {
  SymptomLevel dominant_class;
};

inline NaivePrior np_fit(std::span<const int> train_labels) {
  require_data(!train_labels.empty(), "np_fit: empty label set");
  std::array<int, kNumLevels> counts{};
  for (int y : train_labels) {
    require_data(y >= 0 && y < kNumLevels, "np_fit: level outside [0, 10]");
    counts[y] += 1;
  }
  int best = 0;
  for (int c = 1; c < kNumLevels; ++c)
    if (counts[c] > counts[best]) best = c;
  return NaivePrior{SymptomLevel::checked(best)};
}

inline int np_predict(const NaivePrior& model, const TransitionExample&) {
  return model.dominant_class.value();
}

// Previous value: predicts the symptom's level at the previous survey,
// however long ago that was.
inline int pv_predict(const TransitionExample& e, Symptom target) {
  return prev_level(e, target);
}

}  // namespace symcast
