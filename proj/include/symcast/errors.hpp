#pragma once

#include <stdexcept>
#include <string>

namespace symcast {

// Bad input data (malformed CSV, out-of-range value, unknown id).
// The CLI maps this to exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Broken internal invariant. CLI exit code 4.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw InternalError(msg);
}

inline void require_data(bool cond, const std::string& msg) {
  if (!cond) throw DataError(msg);
}

}  // namespace symcast
