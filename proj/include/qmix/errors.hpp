#pragma once

#include <stdexcept>
#include <string>

namespace qmix {

// Malformed or unusable input: non-finite values, dimension mismatches,
// parse failures, invalid configuration.
class data_error : public std::runtime_error {
 public:
  explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure during estimation: rank deficiency, IRLS divergence,
// separation, degenerate resamples.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace qmix
