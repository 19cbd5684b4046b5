#pragma once

#include <stdexcept>
#include <string>

namespace fanova {

// Bad user input: malformed files, invalid partitions, out-of-range options.
// The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A statistic whose denominator vanishes (e.g. zero within-group variation).
class DegenerateStatisticError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Penalized least-squares system without a unique solution.
class SingularFitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fanova
