#pragma once

#include <stdexcept>

namespace cfc {

// Invalid arguments are reported with std::invalid_argument throughout; the
// types below cover the remaining failure modes callers need to tell apart.

/// A hand-built or parsed object violates its internal consistency rules.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file or document does not follow the expected format.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The all-on benchmark already misses the success-ratio target.
class NoFeasibleSolution : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Savings relative to a zero-cost benchmark.
class UndefinedSavings : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Enumeration would exceed its evaluation cap.
class SearchSpaceTooLarge : public std::length_error {
 public:
  using std::length_error::length_error;
};

}  // namespace cfc
