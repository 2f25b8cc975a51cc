#pragma once

#include <stdexcept>
#include <string>

namespace relialloc {

// Bad shape, out-of-range reliability, nonpositive weight, bad index.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A budget that cannot be split under the requested floors.
class Infeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exhaustive search would exceed its candidate guard.
class SearchLimitExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Replay source ran out of recorded outcomes for a slot.
class SourceExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed system, allocation, or replay file.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace relialloc
