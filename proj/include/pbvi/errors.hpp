#pragma once

#include <stdexcept>
#include <string>

namespace pbvi {

// Raised by the .pomdp reader; carries the 1-based line the problem was found on.
struct ParseError : std::runtime_error {
  int line;
  ParseError(int line_, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line_) + ": " + msg), line(line_) {}
};

// belief_update was asked for an observation branch with P(o|b,a) = 0.
struct ZeroProbabilityObservation : std::runtime_error {
  ZeroProbabilityObservation() : std::runtime_error("observation has zero probability under this belief/action") {}
};

// GPR support sets must be pairwise distinct beliefs.
struct DuplicateSupport : std::runtime_error {
  DuplicateSupport() : std::runtime_error("support belief duplicates an existing one") {}
};

// Cholesky factorization failed even after the jitter schedule was exhausted.
struct FactorizationFailure : std::runtime_error {
  explicit FactorizationFailure(const std::string& msg) : std::runtime_error(msg) {}
};

// A fixed belief grid would exceed the configured point cap.
struct GridTooLarge : std::runtime_error {
  std::size_t count;
  std::size_t cap;
  GridTooLarge(std::size_t count_, std::size_t cap_)
      : std::runtime_error("fixed grid needs " + std::to_string(count_) + " points, cap is " + std::to_string(cap_)),
        count(count_), cap(cap_) {}
};

// Exact enumeration exceeded its vector cap.
struct BlowupExceeded : std::runtime_error {
  explicit BlowupExceeded(std::size_t cap)
      : std::runtime_error("exact enumeration exceeded the cap of " + std::to_string(cap) + " vectors") {}
};

}  // namespace pbvi
