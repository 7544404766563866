#pragma once

#include <stdexcept>
#include <string>

namespace adakd {

/// Raised when a training run produces a non-finite loss or parameter.
/// The CLI maps this to its own exit code so scripts can tell numeric
/// blow-ups apart from bad input.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a statistic cannot be computed because the underlying
/// distribution is degenerate (e.g. all teacher losses equal, so no
/// spread exists to calibrate the schedule against).
class degenerate_distribution_error : public std::runtime_error {
 public:
  explicit degenerate_distribution_error(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace adakd
