#pragma once

#include <stdexcept>
#include <string>

namespace mxfr {

// Exit-code mapping used by the CLI: UsageError -> 1, DataError -> 2,
// NumericalError -> 3.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mxfr
