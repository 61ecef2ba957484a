#pragma once

#include <stdexcept>
#include <string>

namespace mattack {

// Exit codes: 0 success, 2 usage, 3 data/format, 4 numeric.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
  static constexpr int exit_code = 2;
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
  static constexpr int exit_code = 3;
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
  static constexpr int exit_code = 4;
};

}  // namespace mattack
