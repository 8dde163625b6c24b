#pragma once

#include <stdexcept>
#include <string>

namespace mmk {

// Error categories double as CLI exit codes.
enum class ErrorKind : int {
  Usage = 2,
  Data = 3,
  Numeric = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throwUsage(const std::string& msg) {
  throw Error(ErrorKind::Usage, msg);
}
[[noreturn]] inline void throwData(const std::string& msg) {
  throw Error(ErrorKind::Data, msg);
}
[[noreturn]] inline void throwNumeric(const std::string& msg) {
  throw Error(ErrorKind::Numeric, msg);
}

} // namespace mmk
