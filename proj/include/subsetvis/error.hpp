#pragma once

#include <stdexcept>
#include <string>

namespace subsetvis {

// Broad failure classes; the server maps these onto HTTP status codes.
enum class ErrorKind {
  invalid_argument,  // malformed input (400)
  not_found,         // unknown id (404)
  conflict,          // violated precondition, e.g. re-slicing (409)
  domain,            // value or numeric failure (422)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& message)
      : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  // Stable machine-readable identifier, e.g. "unknown_subset".
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

[[noreturn]] void fail(ErrorKind kind, std::string code, const std::string& message);

}  // namespace subsetvis
