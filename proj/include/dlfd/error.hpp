#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dlfd {

/// Failure categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
  config,      // invalid configuration values
  shape,       // dimension mismatch
  input,       // bad or empty data, non-finite inputs
  parse,       // malformed file content
  io,          // filesystem failures
  numerical,   // singular systems
  divergence,  // non-finite training state
  simulation,  // unstable tissue integration
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Same kind, message prefixed with `context: `.
Error with_context(const Error& error, std::string_view context);

}  // namespace dlfd
