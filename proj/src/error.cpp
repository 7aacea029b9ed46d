#include "dlfd/error.hpp"

namespace dlfd {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config: return "configuration error";
    case ErrorKind::shape: return "shape error";
    case ErrorKind::input: return "input error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::io: return "I/O error";
    case ErrorKind::numerical: return "numerical error";
    case ErrorKind::divergence: return "divergence error";
    case ErrorKind::simulation: return "simulation error";
  }
  return "error";
}

Error with_context(const Error& error, std::string_view context) {
  std::string message(context);
  message += ": ";
  message += error.what();
  return Error(error.kind(), message);
}

}  // namespace dlfd
