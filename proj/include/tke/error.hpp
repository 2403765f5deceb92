#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tke {

enum class ErrorCode {
  schema,
  parse,
  cadence,
  empty_phase,
  merge,
  empty_input,
  parameter,
  domain,
  degenerate_variance,
  shape,
  insufficient_data,
  alignment,
  conditioning,
  divergence,
  missing_cell,
  io,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a machine-readable code so the
// pipeline can tag it by stage without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + " error: " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tke
