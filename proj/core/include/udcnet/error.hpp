#pragma once

#include <stdexcept>
#include <string>

namespace udcnet {

/// Library-wide exception. `code()` is a short machine-readable tag
/// (e.g. "shape_mismatch", "non_finite", "invalid_config") that the CLI
/// prints in front of the human message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace udcnet
