#pragma once

#include <stdexcept>
#include <string>

namespace spectv {

enum class ErrorKind {
  kInvalidInput,
  kUsage,
  kNumerical,
  kIo,
};

/// Exception carrying a category and the pipeline stage that raised it
/// ("registration", "decomposition", "io", ...). The CLI maps the kind to
/// an exit code and the service maps it to an HTTP status.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string stage, const std::string& message)
      : std::runtime_error(stage.empty() ? message : stage + ": " + message),
        kind_(kind),
        stage_(std::move(stage)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& stage() const noexcept { return stage_; }

 private:
  ErrorKind kind_;
  std::string stage_;
};

inline Error invalid_input(std::string stage, const std::string& message) {
  return Error(ErrorKind::kInvalidInput, std::move(stage), message);
}

inline Error io_error(const std::string& message) {
  return Error(ErrorKind::kIo, "io", message);
}

}  // namespace spectv
