#pragma once

#include <stdexcept>
#include <string>

namespace arl {

/// Broad failure categories. The CLI maps each onto a stable exit code.
enum class ErrorKind { invalid_argument, config, data, divergence };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

inline Error invalid_argument(const std::string& what) { return {ErrorKind::invalid_argument, what}; }
inline Error config_error(const std::string& what) { return {ErrorKind::config, what}; }
inline Error data_error(const std::string& what) { return {ErrorKind::data, what}; }
inline Error diverged(const std::string& what) { return {ErrorKind::divergence, what}; }

}  // namespace arl
