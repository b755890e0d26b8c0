#pragma once

#include <stdexcept>
#include <string>

namespace knnloo {

/// Broad failure category. The CLI maps each one to its own exit code.
enum class ErrorKind { usage, parse, validation, resource };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error parse_error(const std::string& what) { return {ErrorKind::parse, what}; }
inline Error validation_error(const std::string& what) { return {ErrorKind::validation, what}; }
inline Error resource_error(const std::string& what) { return {ErrorKind::resource, what}; }
inline Error usage_error(const std::string& what) { return {ErrorKind::usage, what}; }

}  // namespace knnloo
