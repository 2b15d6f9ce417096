#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tsfem {

enum class ErrorKind {
  geometry,
  topology,
  matching,
  parse,
  validation,
  assembly,
  constraint,
  solver,
  input,
  step,
  configuration,
  domain,
  io,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::geometry: return "geometry";
    case ErrorKind::topology: return "topology";
    case ErrorKind::matching: return "matching";
    case ErrorKind::parse: return "parse";
    case ErrorKind::validation: return "validation";
    case ErrorKind::assembly: return "assembly";
    case ErrorKind::constraint: return "constraint";
    case ErrorKind::solver: return "solver";
    case ErrorKind::input: return "input";
    case ErrorKind::step: return "step";
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::domain: return "domain";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

/// Errors caused by user-supplied data rather than by a failing computation.
constexpr bool is_validation_kind(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::parse:
    case ErrorKind::validation:
    case ErrorKind::configuration:
    case ErrorKind::input:
    case ErrorKind::domain:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace tsfem
