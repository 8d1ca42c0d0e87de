#pragma once

#include <stdexcept>
#include <string>

namespace bellfreq {

enum class ErrorKind {
  invalid_argument,
  undefined_frequency,
  unknown_symbol,
  length_mismatch,
  invalid_model,
  missing_data,
  search_space_exceeded,
  parse,
  io,
};

// Single exception type for the library. The kind lets callers (the CLI in
// particular) map failures onto exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace bellfreq
