#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace efcn {

// Each kind maps to a distinct CLI exit code (see exit_code()).
enum class ErrorKind {
  InvalidArgument,
  InvalidLabel,
  Dimension,
  Config,
  Io,
  Format,
  DegenerateEvidence,
  NonCombinable,
  Numeric,
  TrainingDivergence,
  ContractViolation,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

std::string_view to_string(ErrorKind kind) noexcept;
int exit_code(ErrorKind kind) noexcept;

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, ErrorKind kind, const char* what) {
  if (!condition) throw Error(kind, what);
}

}  // namespace efcn
