#include "efcn/error.hpp"

namespace efcn {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::InvalidLabel: return "invalid_label";
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
    case ErrorKind::DegenerateEvidence: return "degenerate_evidence";
    case ErrorKind::NonCombinable: return "non_combinable";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::TrainingDivergence: return "training_divergence";
    case ErrorKind::ContractViolation: return "contract_violation";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return 2;
    case ErrorKind::Config: return 3;
    case ErrorKind::Io: return 4;
    case ErrorKind::Format: return 5;
    case ErrorKind::InvalidLabel: return 6;
    case ErrorKind::Dimension: return 7;
    case ErrorKind::DegenerateEvidence: return 8;
    case ErrorKind::NonCombinable: return 9;
    case ErrorKind::Numeric: return 10;
    case ErrorKind::TrainingDivergence: return 11;
    case ErrorKind::ContractViolation: return 12;
  }
  return 1;
}

}  // namespace efcn
