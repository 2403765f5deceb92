#include "tke/error.hpp"

namespace tke {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::schema: return "schema";
    case ErrorCode::parse: return "parse";
    case ErrorCode::cadence: return "cadence";
    case ErrorCode::empty_phase: return "empty-phase";
    case ErrorCode::merge: return "merge";
    case ErrorCode::empty_input: return "empty-input";
    case ErrorCode::parameter: return "parameter";
    case ErrorCode::domain: return "domain";
    case ErrorCode::degenerate_variance: return "degenerate-variance";
    case ErrorCode::shape: return "shape";
    case ErrorCode::insufficient_data: return "insufficient-data";
    case ErrorCode::alignment: return "alignment";
    case ErrorCode::conditioning: return "conditioning";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::missing_cell: return "missing-cell";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

}  // namespace tke
