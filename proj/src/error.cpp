#include "uqseg/error.hpp"

namespace uqseg {

std::string_view err_name(Err e) {
  switch (e) {
    case Err::NEGATIVE_PROBABILITY: return "NEGATIVE_PROBABILITY";
    case Err::ROW_NOT_NORMALIZED: return "ROW_NOT_NORMALIZED";
    case Err::SHAPE_MISMATCH: return "SHAPE_MISMATCH";
    case Err::NEEDS_SAMPLING: return "NEEDS_SAMPLING";
    case Err::WRONG_SAMPLE_COUNT: return "WRONG_SAMPLE_COUNT";
    case Err::INVALID_DISTRIBUTION: return "INVALID_DISTRIBUTION";
    case Err::INTERNAL_INCONSISTENCY: return "INTERNAL_INCONSISTENCY";
    case Err::EMPTY_VALIDATION: return "EMPTY_VALIDATION";
    case Err::SINGLE_CLASS: return "SINGLE_CLASS";
    case Err::EMPTY_INPUT: return "EMPTY_INPUT";
    case Err::NO_CONVERGENCE: return "NO_CONVERGENCE";
    case Err::NEEDS_RATERS: return "NEEDS_RATERS";
    case Err::ZERO_VARIANCE: return "ZERO_VARIANCE";
    case Err::EMPTY_SET: return "EMPTY_SET";
    case Err::ZERO_BASELINE: return "ZERO_BASELINE";
    case Err::OBJECT_OUT_OF_BOUNDS: return "OBJECT_OUT_OF_BOUNDS";
    case Err::UNKNOWN_CLASS: return "UNKNOWN_CLASS";
    case Err::CONFIG_INVALID: return "CONFIG_INVALID";
    case Err::MISSING_SCENARIO: return "MISSING_SCENARIO";
    case Err::MISSING_SPLIT: return "MISSING_SPLIT";
    case Err::EMPTY_POOL: return "EMPTY_POOL";
    case Err::INCOMPLETE_GRID: return "INCOMPLETE_GRID";
    case Err::MAGIC_MISMATCH: return "MAGIC_MISMATCH";
    case Err::DTYPE_UNSUPPORTED: return "DTYPE_UNSUPPORTED";
    case Err::TRUNCATED_FILE: return "TRUNCATED_FILE";
    case Err::IO_FAILURE: return "IO_FAILURE";
  }
  return "UNKNOWN";
}

bool is_io_error(Err e) {
  switch (e) {
    case Err::MAGIC_MISMATCH:
    case Err::DTYPE_UNSUPPORTED:
    case Err::TRUNCATED_FILE:
    case Err::IO_FAILURE:
      return true;
    default:
      return false;
  }
}

}  // namespace uqseg
