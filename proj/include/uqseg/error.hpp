#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace uqseg {

enum class Err {
  NEGATIVE_PROBABILITY,
  ROW_NOT_NORMALIZED,
  SHAPE_MISMATCH,
  NEEDS_SAMPLING,
  WRONG_SAMPLE_COUNT,
  INVALID_DISTRIBUTION,
  INTERNAL_INCONSISTENCY,
  EMPTY_VALIDATION,
  SINGLE_CLASS,
  EMPTY_INPUT,
  NO_CONVERGENCE,
  NEEDS_RATERS,
  ZERO_VARIANCE,
  EMPTY_SET,
  ZERO_BASELINE,
  OBJECT_OUT_OF_BOUNDS,
  UNKNOWN_CLASS,
  CONFIG_INVALID,
  MISSING_SCENARIO,
  MISSING_SPLIT,
  EMPTY_POOL,
  INCOMPLETE_GRID,
  MAGIC_MISMATCH,
  DTYPE_UNSUPPORTED,
  TRUNCATED_FILE,
  IO_FAILURE,
};

std::string_view err_name(Err code);

// True for error codes caused by unreadable or malformed files (CLI exit 3);
// everything else is a validation failure (CLI exit 2).
bool is_io_error(Err code);

class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& message)
      : std::runtime_error(std::string(err_name(code)) + ": " + message), code_(code) {}

  Err code() const { return code_; }

 private:
  Err code_;
};

struct ValidationResult {
  bool ok = true;
  Err code = Err::INTERNAL_INCONSISTENCY;
  std::string message;
  std::int64_t flat_index = -1;  // first violating element, -1 if not applicable

  explicit operator bool() const { return ok; }
};

}  // namespace uqseg
