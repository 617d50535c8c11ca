#include "uqseg/types.hpp"

namespace uqseg {
namespace {

[[noreturn]] void bad_name(std::string_view what, std::string_view got) {
  throw Error(Err::INVALID_DISTRIBUTION,
              std::string("unknown ") + std::string(what) + ": " + std::string(got));
}

}  // namespace

std::string_view to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::DETERMINISTIC: return "deterministic";
    case ModelFamily::TTD: return "ttd";
    case ModelFamily::ENSEMBLE: return "ensemble";
    case ModelFamily::TTA: return "tta";
    case ModelFamily::SSN: return "ssn";
  }
  return "?";
}

std::string_view to_string(Measure m) {
  switch (m) {
    case Measure::PE: return "pe";
    case Measure::EE: return "ee";
    case Measure::MI: return "mi";
    case Measure::ONE_MINUS_MSR: return "one_minus_msr";
  }
  return "?";
}

std::string_view to_string(UncertaintyType t) {
  switch (t) {
    case UncertaintyType::PU: return "pu";
    case UncertaintyType::AU: return "au";
    case UncertaintyType::EU: return "eu";
  }
  return "?";
}

std::string_view to_string(Split s) {
  return s == Split::IID ? "iid" : "ood";
}

std::string_view to_string(Role r) {
  switch (r) {
    case Role::TRAIN: return "train";
    case Role::VAL: return "val";
    case Role::TEST: return "test";
    case Role::POOL: return "pool";
  }
  return "?";
}

ModelFamily family_from_string(std::string_view s) {
  if (s == "deterministic") return ModelFamily::DETERMINISTIC;
  if (s == "ttd") return ModelFamily::TTD;
  if (s == "ensemble") return ModelFamily::ENSEMBLE;
  if (s == "tta") return ModelFamily::TTA;
  if (s == "ssn") return ModelFamily::SSN;
  bad_name("model family", s);
}

Measure measure_from_string(std::string_view s) {
  if (s == "pe") return Measure::PE;
  if (s == "ee") return Measure::EE;
  if (s == "mi") return Measure::MI;
  if (s == "one_minus_msr") return Measure::ONE_MINUS_MSR;
  bad_name("measure", s);
}

UncertaintyType uncertainty_type_from_string(std::string_view s) {
  if (s == "pu") return UncertaintyType::PU;
  if (s == "au") return UncertaintyType::AU;
  if (s == "eu") return UncertaintyType::EU;
  bad_name("uncertainty type", s);
}

Split split_from_string(std::string_view s) {
  if (s == "iid") return Split::IID;
  if (s == "ood") return Split::OOD;
  bad_name("split", s);
}

Role role_from_string(std::string_view s) {
  if (s == "train") return Role::TRAIN;
  if (s == "val") return Role::VAL;
  if (s == "test") return Role::TEST;
  if (s == "pool") return Role::POOL;
  bad_name("role", s);
}

std::int64_t numel(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

}  // namespace uqseg
