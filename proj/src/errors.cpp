#include "pfr/errors.hpp"

#include <fmt/format.h>

namespace pfr {

namespace {

const char* case_category(CaseErrorKind kind) {
  switch (kind) {
    case CaseErrorKind::Syntax: return "case.syntax";
    case CaseErrorKind::DuplicateBus: return "case.duplicate_bus";
    case CaseErrorKind::DanglingEndpoint: return "case.dangling_endpoint";
    case CaseErrorKind::NoSlack: return "case.no_slack";
    case CaseErrorKind::MultipleSlack: return "case.multiple_slack";
    case CaseErrorKind::Disconnected: return "case.disconnected";
    case CaseErrorKind::InvalidValue: return "case.invalid_value";
    case CaseErrorKind::Unsupported: return "case.unsupported";
  }
  return "case";
}

const char* lp_category(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "lp.optimal";
    case LpStatus::Infeasible: return "lp.infeasible";
    case LpStatus::Unbounded: return "lp.unbounded";
    case LpStatus::IterationLimit: return "lp.iteration_limit";
  }
  return "lp";
}

}  // namespace

CaseError::CaseError(CaseErrorKind kind, const std::string& what, int line)
    : Error(case_category(kind), line > 0 ? fmt::format("line {}: {}", line, what) : what),
      kind_(kind),
      line_(line) {}

LpError::LpError(LpStatus status, const std::string& what)
    : Error(lp_category(status), what), status_(status) {}

}  // namespace pfr
