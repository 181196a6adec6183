#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace pfr {

/// Base of every error raised by the library. category() is a stable,
/// machine-parseable tag ("case.syntax", "pf.nonconvergence", ...).
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& what)
      : std::runtime_error(what), category_(std::move(category)) {}

  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

enum class CaseErrorKind {
  Syntax,
  DuplicateBus,
  DanglingEndpoint,
  NoSlack,
  MultipleSlack,
  Disconnected,
  InvalidValue,
  Unsupported,
};

class CaseError : public Error {
 public:
  CaseError(CaseErrorKind kind, const std::string& what, int line = 0);

  CaseErrorKind kind() const { return kind_; }
  /// 1-based line of the offending text, 0 when not tied to a line.
  int line() const { return line_; }

 private:
  CaseErrorKind kind_;
  int line_;
};

/// A measurement or state refers to something the network does not have,
/// or vector dimensions do not line up.
class LayoutError : public Error {
 public:
  explicit LayoutError(const std::string& what) : Error("layout", what) {}
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, int iterations, double mismatch,
                      std::string category = "pf.nonconvergence")
      : Error(std::move(category), what), iterations_(iterations), mismatch_(mismatch) {}

  int iterations() const { return iterations_; }
  double mismatch() const { return mismatch_; }

 private:
  int iterations_;
  double mismatch_;
};

class SingularMatrixError : public Error {
 public:
  explicit SingularMatrixError(const std::string& what, std::string category = "linalg.singular")
      : Error(std::move(category), what) {}
};

/// The normal matrix of the estimator is singular: the selected measurements
/// do not determine the state.
class UnobservableError : public SingularMatrixError {
 public:
  explicit UnobservableError(const std::string& what)
      : SingularMatrixError(what, "wls.unobservable") {}
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& what) : Error("precondition", what) {}
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

class LpError : public Error {
 public:
  LpError(LpStatus status, const std::string& what);

  LpStatus status() const { return status_; }

 private:
  LpStatus status_;
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& what) : Error("train.failed", what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error("format", what) {}
};

}  // namespace pfr
