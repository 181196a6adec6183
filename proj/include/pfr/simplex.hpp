#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace pfr {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { Le, Eq, Ge };

struct LpTerm {
  std::size_t var;
  double coef;
};

struct LpRow {
  std::string name;
  std::vector<LpTerm> terms;
  Sense sense = Sense::Le;
  double rhs = 0.0;
};

/// min c'x  s.t.  rows (<=, =, >=),  lower <= x <= upper.
class LinearProgram {
 public:
  std::size_t add_variable(std::string name, double lower, double upper, double cost = 0.0);
  std::size_t add_row(std::string name, std::vector<LpTerm> terms, Sense sense, double rhs);

  std::size_t num_variables() const { return names_.size(); }
  std::size_t num_rows() const { return rows_.size(); }
  const std::string& variable_name(std::size_t j) const { return names_[j]; }
  double lower(std::size_t j) const { return lower_[j]; }
  double upper(std::size_t j) const { return upper_[j]; }
  double cost(std::size_t j) const { return cost_[j]; }
  void set_cost(std::size_t j, double c) { cost_[j] = c; }
  const std::vector<LpRow>& rows() const { return rows_; }

  /// Row activities A x.
  Eigen::VectorXd activities(const Eigen::VectorXd& x) const;
  double objective(const Eigen::VectorXd& x) const;

  /// Throws PreconditionError on non-finite data, bad indices or lower > upper.
  void validate() const;

  /// CPLEX LP text format.
  std::string to_lp_format() const;

 private:
  std::vector<std::string> names_;
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<double> cost_;
  std::vector<LpRow> rows_;
};

struct SimplexOptions {
  int max_iter = 100000;
  double tolerance = 1e-9;
  /// Consecutive degenerate pivots before switching to Bland's rule for good.
  int degenerate_streak = 50;
  int refactor_every = 64;
};

struct LpSolution {
  Eigen::VectorXd x;
  /// One multiplier per row; <= rows carry y <= 0, >= rows y >= 0.
  Eigen::VectorXd row_duals;
  double objective = 0.0;
  int iterations = 0;
  bool used_bland = false;
};

/// Two-phase dense tableau simplex. Throws LpError with status Infeasible,
/// Unbounded or IterationLimit.
LpSolution simplex_solve(const LinearProgram& lp, const SimplexOptions& opts = {});

struct Certificate {
  double primal_violation = 0.0;  // rows and bounds, scaled by 1 + |rhs|
  double dual_violation = 0.0;    // reduced-cost and multiplier signs, scaled by 1 + |c|
  double complementarity = 0.0;
  double duality_gap = 0.0;  // relative

  bool passes(double tol) const {
    return primal_violation <= tol && dual_violation <= tol && complementarity <= tol &&
           duality_gap <= tol;
  }
};

/// Checks optimality of (x, y) against the original problem data only.
Certificate check_certificate(const LinearProgram& lp, const LpSolution& sol);

}  // namespace pfr
