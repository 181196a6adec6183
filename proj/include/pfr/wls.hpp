#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pfr/measurement.hpp"
#include "pfr/network.hpp"

namespace pfr {

inline constexpr double kDefaultWeightFloor = 1e-8;

/// Diagonal of the weighting matrix, one entry per measurement.
class WeightVector {
 public:
  WeightVector() = default;
  explicit WeightVector(Eigen::VectorXd w, double floor = kDefaultWeightFloor);

  const Eigen::VectorXd& values() const { return w_; }
  double floor() const { return floor_; }
  std::size_t size() const { return static_cast<std::size_t>(w_.size()); }
  double operator[](std::size_t i) const { return w_[static_cast<Eigen::Index>(i)]; }

  WeightVector scaled(double c) const;

 private:
  Eigen::VectorXd w_;
  double floor_ = kDefaultWeightFloor;
};

struct WlsOptions {
  double tol = 1e-8;
  int max_iter = 50;
  /// Halve a step up to this many times when it inflates the objective
  /// by more than `growth_limit`.
  int max_halvings = 5;
  double growth_limit = 10.0;
  bool record_iterates = false;
};

struct WlsResult {
  explicit WlsResult(StateVector start) : x(std::move(start)) {}

  StateVector x;
  Eigen::VectorXd residual;  // z - h(x)
  double objective = 0.0;    // residual' W residual
  int iterations = 0;
  bool converged = false;
  double last_step = 0.0;  // infinity norm of the final update
  std::vector<Eigen::VectorXd> iterates;  // flattened x^0, x^1, ... when recorded
  std::vector<double> objectives;         // J(x^k) matching `iterates`
};

/// Gauss-Newton weighted least squares:
///   x <- x + (H'WH)^{-1} H'W (z - h(x))
/// until the update's infinity norm drops below tol. Non-convergence is
/// reported through the result. Throws UnobservableError when H'WH is singular.
WlsResult wls_restore(const Network& net, const MeasurementSet& z, const WeightVector& w,
                      const StateVector& x0, const WlsOptions& opts = {});

/// Factorization of the normal matrix H'WH: Cholesky, with a pivoted LDL'
/// fallback. Throws UnobservableError naming the dominant state entries of
/// the null direction when the matrix is numerically singular.
class NormalMatrix {
 public:
  NormalMatrix(const Eigen::MatrixXd& H, const Eigen::VectorXd& w, const Network* net = nullptr);

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
  bool use_ldlt_ = false;
};

/// Human-readable name of a flattened state entry ("vm[bus 3]", "va[bus 7]").
std::string state_entry_name(const Network& net, std::size_t column);

}  // namespace pfr
