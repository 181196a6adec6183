#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pfr/measurement.hpp"
#include "pfr/network.hpp"

namespace pfr {

struct BranchFlow {
  double p_fr = 0.0;
  double q_fr = 0.0;
  double p_to = 0.0;
  double q_to = 0.0;
};

/// Net bus injections and branch-end flows implied by a voltage state.
struct PowerFlows {
  Eigen::VectorXd p_inj;
  Eigen::VectorXd q_inj;
  std::vector<BranchFlow> flows;
};

PowerFlows compute_flows(const Network& net, const StateVector& x);

/// Measurement model h(x) for the requested kinds.
Eigen::VectorXd eval_h(const Network& net, const StateVector& x,
                       std::span<const MeasurementKind> kinds);

/// Jacobian dh/dx, one row per kind, columns in StateVector::flatten() order.
Eigen::MatrixXd eval_H(const Network& net, const StateVector& x,
                       std::span<const MeasurementKind> kinds);

/// Fixed quantities of a conventional power flow. Slack buses fix (vm, angle 0),
/// PV buses fix (p, vm), PQ buses fix (p, q). Unused entries are ignored.
struct PowerFlowSpec {
  std::vector<BusType> role;
  Eigen::VectorXd p;
  Eigen::VectorXd q;
  Eigen::VectorXd vm;
};

/// Loads and nominal generator set-points of the network itself.
PowerFlowSpec nominal_spec(const Network& net);

struct NewtonOptions {
  double tol = 1e-8;
  int max_iter = 30;
};

struct NewtonResult {
  StateVector state;
  int iterations = 0;
  double mismatch = 0.0;
};

/// Full Newton-Raphson in polar coordinates. Throws NonConvergenceError, or
/// SingularMatrixError when the Jacobian at the starting point is singular.
NewtonResult newton_pf(const Network& net, const PowerFlowSpec& spec, const StateVector& x0,
                       const NewtonOptions& opts = {});

/// A voltage state together with everything it implies.
struct OperatingPoint {
  StateVector state;
  Eigen::VectorXd p_inj;
  Eigen::VectorXd q_inj;
  std::vector<BranchFlow> flows;
  Eigen::VectorXd p_gen;
  Eigen::VectorXd q_gen;
};

/// Evaluates injections and flows at `x` and splits each bus's generation
/// (injection plus load) over its generators in proportion to their output
/// ranges (equal shares when the ranges are all zero).
OperatingPoint make_operating_point(const Network& net, const StateVector& x);

/// Power-flow specification of the benchmark method: Vm at every generator
/// bus and Pinj at every non-slack generator bus come from `z`; load buses
/// keep the network's demand. Throws PreconditionError when `z` lacks an entry.
PowerFlowSpec benchmark_spec(const Network& net, const MeasurementSet& z);

struct BenchmarkResult {
  OperatingPoint point;
  int iterations = 0;
  double mismatch = 0.0;
};

/// Restoration by conventional power flow from a flat start.
BenchmarkResult benchmark_restore(const Network& net, const MeasurementSet& z,
                                  const NewtonOptions& opts = {});

/// Largest violation of each OPF inequality family. Zero means satisfied.
struct ViolationReport {
  double voltage = 0.0;    // magnitude bounds
  double generator = 0.0;  // generator output bounds (zero limits at load buses)
  double flow = 0.0;       // apparent-power ratings
  double angle = 0.0;      // angle-difference limits

  double max() const;
};

ViolationReport constraint_report(const Network& net, const OperatingPoint& op);

}  // namespace pfr
