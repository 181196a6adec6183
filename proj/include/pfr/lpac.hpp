#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "pfr/acpf.hpp"
#include "pfr/measurement.hpp"
#include "pfr/network.hpp"
#include "pfr/simplex.hpp"

namespace pfr {

struct LpacConfig {
  int cos_tangents = 9;
  int circle_cuts = 8;
  int cost_segments = 6;
};

/// Throws PreconditionError on counts below 2 (3 for the circle polygon).
void validate(const LpacConfig& cfg);

/// Cold-start LPAC model: the LP plus the column of each physical quantity.
struct LpacModel {
  LinearProgram lp;
  std::vector<std::size_t> v;      // per bus, deviation from 1 p.u.
  std::vector<std::size_t> theta;  // per bus
  std::vector<std::size_t> phi;    // per branch, stands in for cos(angle difference)
  std::vector<std::size_t> p_fr, q_fr, p_to, q_to;  // per branch
  std::vector<std::size_t> p_g, q_g, cost;           // per generator
};

/// Tangent points of the cosine envelope for an angle limit.
std::vector<double> cosine_tangent_points(double theta_max, int count);

LpacModel build_lpac(const Network& net, const LpacConfig& cfg = {});

struct LpacSolution {
  Eigen::VectorXd v;
  Eigen::VectorXd theta;
  Eigen::VectorXd phi;
  std::vector<BranchFlow> flows;
  Eigen::VectorXd p_g;
  Eigen::VectorXd q_g;
  double objective = 0.0;
  LpSolution raw;
};

LpacSolution extract_solution(const Network& net, const LpacModel& model, LpSolution raw);

/// build_lpac followed by simplex_solve.
LpacSolution solve_lpac(const Network& net, const LpacConfig& cfg = {},
                        const SimplexOptions& opts = {});

/// Canonical-layout measurements taken verbatim from the LPAC variables:
/// Vm = 1 + v, Va = theta, injections = generation - load, LP branch flows.
MeasurementSet lpac_to_measurements(const Network& net, const LpacSolution& sol);

}  // namespace pfr
