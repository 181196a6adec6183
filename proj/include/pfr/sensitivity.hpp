#pragma once

#include <Eigen/Dense>

#include "pfr/measurement.hpp"
#include "pfr/network.hpp"
#include "pfr/wls.hpp"

namespace pfr {

/// d(x_R)_j / d(w_i): one row per state entry, one column per measurement.
using SensitivityMatrix = Eigen::MatrixXd;

/// Sensitivity of the restored state to each diagonal weight, holding the
/// Jacobian fixed at x_R. With r = z - h(x_R), A = (H'WH)^{-1} H' and the
/// projected residual rho = r - H A W r, column i is A(:, i) * rho_i; this is
/// the diagonal slice of the Kronecker-product form
///   (rho' (x) A) vec(dW).
/// Throws UnobservableError when H'WH is singular at x_R.
SensitivityMatrix solution_sensitivity(const Network& net, const MeasurementSet& z,
                                       const WeightVector& w, const StateVector& x_r);

}  // namespace pfr
