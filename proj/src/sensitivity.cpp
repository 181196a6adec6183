#include "pfr/sensitivity.hpp"

#include <fmt/format.h>

#include "pfr/acpf.hpp"
#include "pfr/errors.hpp"

namespace pfr {

SensitivityMatrix solution_sensitivity(const Network& net, const MeasurementSet& z,
                                       const WeightVector& w, const StateVector& x_r) {
  if (w.size() != z.size() || static_cast<std::size_t>(z.values.size()) != z.size()) {
    throw LayoutError(
        fmt::format("{} measurements but {} weights", z.size(), w.size()));
  }
  const Eigen::VectorXd& wv = w.values();
  const Eigen::MatrixXd H = eval_H(net, x_r, z.kinds);
  const Eigen::VectorXd r = z.values - eval_h(net, x_r, z.kinds);
  const NormalMatrix normal(H, wv, &net);
  const Eigen::MatrixXd A = normal.solve(Eigen::MatrixXd(H.transpose()));
  const Eigen::VectorXd rho = r - H * (A * (wv.asDiagonal() * r));
  return A * rho.asDiagonal();
}

}  // namespace pfr
