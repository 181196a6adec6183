#include "pfr/wls.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "pfr/acpf.hpp"
#include "pfr/errors.hpp"

namespace pfr {

namespace {

using Eigen::Index;

constexpr double kSingularRcond = 1e-13;
constexpr double kNullEigenRatio = 1e-12;

double weighted_objective(const Eigen::VectorXd& r, const Eigen::VectorXd& w) {
  return (r.array().square() * w.array()).sum();
}

[[noreturn]] void throw_unobservable(const Eigen::MatrixXd& normal, const Network* net) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal);
  const Eigen::VectorXd dir = eig.eigenvectors().col(0);
  std::vector<Index> order(static_cast<std::size_t>(dir.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(),
            [&](Index a, Index b) { return std::abs(dir[a]) > std::abs(dir[b]); });
  std::string names;
  for (std::size_t k = 0; k < std::min<std::size_t>(3, order.size()); ++k) {
    if (k) names += ", ";
    const auto col = static_cast<std::size_t>(order[k]);
    names += net ? state_entry_name(*net, col) : fmt::format("x[{}]", col);
  }
  throw UnobservableError(
      fmt::format("measurements do not determine the state; null direction dominated by {}",
                  names));
}

}  // namespace

WeightVector::WeightVector(Eigen::VectorXd w, double floor) : w_(std::move(w)), floor_(floor) {
  if (!(floor_ > 0.0)) throw PreconditionError("weight floor must be positive");
  for (Index i = 0; i < w_.size(); ++i) {
    if (!std::isfinite(w_[i]) || w_[i] < floor_) {
      throw PreconditionError(
          fmt::format("weight {} is {:.3e}, below the floor {:.1e}", i, w_[i], floor_));
    }
  }
}

WeightVector WeightVector::scaled(double c) const {
  return WeightVector(w_ * c, std::min(floor_, floor_ * c));
}

std::string state_entry_name(const Network& net, std::size_t column) {
  const std::size_t nb = net.num_buses();
  if (column < nb) return fmt::format("vm[bus {}]", net.bus(column).id);
  std::size_t bus = column - nb;
  if (bus >= net.slack()) ++bus;
  if (bus >= nb) return fmt::format("x[{}]", column);
  return fmt::format("va[bus {}]", net.bus(bus).id);
}

NormalMatrix::NormalMatrix(const Eigen::MatrixXd& H, const Eigen::VectorXd& w,
                           const Network* net) {
  const Eigen::MatrixXd normal = H.transpose() * w.asDiagonal() * H;
  llt_.compute(normal);
  if (llt_.info() != Eigen::Success) {
    use_ldlt_ = true;
    ldlt_.compute(normal);
    if (ldlt_.info() != Eigen::Success || !(ldlt_.rcond() > kSingularRcond)) {
      throw_unobservable(normal, net);
    }
    return;
  }
  if (!(llt_.rcond() > kSingularRcond)) {
    // Cheap test failed; confirm with the spectrum before giving up.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal, Eigen::EigenvaluesOnly);
    const double hi = eig.eigenvalues().maxCoeff();
    const double lo = eig.eigenvalues().minCoeff();
    if (!(lo > kNullEigenRatio * hi)) throw_unobservable(normal, net);
  }
}

Eigen::VectorXd NormalMatrix::solve(const Eigen::VectorXd& rhs) const {
  return use_ldlt_ ? Eigen::VectorXd(ldlt_.solve(rhs)) : Eigen::VectorXd(llt_.solve(rhs));
}

Eigen::MatrixXd NormalMatrix::solve(const Eigen::MatrixXd& rhs) const {
  return use_ldlt_ ? Eigen::MatrixXd(ldlt_.solve(rhs)) : Eigen::MatrixXd(llt_.solve(rhs));
}

WlsResult wls_restore(const Network& net, const MeasurementSet& z, const WeightVector& w,
                      const StateVector& x0, const WlsOptions& opts) {
  const std::size_t m = z.size();
  if (static_cast<std::size_t>(z.values.size()) != m || w.size() != m) {
    throw LayoutError(fmt::format("{} measurement kinds, {} values, {} weights", m,
                                  z.values.size(), w.size()));
  }
  validate_layout(z.kinds, net);
  const std::size_t nb = net.num_buses();
  const std::size_t n = net.state_dim();
  if (m < n) {
    throw UnobservableError(
        fmt::format("{} measurements cannot determine {} state entries", m, n));
  }
  const Eigen::VectorXd& wv = w.values();

  Eigen::VectorXd x = x0.flatten();
  Eigen::VectorXd r = z.values - eval_h(net, x0, z.kinds);
  double J = weighted_objective(r, wv);

  WlsResult res(x0);
  res.residual = r;
  res.objective = J;
  if (opts.record_iterates) {
    res.iterates.push_back(x);
    res.objectives.push_back(J);
  }

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    const StateVector state = StateVector::from_flat(x, nb, net.slack());
    const Eigen::MatrixXd H = eval_H(net, state, z.kinds);
    const NormalMatrix normal(H, wv, &net);
    Eigen::VectorXd step = normal.solve(Eigen::VectorXd(H.transpose() * (wv.asDiagonal() * r)));

    Eigen::VectorXd x_new;
    Eigen::VectorXd r_new;
    double J_new = 0.0;
    for (int halving = 0;; ++halving) {
      x_new = x + step;
      const bool positive = x_new.head(static_cast<Index>(nb)).minCoeff() > 0.0;
      if (positive && x_new.allFinite()) {
        r_new = z.values -
                eval_h(net, StateVector::from_flat(x_new, nb, net.slack()), z.kinds);
        J_new = weighted_objective(r_new, wv);
        const bool inflated = J_new > opts.growth_limit * J && J_new > 1e-20;
        if (!inflated || halving >= opts.max_halvings) break;
      } else if (halving >= opts.max_halvings) {
        // No usable step: report what we have.
        res.iterations = iter;
        return res;
      }
      step *= 0.5;
    }

    x = std::move(x_new);
    r = std::move(r_new);
    J = J_new;
    res.iterations = iter + 1;
    res.last_step = step.lpNorm<Eigen::Infinity>();
    res.x = StateVector::from_flat(x, nb, net.slack());
    res.residual = r;
    res.objective = J;
    if (opts.record_iterates) {
      res.iterates.push_back(x);
      res.objectives.push_back(J);
    }
    if (res.last_step < opts.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace pfr
