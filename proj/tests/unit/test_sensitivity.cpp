#include <doctest.h>

#include <random>

#include "fd_oracles.hpp"
#include "fixtures.hpp"
#include "pfr/sensitivity.hpp"
#include "pfr/wls.hpp"

using namespace pfr;
using Eigen::VectorXd;

namespace {

struct Problem {
  Network net;
  MeasurementSet z;
  VectorXd w;
};

Problem noisy_case5(std::uint64_t seed, double sigma) {
  std::mt19937_64 rng(seed);
  Network net = test::load_fixture("case5.m");
  const StateVector truth = test::random_state(net, rng, 0.03, 0.1);
  MeasurementSet z = test::exact_measurements(net, truth, canonical_layout(net));
  std::normal_distribution<double> noise(0.0, sigma);
  for (Eigen::Index i = 0; i < z.values.size(); ++i) z.values[i] += noise(rng);
  std::uniform_real_distribution<double> u(1e2, 1e4);
  VectorXd w(z.values.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = u(rng);
  return {std::move(net), std::move(z), std::move(w)};
}

}  // namespace

TEST_SUITE("sensitivity") {
  TEST_CASE("shape is state by measurement") {
    const Problem p = noisy_case5(1, 0.01);
    const StateVector x = test::restore_tight(p.net, p.z, p.w, StateVector::flat(p.net));
    const SensitivityMatrix S = solution_sensitivity(p.net, p.z, WeightVector(p.w), x);
    CHECK(S.rows() == static_cast<Eigen::Index>(p.net.state_dim()));
    CHECK(S.cols() == p.w.size());
  }

  TEST_CASE("consistent measurements give zero sensitivity") {
    std::mt19937_64 rng(4);
    const Network net = test::load_fixture("case5.m");
    const StateVector truth = test::random_state(net, rng);
    const MeasurementSet z = test::exact_measurements(net, truth, canonical_layout(net));
    const SensitivityMatrix S =
        solution_sensitivity(net, z, WeightVector(VectorXd::Constant(z.values.size(), 7.0)), truth);
    CHECK(S.cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("weighted columns sum to zero") {
    const Problem p = noisy_case5(2, 0.02);
    const StateVector x = test::restore_tight(p.net, p.z, p.w, StateVector::flat(p.net));
    const SensitivityMatrix S = solution_sensitivity(p.net, p.z, WeightVector(p.w), x);
    CHECK((S * p.w).lpNorm<Eigen::Infinity>() < 1e-6 * S.cwiseAbs().maxCoeff() * p.w.maxCoeff());
  }

  TEST_CASE("two-bus columns agree with finite differences") {
    const Network net = test::two_bus();
    const Layout kinds = {{Quantity::Vm, 0}, {Quantity::Vm, 1}, {Quantity::Pinj, 1}, {Quantity::Qinj, 1}};
    VectorXd zv(4);
    zv << 1.0, 0.98, -0.4, -0.25;
    const MeasurementSet z{kinds, zv};
    VectorXd w(4);
    w << 1e4, 1e4, 1e3, 1e3;
    const StateVector x = test::restore_tight(net, z, w, StateVector::flat(net));
    const SensitivityMatrix S = solution_sensitivity(net, z, WeightVector(w), x);
    const Eigen::MatrixXd F = test::fd_sensitivity(net, z, w, x);
    CHECK(test::column_rel_error(S, F, 1e-3 * F.cwiseAbs().maxCoeff()) < 1e-2);
  }

  TEST_CASE("case5 columns agree with finite differences across weight scales") {
    for (double scale : {1e-2, 1.0, 1e2}) {
      Problem p = noisy_case5(3, 0.001);
      p.w *= scale;
      const StateVector x = test::restore_tight(p.net, p.z, p.w, StateVector::flat(p.net));
      const SensitivityMatrix S = solution_sensitivity(p.net, p.z, WeightVector(p.w), x);
      const Eigen::MatrixXd F = test::fd_sensitivity(p.net, p.z, p.w, x);
      CHECK(test::column_rel_error(S, F, 1e-3 * F.cwiseAbs().maxCoeff()) < 1e-2);
    }
  }
}
