#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "pfr/acpf.hpp"
#include "pfr/errors.hpp"

using namespace pfr;
using Eigen::VectorXd;

namespace {

Eigen::MatrixXd fd_jacobian(const Network& net, const StateVector& x, const Layout& kinds,
                            double step) {
  const VectorXd x0 = x.flatten();
  Eigen::MatrixXd H(static_cast<Eigen::Index>(kinds.size()), x0.size());
  for (Eigen::Index j = 0; j < x0.size(); ++j) {
    VectorXd xp = x0, xm = x0;
    xp[j] += step;
    xm[j] -= step;
    const auto sp = StateVector::from_flat(xp, net.num_buses(), net.slack());
    const auto sm = StateVector::from_flat(xm, net.num_buses(), net.slack());
    H.col(j) = (eval_h(net, sp, kinds) - eval_h(net, sm, kinds)) / (2 * step);
  }
  return H;
}

}  // namespace

TEST_SUITE("acpf") {
  TEST_CASE("branch flows match phasor oracle") {
    const Network net = test::two_bus();
    VectorXd vm(2), va(2);
    vm << 1.0, 0.95;
    va << 0.0, -0.1;
    const PowerFlows f = compute_flows(net, StateVector(vm, va, 0));
    CHECK(f.flows[0].p_fr == doctest::Approx(0.99323118923835929).epsilon(1e-13));
    CHECK(f.flows[0].q_fr == doctest::Approx(0.4481373109349196).epsilon(1e-13));
    CHECK(f.flows[0].p_to == doctest::Approx(-0.98135783679108102).epsilon(1e-13));
    CHECK(f.flows[0].q_to == doctest::Approx(-0.32940378646213697).epsilon(1e-13));
    CHECK(f.p_inj[0] == doctest::Approx(f.flows[0].p_fr));
    CHECK(f.q_inj[1] == doctest::Approx(f.flows[0].q_to));
  }

  TEST_CASE("jacobian agrees with central differences") {
    std::mt19937_64 rng(11);
    for (const char* name : {"case5.m", "case14.m"}) {
      const Network net = test::load_fixture(name);
      const Layout kinds = canonical_layout(net);
      for (int trial = 0; trial < 3; ++trial) {
        const StateVector x = test::random_state(net, rng);
        const Eigen::MatrixXd H = eval_H(net, x, kinds);
        const Eigen::MatrixXd F = fd_jacobian(net, x, kinds, 1e-6);
        const double err = (H - F).cwiseAbs().maxCoeff() / (1.0 + F.cwiseAbs().maxCoeff());
        CHECK(err < 1e-6);
      }
    }
  }

  TEST_CASE("lossless branches carry equal and opposite active power") {
    const Network base = test::load_fixture("case14.m");
    std::vector<Branch> branches(base.branches().begin(), base.branches().end());
    for (Branch& br : branches) br.r = 0.0;
    const Network net(base.base_mva(), {base.buses().begin(), base.buses().end()}, branches,
                      {base.generators().begin(), base.generators().end()});
    std::mt19937_64 rng(3);
    const PowerFlows f = compute_flows(net, test::random_state(net, rng));
    for (const BranchFlow& b : f.flows) CHECK(b.p_fr == doctest::Approx(-b.p_to).epsilon(1e-12));
  }

  TEST_CASE("flat state of a shunt-free network has no flows") {
    const Network net = test::two_bus();
    const Layout kinds = canonical_layout(net);
    const VectorXd h = eval_h(net, StateVector::flat(net), kinds);
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      if (!is_voltage_quantity(kinds[k].quantity)) CHECK(h[static_cast<Eigen::Index>(k)] == 0.0);
    }
  }

  TEST_CASE("nominal power flow on case5") {
    const Network net = test::load_fixture("case5.m");
    const NewtonResult r = newton_pf(net, nominal_spec(net), StateVector::flat(net));
    CHECK(r.iterations == 3);
    CHECK(r.mismatch < 1e-8);
    CHECK(net.slack() == 3);
    const double want_va[] = {0.0571309, -0.0132517, -0.00859153, 0.0, 0.0717685};
    for (Eigen::Index i = 0; i < 5; ++i) CHECK(r.state.va()[i] == doctest::Approx(want_va[i]).epsilon(1e-5));
    CHECK(r.state.vm()[1] == doctest::Approx(0.989261).epsilon(1e-5));
  }

  TEST_CASE("power flow is a fixed point of itself") {
    for (const auto& name : test::fixture_names()) {
      const Network net = test::load_fixture(name);
      const PowerFlowSpec spec = nominal_spec(net);
      const NewtonResult r = newton_pf(net, spec, StateVector::flat(net));
      const NewtonResult again = newton_pf(net, spec, r.state);
      CHECK(again.iterations <= 1);
      CHECK((again.state.flatten() - r.state.flatten()).lpNorm<Eigen::Infinity>() < 1e-8);
    }
  }

  TEST_CASE("impossible demand fails to converge") {
    const Network net = test::two_bus().with_loads({{0, 0}, {40.0, 20.0}});
    CHECK_THROWS_AS(newton_pf(net, nominal_spec(net), StateVector::flat(net)), NonConvergenceError);
  }

  TEST_CASE("generator split follows output ranges") {
    const Network net = test::load_fixture("case5.m");
    const NewtonResult r = newton_pf(net, nominal_spec(net), StateVector::flat(net));
    const OperatingPoint op = make_operating_point(net, r.state);
    // bus 1 hosts generators 0 (p_max 40) and 1 (p_max 170)
    CHECK(op.p_gen[1] / op.p_gen[0] == doctest::Approx(170.0 / 40.0));
    CHECK(op.p_gen[0] + op.p_gen[1] == doctest::Approx(op.p_inj[0]));
  }

  TEST_CASE("benchmark restores a consistent solution exactly") {
    for (const auto& name : test::fixture_names()) {
      const Network net = test::load_fixture(name);
      const NewtonResult r = newton_pf(net, nominal_spec(net), StateVector::flat(net));
      const MeasurementSet z = test::exact_measurements(net, r.state, canonical_layout(net));
      const BenchmarkResult b = benchmark_restore(net, z);
      CHECK(b.mismatch < 1e-8);
      CHECK((b.point.state.flatten() - r.state.flatten()).lpNorm<Eigen::Infinity>() < 1e-7);
    }
  }

  TEST_CASE("benchmark needs generator measurements") {
    const Network net = test::load_fixture("case5.m");
    const Layout kinds = {{Quantity::Vm, 0}};
    const MeasurementSet z{kinds, VectorXd::Ones(1)};
    CHECK_THROWS_AS(benchmark_restore(net, z), PreconditionError);
  }

  TEST_CASE("violation report is zero inside limits") {
    const Network net = test::load_fixture("case5.m");
    const NewtonResult r = newton_pf(net, nominal_spec(net), StateVector::flat(net));
    const ViolationReport v = constraint_report(net, make_operating_point(net, r.state));
    CHECK(v.voltage == 0.0);
    CHECK(v.angle == 0.0);
  }
}
