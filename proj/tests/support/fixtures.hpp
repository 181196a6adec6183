#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pfr/acpf.hpp"
#include "pfr/case_io.hpp"
#include "pfr/measurement.hpp"
#include "pfr/network.hpp"

namespace pfr::test {

inline std::string data_path(const std::string& name) {
  return std::string(PFR_DATA_DIR) + "/" + name;
}

inline Network load_fixture(const std::string& name) { return load_case_file(data_path(name)); }

inline const std::vector<std::string>& fixture_names() {
  static const std::vector<std::string> names = {"case5.m", "case14.m", "case57.m", "case118.m"};
  return names;
}

/// Slack bus 1 feeding a 0.4 + j0.25 load at bus 2 over r = 0.01, x = 0.1.
inline Network two_bus() {
  std::vector<Bus> buses(2);
  buses[0].id = 1;
  buses[0].type = BusType::Slack;
  buses[1].id = 2;
  buses[1].p_load = 0.4;
  buses[1].q_load = 0.25;
  Branch br;
  br.from = 1;
  br.to = 2;
  br.r = 0.01;
  br.x = 0.1;
  br.s_max = 2.0;
  Generator g;
  g.bus = 1;
  g.p_max = 2.0;
  g.q_min = -2.0;
  g.q_max = 2.0;
  g.c1 = 10.0;
  return Network(100.0, std::move(buses), {br}, {g});
}

/// Vm, Va perturbed around flat by the given spreads.
inline StateVector random_state(const Network& net, std::mt19937_64& rng, double vm_spread = 0.05,
                                double va_spread = 0.2) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto n = static_cast<Eigen::Index>(net.num_buses());
  Eigen::VectorXd vm(n), va(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    vm[i] = 1.0 + vm_spread * u(rng);
    va[i] = va_spread * u(rng);
  }
  return StateVector(vm, va, net.slack());
}

inline MeasurementSet exact_measurements(const Network& net, const StateVector& x,
                                         const Layout& layout) {
  return {layout, eval_h(net, x, layout)};
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace pfr::test

