#include "pfr/lpac.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "pfr/errors.hpp"

namespace pfr {

namespace {

using Eigen::Index;

// Tangent cuts of cos are only valid where cos is concave.
double envelope_limit(const Branch& br) { return std::min(br.theta_max, std::numbers::pi / 2.0); }

}  // namespace

void validate(const LpacConfig& cfg) {
  if (cfg.cos_tangents < 2 || cfg.cost_segments < 2) {
    throw PreconditionError("cosine tangent and cost segment counts must be at least 2");
  }
  if (cfg.circle_cuts < 3) throw PreconditionError("the flow-limit polygon needs at least 3 sides");
}

std::vector<double> cosine_tangent_points(double theta_max, int count) {
  if (count < 2) throw PreconditionError("at least two tangent points are required");
  std::vector<double> pts(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    pts[static_cast<std::size_t>(k)] = -theta_max + 2.0 * theta_max * k / (count - 1);
  }
  return pts;
}

LpacModel build_lpac(const Network& net, const LpacConfig& cfg) {
  validate(cfg);
  LpacModel m;
  LinearProgram& lp = m.lp;
  const std::size_t nb = net.num_buses();
  const std::size_t ne = net.num_branches();
  const std::size_t ng = net.num_generators();

  for (std::size_t i = 0; i < nb; ++i) {
    const Bus& b = net.bus(i);
    m.v.push_back(lp.add_variable(fmt::format("v_{}", b.id), b.v_min - 1.0, b.v_max - 1.0));
  }
  for (std::size_t i = 0; i < nb; ++i) {
    const double lim = i == net.slack() ? 0.0 : kInf;
    m.theta.push_back(lp.add_variable(fmt::format("theta_{}", net.bus(i).id), -lim, lim));
  }
  for (std::size_t e = 0; e < ne; ++e) {
    m.phi.push_back(
        lp.add_variable(fmt::format("phi_{}", e + 1), std::cos(envelope_limit(net.branch(e))), 1.0));
  }
  for (std::size_t e = 0; e < ne; ++e) {
    m.p_fr.push_back(lp.add_variable(fmt::format("pfr_{}", e + 1), -kInf, kInf));
    m.q_fr.push_back(lp.add_variable(fmt::format("qfr_{}", e + 1), -kInf, kInf));
    m.p_to.push_back(lp.add_variable(fmt::format("pto_{}", e + 1), -kInf, kInf));
    m.q_to.push_back(lp.add_variable(fmt::format("qto_{}", e + 1), -kInf, kInf));
  }
  for (std::size_t g = 0; g < ng; ++g) {
    const Generator& gen = net.generator(g);
    m.p_g.push_back(lp.add_variable(fmt::format("pg_{}", g + 1), gen.p_min, gen.p_max));
    m.q_g.push_back(lp.add_variable(fmt::format("qg_{}", g + 1), gen.q_min, gen.q_max));
    m.cost.push_back(lp.add_variable(fmt::format("cost_{}", g + 1), -kInf, kInf, 1.0));
  }

  // Linearized branch flows. Line charging enters each end with |V|^2 ~ 1 + 2v.
  for (std::size_t e = 0; e < ne; ++e) {
    const Branch& br = net.branch(e);
    const Complex y = net.two_port(e).y_series;
    const double g = y.real();
    const double b = y.imag();
    const double bc = br.b_charge / 2.0;
    const std::size_t j = net.from_index(e);
    const std::size_t k = net.to_index(e);
    const auto p_row = [&](std::size_t p, std::size_t a, std::size_t c, const char* tag) {
      lp.add_row(fmt::format("{}_{}", tag, e + 1),
                 {{p, 1.0}, {m.phi[e], g}, {m.theta[a], b}, {m.theta[c], -b}}, Sense::Eq, g);
    };
    const auto q_row = [&](std::size_t q, std::size_t a, std::size_t c, const char* tag) {
      lp.add_row(fmt::format("{}_{}", tag, e + 1),
                 {{q, 1.0},
                  {m.v[a], b + 2.0 * bc},
                  {m.v[c], -b},
                  {m.theta[a], g},
                  {m.theta[c], -g},
                  {m.phi[e], -b}},
                 Sense::Eq, -b - bc);
    };
    p_row(m.p_fr[e], j, k, "pdef_fr");
    q_row(m.q_fr[e], j, k, "qdef_fr");
    p_row(m.p_to[e], k, j, "pdef_to");
    q_row(m.q_to[e], k, j, "qdef_to");
  }

  // Nodal balance: generation - load = outgoing flows + shunt consumption.
  for (std::size_t i = 0; i < nb; ++i) {
    const Bus& bus = net.bus(i);
    std::vector<LpTerm> p_terms;
    std::vector<LpTerm> q_terms;
    for (std::size_t g : net.generators_at(i)) {
      p_terms.push_back({m.p_g[g], 1.0});
      q_terms.push_back({m.q_g[g], 1.0});
    }
    for (std::size_t e = 0; e < ne; ++e) {
      if (net.from_index(e) == i) {
        p_terms.push_back({m.p_fr[e], -1.0});
        q_terms.push_back({m.q_fr[e], -1.0});
      }
      if (net.to_index(e) == i) {
        p_terms.push_back({m.p_to[e], -1.0});
        q_terms.push_back({m.q_to[e], -1.0});
      }
    }
    if (bus.g_shunt != 0.0) p_terms.push_back({m.v[i], -2.0 * bus.g_shunt});
    if (bus.b_shunt != 0.0) q_terms.push_back({m.v[i], 2.0 * bus.b_shunt});
    lp.add_row(fmt::format("pbal_{}", bus.id), std::move(p_terms), Sense::Eq,
               bus.p_load + bus.g_shunt);
    lp.add_row(fmt::format("qbal_{}", bus.id), std::move(q_terms), Sense::Eq,
               bus.q_load - bus.b_shunt);
  }

  for (std::size_t e = 0; e < ne; ++e) {
    const Branch& br = net.branch(e);
    const double lim = envelope_limit(br);
    const std::size_t j = net.from_index(e);
    const std::size_t k = net.to_index(e);
    const auto pts = cosine_tangent_points(lim, cfg.cos_tangents);
    for (std::size_t t = 0; t < pts.size(); ++t) {
      const double s = std::sin(pts[t]);
      lp.add_row(fmt::format("cos_{}_{}", e + 1, t + 1),
                 {{m.phi[e], 1.0}, {m.theta[j], s}, {m.theta[k], -s}}, Sense::Le,
                 std::cos(pts[t]) + pts[t] * s);
    }
    lp.add_row(fmt::format("angmax_{}", e + 1), {{m.theta[j], 1.0}, {m.theta[k], -1.0}},
               Sense::Le, lim);
    lp.add_row(fmt::format("angmin_{}", e + 1), {{m.theta[j], 1.0}, {m.theta[k], -1.0}},
               Sense::Ge, -lim);
    if (br.s_max > 0.0) {
      const double n = cfg.circle_cuts;
      const double rhs = br.s_max * std::cos(std::numbers::pi / n);
      for (int c = 0; c < cfg.circle_cuts; ++c) {
        const double a = 2.0 * std::numbers::pi * c / n;
        lp.add_row(fmt::format("smax_fr_{}_{}", e + 1, c + 1),
                   {{m.p_fr[e], std::cos(a)}, {m.q_fr[e], std::sin(a)}}, Sense::Le, rhs);
        lp.add_row(fmt::format("smax_to_{}_{}", e + 1, c + 1),
                   {{m.p_to[e], std::cos(a)}, {m.q_to[e], std::sin(a)}}, Sense::Le, rhs);
      }
    }
  }

  // Secant epigraph of c2 p^2 + c1 p + c0 with uniform breakpoints.
  for (std::size_t g = 0; g < ng; ++g) {
    const Generator& gen = net.generator(g);
    const auto f = [&](double p) { return (gen.c2 * p + gen.c1) * p + gen.c0; };
    const bool linear = gen.c2 == 0.0 || gen.p_max == gen.p_min;
    const int pieces = linear ? 1 : cfg.cost_segments;
    const double width = (gen.p_max - gen.p_min) / pieces;
    for (int s = 0; s < pieces; ++s) {
      const double a = gen.p_min + s * width;
      const double slope = linear ? gen.c1 + 2.0 * gen.c2 * a : (f(a + width) - f(a)) / width;
      lp.add_row(fmt::format("costseg_{}_{}", g + 1, s + 1),
                 {{m.cost[g], 1.0}, {m.p_g[g], -slope}}, Sense::Ge, f(a) - slope * a);
    }
  }
  return m;
}

LpacSolution extract_solution(const Network& net, const LpacModel& model, LpSolution raw) {
  const auto pick = [&](const std::vector<std::size_t>& idx) {
    Eigen::VectorXd out(static_cast<Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<Index>(k)] = raw.x[static_cast<Index>(idx[k])];
    return out;
  };
  LpacSolution sol;
  sol.v = pick(model.v);
  sol.theta = pick(model.theta);
  sol.phi = pick(model.phi);
  sol.p_g = pick(model.p_g);
  sol.q_g = pick(model.q_g);
  sol.flows.resize(net.num_branches());
  for (std::size_t e = 0; e < net.num_branches(); ++e) {
    const auto at = [&](std::size_t j) { return raw.x[static_cast<Index>(j)]; };
    sol.flows[e] = {at(model.p_fr[e]), at(model.q_fr[e]), at(model.p_to[e]), at(model.q_to[e])};
  }
  sol.objective = raw.objective;
  sol.raw = std::move(raw);
  return sol;
}

LpacSolution solve_lpac(const Network& net, const LpacConfig& cfg, const SimplexOptions& opts) {
  const LpacModel model = build_lpac(net, cfg);
  return extract_solution(net, model, simplex_solve(model.lp, opts));
}

MeasurementSet lpac_to_measurements(const Network& net, const LpacSolution& sol) {
  const std::size_t nb = net.num_buses();
  Eigen::VectorXd p_inj(static_cast<Index>(nb));
  Eigen::VectorXd q_inj(static_cast<Index>(nb));
  for (std::size_t i = 0; i < nb; ++i) {
    double pg = 0.0;
    double qg = 0.0;
    for (std::size_t g : net.generators_at(i)) {
      pg += sol.p_g[static_cast<Index>(g)];
      qg += sol.q_g[static_cast<Index>(g)];
    }
    p_inj[static_cast<Index>(i)] = pg - net.bus(i).p_load;
    q_inj[static_cast<Index>(i)] = qg - net.bus(i).q_load;
  }
  MeasurementSet z;
  z.kinds = canonical_layout(net);
  z.values.resize(static_cast<Index>(z.kinds.size()));
  for (std::size_t r = 0; r < z.kinds.size(); ++r) {
    const auto el = static_cast<Index>(z.kinds[r].element);
    const auto flow = [&] { return sol.flows[z.kinds[r].element]; };
    double val = 0.0;
    switch (z.kinds[r].quantity) {
      case Quantity::Vm: val = 1.0 + sol.v[el]; break;
      case Quantity::Va: val = sol.theta[el]; break;
      case Quantity::Pinj: val = p_inj[el]; break;
      case Quantity::Qinj: val = q_inj[el]; break;
      case Quantity::Pfr: val = flow().p_fr; break;
      case Quantity::Qfr: val = flow().q_fr; break;
      case Quantity::Pto: val = flow().p_to; break;
      case Quantity::Qto: val = flow().q_to; break;
    }
    z.values[static_cast<Index>(r)] = val;
  }
  return z;
}

}  // namespace pfr
