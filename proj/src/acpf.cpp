#include "pfr/acpf.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "pfr/errors.hpp"

namespace pfr {

namespace {

using Eigen::Index;

// Flow into one branch end "a" whose far end is "b":
//   P = Gaa va^2 + va vb (Gab cos d + Bab sin d)
//   Q = -Baa va^2 + va vb (Gab sin d - Bab cos d),   d = theta_a - theta_b
// together with partials w.r.t. (va, vb, theta_a); d/dtheta_b = -d/dtheta_a.
struct EndFlow {
  double p, q;
  double dp_dva, dp_dvb, dp_dta;
  double dq_dva, dq_dvb, dq_dta;
};

EndFlow end_flow(Complex y_aa, Complex y_ab, double va, double vb, double ta, double tb) {
  const double d = ta - tb;
  const double c = std::cos(d);
  const double s = std::sin(d);
  const double g_aa = y_aa.real(), b_aa = y_aa.imag();
  const double g_ab = y_ab.real(), b_ab = y_ab.imag();
  const double kp = g_ab * c + b_ab * s;
  const double kq = g_ab * s - b_ab * c;
  EndFlow f;
  f.p = g_aa * va * va + va * vb * kp;
  f.q = -b_aa * va * va + va * vb * kq;
  f.dp_dva = 2.0 * g_aa * va + vb * kp;
  f.dp_dvb = va * kp;
  f.dp_dta = va * vb * (-g_ab * s + b_ab * c);
  f.dq_dva = -2.0 * b_aa * va + vb * kq;
  f.dq_dvb = va * kq;
  f.dq_dta = va * vb * kp;
  return f;
}

struct BranchEnds {
  EndFlow fr;
  EndFlow to;
};

BranchEnds branch_ends(const Network& net, const StateVector& x, std::size_t e) {
  const TwoPort& tp = net.two_port(e);
  const auto f = static_cast<Index>(net.from_index(e));
  const auto t = static_cast<Index>(net.to_index(e));
  const auto& vm = x.vm();
  const auto& va = x.va();
  return {end_flow(tp.ff, tp.ft, vm[f], vm[t], va[f], va[t]),
          end_flow(tp.tt, tp.tf, vm[t], vm[f], va[t], va[f])};
}

void check_state(const Network& net, const StateVector& x) {
  if (x.num_buses() != net.num_buses() || x.slack_index() != net.slack()) {
    throw LayoutError(fmt::format("state has {} buses (slack {}), network has {} (slack {})",
                                  x.num_buses(), x.slack_index(), net.num_buses(), net.slack()));
  }
}

// Writes the gradient of one branch-end quantity into `row`.
template <typename Row>
void scatter_end(Row&& row, const StateVector& x, std::size_t a, std::size_t b, double d_va,
                 double d_vb, double d_ta) {
  row[static_cast<Index>(x.vm_column(a))] += d_va;
  row[static_cast<Index>(x.vm_column(b))] += d_vb;
  if (auto c = x.va_column(a)) row[static_cast<Index>(*c)] += d_ta;
  if (auto c = x.va_column(b)) row[static_cast<Index>(*c)] -= d_ta;
}

double split_weight(double lo, double hi) { return std::max(hi - lo, 0.0); }

}  // namespace

PowerFlows compute_flows(const Network& net, const StateVector& x) {
  check_state(net, x);
  const auto nb = static_cast<Index>(net.num_buses());
  PowerFlows out;
  out.p_inj = Eigen::VectorXd::Zero(nb);
  out.q_inj = Eigen::VectorXd::Zero(nb);
  out.flows.resize(net.num_branches());
  for (std::size_t e = 0; e < net.num_branches(); ++e) {
    const BranchEnds ends = branch_ends(net, x, e);
    out.flows[e] = {ends.fr.p, ends.fr.q, ends.to.p, ends.to.q};
    const auto f = static_cast<Index>(net.from_index(e));
    const auto t = static_cast<Index>(net.to_index(e));
    out.p_inj[f] += ends.fr.p;
    out.q_inj[f] += ends.fr.q;
    out.p_inj[t] += ends.to.p;
    out.q_inj[t] += ends.to.q;
  }
  for (Index i = 0; i < nb; ++i) {
    const Bus& b = net.bus(static_cast<std::size_t>(i));
    const double v2 = x.vm()[i] * x.vm()[i];
    out.p_inj[i] += b.g_shunt * v2;
    out.q_inj[i] -= b.b_shunt * v2;
  }
  return out;
}

Eigen::VectorXd eval_h(const Network& net, const StateVector& x,
                       std::span<const MeasurementKind> kinds) {
  validate_layout(kinds, net);
  const PowerFlows pf = compute_flows(net, x);
  Eigen::VectorXd h(static_cast<Index>(kinds.size()));
  for (std::size_t r = 0; r < kinds.size(); ++r) {
    const auto el = static_cast<Index>(kinds[r].element);
    const auto e = kinds[r].element;
    double v = 0.0;
    switch (kinds[r].quantity) {
      case Quantity::Vm: v = x.vm()[el]; break;
      case Quantity::Va: v = x.va()[el]; break;
      case Quantity::Pinj: v = pf.p_inj[el]; break;
      case Quantity::Qinj: v = pf.q_inj[el]; break;
      case Quantity::Pfr: v = pf.flows[e].p_fr; break;
      case Quantity::Qfr: v = pf.flows[e].q_fr; break;
      case Quantity::Pto: v = pf.flows[e].p_to; break;
      case Quantity::Qto: v = pf.flows[e].q_to; break;
    }
    h[static_cast<Index>(r)] = v;
  }
  return h;
}

Eigen::MatrixXd eval_H(const Network& net, const StateVector& x,
                       std::span<const MeasurementKind> kinds) {
  validate_layout(kinds, net);
  check_state(net, x);
  const auto n = static_cast<Index>(x.dim());
  const auto nb = static_cast<Index>(net.num_buses());
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(static_cast<Index>(kinds.size()), n);

  std::vector<BranchEnds> ends(net.num_branches());
  for (std::size_t e = 0; e < ends.size(); ++e) ends[e] = branch_ends(net, x, e);

  const bool need_inj = std::any_of(kinds.begin(), kinds.end(), [](const MeasurementKind& k) {
    return k.quantity == Quantity::Pinj || k.quantity == Quantity::Qinj;
  });
  Eigen::MatrixXd dp, dq;
  if (need_inj) {
    dp = Eigen::MatrixXd::Zero(nb, n);
    dq = Eigen::MatrixXd::Zero(nb, n);
    for (std::size_t e = 0; e < ends.size(); ++e) {
      const std::size_t f = net.from_index(e);
      const std::size_t t = net.to_index(e);
      const EndFlow& a = ends[e].fr;
      const EndFlow& b = ends[e].to;
      scatter_end(dp.row(static_cast<Index>(f)), x, f, t, a.dp_dva, a.dp_dvb, a.dp_dta);
      scatter_end(dq.row(static_cast<Index>(f)), x, f, t, a.dq_dva, a.dq_dvb, a.dq_dta);
      scatter_end(dp.row(static_cast<Index>(t)), x, t, f, b.dp_dva, b.dp_dvb, b.dp_dta);
      scatter_end(dq.row(static_cast<Index>(t)), x, t, f, b.dq_dva, b.dq_dvb, b.dq_dta);
    }
    for (Index i = 0; i < nb; ++i) {
      const Bus& bus = net.bus(static_cast<std::size_t>(i));
      dp(i, i) += 2.0 * bus.g_shunt * x.vm()[i];
      dq(i, i) -= 2.0 * bus.b_shunt * x.vm()[i];
    }
  }

  for (std::size_t r = 0; r < kinds.size(); ++r) {
    const auto row = static_cast<Index>(r);
    const std::size_t el = kinds[r].element;
    switch (kinds[r].quantity) {
      case Quantity::Vm:
        H(row, static_cast<Index>(x.vm_column(el))) = 1.0;
        break;
      case Quantity::Va:
        if (auto c = x.va_column(el)) H(row, static_cast<Index>(*c)) = 1.0;
        break;
      case Quantity::Pinj:
        H.row(row) = dp.row(static_cast<Index>(el));
        break;
      case Quantity::Qinj:
        H.row(row) = dq.row(static_cast<Index>(el));
        break;
      case Quantity::Pfr: {
        const EndFlow& a = ends[el].fr;
        scatter_end(H.row(row), x, net.from_index(el), net.to_index(el), a.dp_dva, a.dp_dvb,
                    a.dp_dta);
        break;
      }
      case Quantity::Qfr: {
        const EndFlow& a = ends[el].fr;
        scatter_end(H.row(row), x, net.from_index(el), net.to_index(el), a.dq_dva, a.dq_dvb,
                    a.dq_dta);
        break;
      }
      case Quantity::Pto: {
        const EndFlow& b = ends[el].to;
        scatter_end(H.row(row), x, net.to_index(el), net.from_index(el), b.dp_dva, b.dp_dvb,
                    b.dp_dta);
        break;
      }
      case Quantity::Qto: {
        const EndFlow& b = ends[el].to;
        scatter_end(H.row(row), x, net.to_index(el), net.from_index(el), b.dq_dva, b.dq_dvb,
                    b.dq_dta);
        break;
      }
    }
  }
  return H;
}

PowerFlowSpec nominal_spec(const Network& net) {
  const auto nb = static_cast<Index>(net.num_buses());
  PowerFlowSpec spec;
  spec.role.resize(net.num_buses());
  spec.p = Eigen::VectorXd::Zero(nb);
  spec.q = Eigen::VectorXd::Zero(nb);
  spec.vm = Eigen::VectorXd::Ones(nb);
  for (std::size_t i = 0; i < net.num_buses(); ++i) {
    const Bus& b = net.bus(i);
    const auto ii = static_cast<Index>(i);
    spec.role[i] = b.type;
    spec.p[ii] = -b.p_load;
    spec.q[ii] = -b.q_load;
    for (std::size_t g : net.generators_at(i)) {
      spec.p[ii] += net.generator(g).p_set;
      spec.q[ii] += net.generator(g).q_set;
      spec.vm[ii] = net.generator(g).v_set;
    }
  }
  return spec;
}

NewtonResult newton_pf(const Network& net, const PowerFlowSpec& spec, const StateVector& x0,
                       const NewtonOptions& opts) {
  check_state(net, x0);
  const std::size_t nb = net.num_buses();
  if (spec.role.size() != nb || static_cast<std::size_t>(spec.p.size()) != nb ||
      static_cast<std::size_t>(spec.q.size()) != nb ||
      static_cast<std::size_t>(spec.vm.size()) != nb) {
    throw LayoutError("power-flow specification does not match the network");
  }
  const std::size_t slack = net.slack();
  if (spec.role[slack] != BusType::Slack) {
    throw PreconditionError("power-flow specification must mark the network's slack bus");
  }

  // Equations: P at non-slack buses, Q at PQ buses.
  // Unknowns: angles at non-slack buses, magnitudes at PQ buses.
  Layout eqs;
  Eigen::VectorXd target;
  std::vector<Index> unknown_cols;
  std::vector<double> target_vals;
  for (std::size_t i = 0; i < nb; ++i) {
    if (spec.role[i] == BusType::Slack && i != slack) {
      throw PreconditionError("power-flow specification marks more than one slack bus");
    }
    if (spec.role[i] != BusType::Slack) {
      eqs.push_back({Quantity::Pinj, i});
      target_vals.push_back(spec.p[static_cast<Index>(i)]);
      unknown_cols.push_back(static_cast<Index>(*angle_column(i, nb, slack)));
    }
  }
  for (std::size_t i = 0; i < nb; ++i) {
    if (spec.role[i] == BusType::PQ) {
      eqs.push_back({Quantity::Qinj, i});
      target_vals.push_back(spec.q[static_cast<Index>(i)]);
      unknown_cols.push_back(static_cast<Index>(i));
    }
  }
  target = Eigen::Map<Eigen::VectorXd>(target_vals.data(), static_cast<Index>(target_vals.size()));

  Eigen::VectorXd x = x0.flatten();
  for (std::size_t i = 0; i < nb; ++i) {
    if (spec.role[i] != BusType::PQ) x[static_cast<Index>(i)] = spec.vm[static_cast<Index>(i)];
  }

  const auto k = static_cast<Index>(eqs.size());
  for (int iter = 0;; ++iter) {
    const StateVector state = StateVector::from_flat(x, nb, slack);
    const Eigen::VectorXd mismatch = eval_h(net, state, eqs) - target;
    const double norm = k == 0 ? 0.0 : mismatch.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(norm)) {
      throw NonConvergenceError("power flow diverged (non-finite mismatch)", iter, norm);
    }
    if (norm < opts.tol) return {state, iter, norm};
    if (iter >= opts.max_iter) {
      throw NonConvergenceError(
          fmt::format("power flow did not converge in {} iterations (mismatch {:.3e})",
                      opts.max_iter, norm),
          iter, norm);
    }

    const Eigen::MatrixXd H = eval_H(net, state, eqs);
    Eigen::MatrixXd J(k, k);
    for (Index c = 0; c < k; ++c) J.col(c) = H.col(unknown_cols[static_cast<std::size_t>(c)]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
    if (!(lu.rcond() > 1e-14)) {
      if (iter == 0) throw SingularMatrixError("power-flow Jacobian is singular", "pf.singular");
      throw NonConvergenceError("power flow diverged (singular Jacobian)", iter, norm);
    }
    const Eigen::VectorXd dx = lu.solve(-mismatch);
    for (Index c = 0; c < k; ++c) x[unknown_cols[static_cast<std::size_t>(c)]] += dx[c];
    if (x.head(static_cast<Index>(nb)).minCoeff() <= 0.0 || !x.allFinite()) {
      throw NonConvergenceError("power flow diverged (non-positive voltage magnitude)", iter + 1,
                                norm);
    }
  }
}

OperatingPoint make_operating_point(const Network& net, const StateVector& x) {
  PowerFlows pf = compute_flows(net, x);
  const auto ng = static_cast<Index>(net.num_generators());
  Eigen::VectorXd p_gen = Eigen::VectorXd::Zero(ng);
  Eigen::VectorXd q_gen = Eigen::VectorXd::Zero(ng);
  for (std::size_t i = 0; i < net.num_buses(); ++i) {
    const auto gens = net.generators_at(i);
    if (gens.empty()) continue;
    const auto ii = static_cast<Index>(i);
    const double p_total = pf.p_inj[ii] + net.bus(i).p_load;
    const double q_total = pf.q_inj[ii] + net.bus(i).q_load;
    double p_weight = 0.0, q_weight = 0.0;
    for (std::size_t g : gens) {
      p_weight += split_weight(net.generator(g).p_min, net.generator(g).p_max);
      q_weight += split_weight(net.generator(g).q_min, net.generator(g).q_max);
    }
    const double share = 1.0 / static_cast<double>(gens.size());
    for (std::size_t g : gens) {
      const Generator& gen = net.generator(g);
      const double ps = p_weight > 0.0 ? split_weight(gen.p_min, gen.p_max) / p_weight : share;
      const double qs = q_weight > 0.0 ? split_weight(gen.q_min, gen.q_max) / q_weight : share;
      p_gen[static_cast<Index>(g)] = ps * p_total;
      q_gen[static_cast<Index>(g)] = qs * q_total;
    }
  }
  return {x, std::move(pf.p_inj), std::move(pf.q_inj), std::move(pf.flows), std::move(p_gen),
          std::move(q_gen)};
}

PowerFlowSpec benchmark_spec(const Network& net, const MeasurementSet& z) {
  const std::size_t nb = net.num_buses();
  PowerFlowSpec spec;
  spec.role.resize(nb);
  spec.p = Eigen::VectorXd::Zero(static_cast<Index>(nb));
  spec.q = Eigen::VectorXd::Zero(static_cast<Index>(nb));
  spec.vm = Eigen::VectorXd::Ones(static_cast<Index>(nb));
  for (std::size_t i = 0; i < nb; ++i) {
    const auto ii = static_cast<Index>(i);
    const Bus& b = net.bus(i);
    if (i == net.slack() || net.is_generator_bus(i)) {
      auto vm = z.find({Quantity::Vm, i});
      if (!vm) {
        throw PreconditionError(
            fmt::format("benchmark restoration needs Vm at generator bus {}", b.id));
      }
      spec.vm[ii] = *vm;
    }
    if (i == net.slack()) {
      spec.role[i] = BusType::Slack;
    } else if (net.is_generator_bus(i)) {
      auto p = z.find({Quantity::Pinj, i});
      if (!p) {
        throw PreconditionError(
            fmt::format("benchmark restoration needs Pinj at generator bus {}", b.id));
      }
      spec.role[i] = BusType::PV;
      spec.p[ii] = *p;
    } else {
      spec.role[i] = BusType::PQ;
      spec.p[ii] = -b.p_load;
      spec.q[ii] = -b.q_load;
    }
  }
  return spec;
}

BenchmarkResult benchmark_restore(const Network& net, const MeasurementSet& z,
                                  const NewtonOptions& opts) {
  NewtonResult res = newton_pf(net, benchmark_spec(net, z), StateVector::flat(net), opts);
  return {make_operating_point(net, res.state), res.iterations, res.mismatch};
}

double ViolationReport::max() const { return std::max({voltage, generator, flow, angle}); }

ViolationReport constraint_report(const Network& net, const OperatingPoint& op) {
  ViolationReport rep;
  const auto& vm = op.state.vm();
  const auto& va = op.state.va();
  for (std::size_t i = 0; i < net.num_buses(); ++i) {
    const auto ii = static_cast<Index>(i);
    const Bus& b = net.bus(i);
    rep.voltage = std::max({rep.voltage, vm[ii] - b.v_max, b.v_min - vm[ii]});
    if (!net.is_generator_bus(i)) {
      rep.generator = std::max({rep.generator, std::abs(op.p_inj[ii] + b.p_load),
                                std::abs(op.q_inj[ii] + b.q_load)});
    }
  }
  for (std::size_t g = 0; g < net.num_generators(); ++g) {
    const Generator& gen = net.generator(g);
    const double p = op.p_gen[static_cast<Index>(g)];
    const double q = op.q_gen[static_cast<Index>(g)];
    rep.generator =
        std::max({rep.generator, p - gen.p_max, gen.p_min - p, q - gen.q_max, gen.q_min - q});
  }
  for (std::size_t e = 0; e < net.num_branches(); ++e) {
    const Branch& br = net.branch(e);
    const BranchFlow& f = op.flows[e];
    if (br.s_max > 0.0) {
      rep.flow = std::max({rep.flow, std::hypot(f.p_fr, f.q_fr) - br.s_max,
                           std::hypot(f.p_to, f.q_to) - br.s_max});
    }
    const double diff = va[static_cast<Index>(net.from_index(e))] -
                        va[static_cast<Index>(net.to_index(e))];
    rep.angle = std::max(rep.angle, std::abs(diff) - br.theta_max);
  }
  return rep;
}

}  // namespace pfr
