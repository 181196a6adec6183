#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "pfr/acpf.hpp"
#include "pfr/case_io.hpp"
#include "pfr/errors.hpp"
#include "pfr/eval.hpp"
#include "pfr/lpac.hpp"
#include "pfr/scenarios.hpp"
#include "pfr/sensitivity.hpp"
#include "pfr/train.hpp"
#include "pfr/wls.hpp"

namespace py = pybind11;
using namespace pfr;
using Eigen::VectorXd;

namespace {

using PyKind = std::tuple<std::string, std::size_t>;

Layout to_layout(const std::vector<PyKind>& kinds) {
  Layout out;
  out.reserve(kinds.size());
  for (const auto& [q, e] : kinds) out.push_back({quantity_from_string(q), e});
  return out;
}

std::vector<PyKind> from_layout(const Layout& layout) {
  std::vector<PyKind> out;
  out.reserve(layout.size());
  for (const MeasurementKind& k : layout) out.emplace_back(to_string(k.quantity), k.element);
  return out;
}

StateVector make_state(const Network& net, const VectorXd& vm, const VectorXd& va) {
  if (static_cast<std::size_t>(vm.size()) != net.num_buses() ||
      static_cast<std::size_t>(va.size()) != net.num_buses()) {
    throw LayoutError("vm and va need one entry per bus");
  }
  return StateVector(vm, va, net.slack());
}

py::dict state_dict(const StateVector& x) {
  py::dict d;
  d["vm"] = x.vm();
  d["va"] = x.va();
  return d;
}

Eigen::MatrixX2d loads_matrix(const LoadTable& t) {
  Eigen::MatrixX2d m(static_cast<Eigen::Index>(t.size()), 2);
  for (std::size_t i = 0; i < t.size(); ++i) {
    m(static_cast<Eigen::Index>(i), 0) = t[i].p;
    m(static_cast<Eigen::Index>(i), 1) = t[i].q;
  }
  return m;
}

LoadTable loads_table(const Eigen::MatrixX2d& m) {
  LoadTable t(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) t[static_cast<std::size_t>(i)] = {m(i, 0), m(i, 1)};
  return t;
}

py::dict dataset_dict(Dataset ds) {
  py::dict d;
  d["records"] = std::move(ds.records);
  d["scenario_index"] = std::move(ds.scenario_index);
  d["skipped"] = std::move(ds.skipped);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Learned-weight power-flow restoration";

  static PyObject* error_type = PyErr_NewException("pfrestore.Error", PyExc_RuntimeError, nullptr);
  m.attr("Error") = py::handle(error_type);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const pfr::Error& e) {
      py::object inst = py::handle(error_type)(e.what());
      inst.attr("category") = e.category();
      PyErr_SetObject(error_type, inst.ptr());
    }
  });

  py::class_<Network>(m, "Network")
      .def_property_readonly("base_mva", &Network::base_mva)
      .def_property_readonly("num_buses", &Network::num_buses)
      .def_property_readonly("num_branches", &Network::num_branches)
      .def_property_readonly("num_generators", &Network::num_generators)
      .def_property_readonly("slack", &Network::slack)
      .def_property_readonly("state_dim", &Network::state_dim)
      .def_property_readonly("bus_ids",
                             [](const Network& n) {
                               std::vector<int> ids;
                               for (const Bus& b : n.buses()) ids.push_back(b.id);
                               return ids;
                             })
      .def_property_readonly("loads", [](const Network& n) { return loads_matrix(n.loads()); })
      .def("with_loads", [](const Network& n, const Eigen::MatrixX2d& l) { return n.with_loads(loads_table(l)); })
      .def_property_readonly("hash", [](const Network& n) { return network_hash_hex(n); })
      .def("__repr__", [](const Network& n) {
        return "<Network buses=" + std::to_string(n.num_buses()) +
               " branches=" + std::to_string(n.num_branches()) + ">";
      });

  m.def("load_case", [](const std::string& path) { return load_case_file(path); }, py::arg("path"));
  m.def("parse_case", [](const std::string& text) { return parse_case(text); }, py::arg("text"));
  m.def("write_case", [](const Network& n) { return write_case(n); }, py::arg("network"));

  m.def(
      "canonical_layout",
      [](const Network& n, bool angles) { return from_layout(canonical_layout(n, angles)); },
      py::arg("network"), py::arg("include_angles") = true);

  m.def(
      "eval_h",
      [](const Network& n, const VectorXd& vm, const VectorXd& va, const std::vector<PyKind>& kinds) {
        return eval_h(n, make_state(n, vm, va), to_layout(kinds));
      },
      py::arg("network"), py::arg("vm"), py::arg("va"), py::arg("layout"));
  m.def(
      "eval_H",
      [](const Network& n, const VectorXd& vm, const VectorXd& va, const std::vector<PyKind>& kinds) {
        return eval_H(n, make_state(n, vm, va), to_layout(kinds));
      },
      py::arg("network"), py::arg("vm"), py::arg("va"), py::arg("layout"));

  m.def(
      "newton_pf",
      [](const Network& n, double tol, int max_iter) {
        std::optional<NewtonResult> r;
        {
          py::gil_scoped_release release;
          r = newton_pf(n, nominal_spec(n), StateVector::flat(n), {tol, max_iter});
        }
        py::dict d = state_dict(r->state);
        d["iterations"] = r->iterations;
        d["mismatch"] = r->mismatch;
        return d;
      },
      py::arg("network"), py::arg("tol") = 1e-8, py::arg("max_iter") = 30);

  m.def(
      "wls_restore",
      [](const Network& n, const std::vector<PyKind>& kinds, const VectorXd& z, const VectorXd& w) {
        const MeasurementSet ms{to_layout(kinds), z};
        const WlsResult r = wls_restore(n, ms, WeightVector(w), StateVector::flat(n));
        py::dict d = state_dict(r.x);
        d["iterations"] = r.iterations;
        d["converged"] = r.converged;
        d["objective"] = r.objective;
        d["residual"] = r.residual;
        return d;
      },
      py::arg("network"), py::arg("layout"), py::arg("z"), py::arg("weights"));

  m.def(
      "solution_sensitivity",
      [](const Network& n, const std::vector<PyKind>& kinds, const VectorXd& z, const VectorXd& w,
         const VectorXd& vm, const VectorXd& va) {
        return solution_sensitivity(n, {to_layout(kinds), z}, WeightVector(w), make_state(n, vm, va));
      },
      py::arg("network"), py::arg("layout"), py::arg("z"), py::arg("weights"), py::arg("vm"), py::arg("va"));

  m.def(
      "solve_lpac",
      [](const Network& n, int tangents, int cuts, int segments) {
        const LpacSolution s = solve_lpac(n, {tangents, cuts, segments});
        const MeasurementSet z = lpac_to_measurements(n, s);
        py::dict d;
        d["objective"] = s.objective;
        d["v"] = s.v;
        d["theta"] = s.theta;
        d["phi"] = s.phi;
        d["p_g"] = s.p_g;
        d["q_g"] = s.q_g;
        d["iterations"] = s.raw.iterations;
        d["layout"] = from_layout(z.kinds);
        d["z"] = z.values;
        return d;
      },
      py::arg("network"), py::arg("cos_tangents") = 9, py::arg("circle_cuts") = 8,
      py::arg("cost_segments") = 6);

  py::class_<ScenarioRecord>(m, "ScenarioRecord")
      .def_property_readonly("loads", [](const ScenarioRecord& r) { return loads_matrix(r.loads); })
      .def_property_readonly("x_ac", [](const ScenarioRecord& r) { return state_dict(r.x_ac); })
      .def_property_readonly("layout", [](const ScenarioRecord& r) { return from_layout(r.z.kinds); })
      .def_property_readonly("z", [](const ScenarioRecord& r) { return r.z.values; })
      .def_readonly("source_tag", &ScenarioRecord::source_tag);

  m.def(
      "gen_load_scenarios",
      [](const Network& n, std::size_t count, double sigma, std::uint64_t seed) {
        std::vector<Eigen::MatrixX2d> out;
        for (const LoadTable& t : gen_load_scenarios(n, {count, sigma, seed, 0.8})) out.push_back(loads_matrix(t));
        return out;
      },
      py::arg("network"), py::arg("count"), py::arg("sigma") = 0.1, py::arg("seed") = 0);

  m.def(
      "synth_dataset",
      [](const Network& n, const std::vector<Eigen::MatrixX2d>& loads, std::uint64_t seed, unsigned threads) {
        std::vector<LoadTable> tables;
        for (const auto& l : loads) tables.push_back(loads_table(l));
        DatasetOptions opts;
        opts.seed = seed;
        opts.threads = threads;
        Dataset ds;
        {
          py::gil_scoped_release release;
          ds = synth_dataset(n, tables, NoiseProfile{}, opts);
        }
        return dataset_dict(std::move(ds));
      },
      py::arg("network"), py::arg("loads"), py::arg("seed") = 0, py::arg("threads") = 1);

  m.def(
      "lpac_dataset",
      [](const Network& n, const std::vector<Eigen::MatrixX2d>& loads, unsigned threads) {
        std::vector<LoadTable> tables;
        for (const auto& l : loads) tables.push_back(loads_table(l));
        DatasetOptions opts;
        opts.threads = threads;
        Dataset ds;
        {
          py::gil_scoped_release release;
          ds = build_lpac_dataset(n, tables, opts);
        }
        return dataset_dict(std::move(ds));
      },
      py::arg("network"), py::arg("loads"), py::arg("threads") = 1);

  m.def(
      "split_indices",
      [](std::size_t count, double fraction, std::uint64_t seed) {
        const Split s = split_indices(count, fraction, seed);
        return std::make_tuple(s.train, s.test);
      },
      py::arg("count"), py::arg("train_fraction") = 0.8, py::arg("seed") = 0);

  m.def(
      "default_initial_weights",
      [](const std::vector<PyKind>& kinds) { return default_initial_weights(to_layout(kinds)).values(); },
      py::arg("layout"));

  m.def(
      "restoration_loss",
      [](const Network& n, const std::vector<ScenarioRecord>& records, const VectorXd& w, unsigned threads) {
        std::vector<bool> ok;
        std::vector<StateVector> restored;
        {
          py::gil_scoped_release release;
          restored = restore_all(n, records, WeightVector(w), {}, threads, &ok);
        }
        std::vector<ScenarioRecord> kept;
        std::vector<StateVector> kept_states;
        for (std::size_t s = 0; s < records.size(); ++s) {
          if (!ok[s]) continue;
          kept.push_back(records[s]);
          kept_states.push_back(restored[s]);
        }
        return loss(kept, kept_states);
      },
      py::arg("network"), py::arg("records"), py::arg("weights"), py::arg("threads") = 1);

  m.def(
      "accumulate_gradient",
      [](const Network& n, const std::vector<ScenarioRecord>& records, const VectorXd& w) {
        const GradientResult g = accumulate_gradient(n, records, WeightVector(w));
        py::dict d;
        d["gradient"] = g.gradient;
        d["objective"] = g.objective;
        d["loss"] = g.loss;
        d["failures"] = g.failures;
        return d;
      },
      py::arg("network"), py::arg("records"), py::arg("weights"));

  m.def(
      "train_weights",
      [](const Network& n, const std::vector<ScenarioRecord>& records, int iters, double eta,
         std::optional<VectorXd> w_init, unsigned threads) {
        TrainConfig cfg;
        cfg.max_iter = iters;
        cfg.eta = eta;
        cfg.gradient.threads = threads;
        cfg.w_init = w_init ? WeightVector(*w_init) : default_initial_weights(records.at(0).z.kinds);
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train_weights(n, records, cfg);
        }
        py::list trace;
        for (const TraceEntry& e : r.trace.entries) {
          py::dict row;
          row["iteration"] = e.iteration;
          row["loss"] = e.loss;
          row["grad_norm"] = e.grad_norm;
          row["failures"] = e.failures;
          trace.append(row);
        }
        return std::make_tuple(r.weights.values(), trace);
      },
      py::arg("network"), py::arg("records"), py::arg("iters") = 200, py::arg("eta") = 10.0,
      py::arg("w_init") = py::none(), py::arg("threads") = 1);

  m.def(
      "evaluate",
      [](const Network& n, const std::vector<ScenarioRecord>& records, const VectorXd& w_init,
         std::optional<VectorXd> w_opt, unsigned threads) {
        const WeightVector wi(w_init);
        const std::optional<WeightVector> wo = w_opt ? std::optional<WeightVector>(WeightVector(*w_opt)) : std::nullopt;
        EvalOptions opts;
        opts.threads = threads;
        EvalReport rep;
        {
          py::gil_scoped_release release;
          rep = evaluate(n, records, wi, wo ? &*wo : nullptr, opts);
        }
        py::dict out;
        for (const MethodSummary& s : rep.methods) {
          py::dict d;
          d["loss"] = s.loss;
          d["failures"] = s.failures;
          d["mean_seconds"] = s.mean_seconds;
          out[py::str(s.name)] = d;
        }
        return out;
      },
      py::arg("network"), py::arg("records"), py::arg("w_init"), py::arg("w_opt") = py::none(),
      py::arg("threads") = 1);
}
