#include "pfr/eval.hpp"

#include <algorithm>
#include <chrono>
#include <optional>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "pfr/errors.hpp"
#include "pfr/parallel.hpp"

namespace pfr {

namespace {

using Eigen::Index;
using Clock = std::chrono::steady_clock;

struct Attempt {
  std::optional<OperatingPoint> point;
  double seconds = 0.0;
};

ViolationReport worse(const ViolationReport& a, const ViolationReport& b) {
  return {std::max(a.voltage, b.voltage), std::max(a.generator, b.generator),
          std::max(a.flow, b.flow), std::max(a.angle, b.angle)};
}

}  // namespace

const char* to_string(Method m) {
  switch (m) {
    case Method::Raw: return "raw";
    case Method::Benchmark: return "benchmark";
    case Method::Wls: return "wls";
  }
  return "?";
}

Method method_from_string(std::string_view s) {
  if (s == "raw") return Method::Raw;
  if (s == "benchmark") return Method::Benchmark;
  if (s == "wls") return Method::Wls;
  throw PreconditionError(fmt::format("unknown restoration method '{}'", s));
}

StateVector raw_state(const Network& net, const MeasurementSet& z) {
  const std::size_t nb = net.num_buses();
  Eigen::VectorXd vm(static_cast<Index>(nb));
  Eigen::VectorXd va(static_cast<Index>(nb));
  for (std::size_t i = 0; i < nb; ++i) {
    const auto m = z.find({Quantity::Vm, i});
    const auto a = z.find({Quantity::Va, i});
    if (!m || !a) {
      throw PreconditionError(fmt::format(
          "raw solution needs Vm and Va at every bus; bus {} lacks one", net.bus(i).id));
    }
    vm[static_cast<Index>(i)] = *m;
    va[static_cast<Index>(i)] = *a;
  }
  return StateVector(std::move(vm), std::move(va), net.slack());
}

OperatingPoint restore_record(const Network& net, const ScenarioRecord& rec, Method method,
                              const WeightVector* w, const EvalOptions& opts) {
  const Network scn = rec.loads.empty() ? net : net.with_loads(rec.loads);
  switch (method) {
    case Method::Raw:
      return make_operating_point(scn, raw_state(scn, rec.z));
    case Method::Benchmark:
      return benchmark_restore(scn, rec.z, opts.pf).point;
    case Method::Wls: {
      if (!w) throw PreconditionError("weighted restoration needs weights");
      const WlsResult res = wls_restore(scn, rec.z, *w, StateVector::flat(scn), opts.wls);
      if (!res.converged) {
        throw NonConvergenceError(
            fmt::format("weighted restoration stopped after {} iterations", res.iterations),
            res.iterations, res.last_step, "wls.nonconvergence");
      }
      return make_operating_point(scn, res.x);
    }
  }
  throw PreconditionError("unknown restoration method");
}

const MethodSummary* EvalReport::find(std::string_view name) const {
  for (const MethodSummary& m : methods) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

EvalReport evaluate(const Network& net, std::span<const ScenarioRecord> test,
                    const WeightVector& w_init, const WeightVector* w_opt,
                    const EvalOptions& opts) {
  validate_dataset(net, test);
  struct Spec {
    std::string name;
    Method method;
    const WeightVector* w;
  };
  std::vector<Spec> specs = {{"raw", Method::Raw, nullptr},
                             {"benchmark", Method::Benchmark, nullptr},
                             {"wls_init", Method::Wls, &w_init}};
  if (w_opt) specs.push_back({"wls_opt", Method::Wls, w_opt});

  const std::size_t n = test.size();
  std::vector<std::vector<Attempt>> attempts(specs.size(), std::vector<Attempt>(n));
  for (std::size_t k = 0; k < specs.size(); ++k) {
    parallel_for(n, opts.threads, [&](std::size_t s) {
      const auto t0 = Clock::now();
      try {
        attempts[k][s].point = restore_record(net, test[s], specs[k].method, specs[k].w, opts);
      } catch (const Error&) {
        // Counted as a failure below.
      }
      attempts[k][s].seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    });
  }

  EvalReport rep;
  std::vector<bool> common(n, true);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t k = 0; k < specs.size(); ++k) common[s] = common[s] && attempts[k][s].point;
  }
  rep.scenarios = static_cast<std::size_t>(std::count(common.begin(), common.end(), true));
  rep.excluded = n - rep.scenarios;
  const double dim = static_cast<double>(net.state_dim());
  for (std::size_t k = 0; k < specs.size(); ++k) {
    MethodSummary sum;
    sum.name = specs[k].name;
    double total_time = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const Attempt& a = attempts[k][s];
      ScenarioRow row{s, specs[k].name, a.point.has_value(), 0.0, a.seconds, 0.0};
      total_time += a.seconds;
      sum.max_seconds = std::max(sum.max_seconds, a.seconds);
      if (!a.point) {
        ++sum.failures;
      } else {
        const Network scn = test[s].loads.empty() ? net : net.with_loads(test[s].loads);
        const ViolationReport v = constraint_report(scn, *a.point);
        row.max_violation = v.max();
        row.squared_error = (a.point->state.flatten() - test[s].x_ac.flatten()).squaredNorm();
        sum.worst = worse(sum.worst, v);
        if (common[s]) sum.loss += row.squared_error / dim;
      }
      rep.rows.push_back(std::move(row));
    }
    sum.mean_seconds = n ? total_time / static_cast<double>(n) : 0.0;
    rep.methods.push_back(std::move(sum));
  }
  return rep;
}

std::vector<CurvePoint> scenario_curve(const Network& net, std::span<const ScenarioRecord> train,
                                       std::span<const ScenarioRecord> test,
                                       std::span<const std::size_t> counts,
                                       const TrainConfig& cfg, const EvalOptions& opts) {
  std::vector<CurvePoint> curve;
  for (std::size_t count : counts) {
    if (count == 0 || count > train.size()) {
      throw PreconditionError(fmt::format("curve point {} outside 1..{} training records", count,
                                          train.size()));
    }
    const TrainResult tr = train_weights(net, train.first(count), cfg);
    std::vector<bool> ok;
    const std::vector<StateVector> restored =
        restore_all(net, test, tr.weights, opts.wls, opts.threads, &ok);
    std::vector<ScenarioRecord> kept;
    std::vector<StateVector> kept_states;
    for (std::size_t s = 0; s < test.size(); ++s) {
      if (!ok[s]) continue;
      kept.push_back(test[s]);
      kept_states.push_back(restored[s]);
    }
    curve.push_back({count, loss(kept, kept_states)});
  }
  return curve;
}

std::string report_to_json(const EvalReport& report) {
  using nlohmann::json;
  json methods = json::array();
  for (const MethodSummary& m : report.methods) {
    methods.push_back({{"method", m.name},
                       {"loss", m.loss},
                       {"failures", m.failures},
                       {"mean_seconds", m.mean_seconds},
                       {"max_seconds", m.max_seconds},
                       {"violations",
                        {{"voltage", m.worst.voltage},
                         {"generator", m.worst.generator},
                         {"flow", m.worst.flow},
                         {"angle", m.worst.angle}}}});
  }
  json curve = json::array();
  for (const CurvePoint& c : report.curve) {
    curve.push_back({{"train_scenarios", c.train_scenarios}, {"test_loss", c.test_loss}});
  }
  const json j = {{"format", "pfrestore.eval"},
                  {"version", 1},
                  {"scenarios", report.scenarios},
                  {"excluded", report.excluded},
                  {"methods", std::move(methods)},
                  {"curve", std::move(curve)}};
  return j.dump(1) + "\n";
}

std::string report_to_csv(const EvalReport& report) {
  std::string out =
      "method,loss,failures,mean_seconds,max_seconds,viol_voltage,viol_generator,viol_flow,"
      "viol_angle\n";
  for (const MethodSummary& m : report.methods) {
    out += fmt::format("{},{:.17g},{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}\n", m.name, m.loss,
                       m.failures, m.mean_seconds, m.max_seconds, m.worst.voltage,
                       m.worst.generator, m.worst.flow, m.worst.angle);
  }
  return out;
}

std::string scenario_rows_to_csv(const EvalReport& report) {
  std::string out = "scenario,method,ok,squared_error,seconds,max_violation\n";
  for (const ScenarioRow& r : report.rows) {
    out += fmt::format("{},{},{},{:.17g},{:.9g},{:.9g}\n", r.scenario, r.method, r.ok ? 1 : 0,
                       r.squared_error, r.seconds, r.max_violation);
  }
  return out;
}

std::string curve_to_csv(std::span<const CurvePoint> curve) {
  std::string out = "train_scenarios,test_loss\n";
  for (const CurvePoint& c : curve) out += fmt::format("{},{:.17g}\n", c.train_scenarios, c.test_loss);
  return out;
}

}  // namespace pfr
