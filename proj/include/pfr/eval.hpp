#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pfr/acpf.hpp"
#include "pfr/train.hpp"
#include "pfr/wls.hpp"

namespace pfr {

enum class Method { Raw, Benchmark, Wls };

const char* to_string(Method m);
Method method_from_string(std::string_view s);

/// The voltages written in the measurement vector itself. Throws
/// PreconditionError when Vm or Va is missing for some bus.
StateVector raw_state(const Network& net, const MeasurementSet& z);

struct EvalOptions {
  WlsOptions wls;
  NewtonOptions pf;
  unsigned threads = 1;
};

/// Restores one record. `w` is required for Method::Wls. The record's loads
/// (when present) define the demand seen by the benchmark power flow.
OperatingPoint restore_record(const Network& net, const ScenarioRecord& rec, Method method,
                              const WeightVector* w, const EvalOptions& opts);

struct MethodSummary {
  std::string name;  // raw | benchmark | wls_init | wls_opt
  double loss = 0.0;
  std::size_t failures = 0;
  double mean_seconds = 0.0;
  double max_seconds = 0.0;
  ViolationReport worst;  // elementwise maximum over scenarios
};

struct ScenarioRow {
  std::size_t scenario = 0;
  std::string method;
  bool ok = false;
  double squared_error = 0.0;
  double seconds = 0.0;
  double max_violation = 0.0;
};

struct CurvePoint {
  std::size_t train_scenarios = 0;
  double test_loss = 0.0;
};

struct EvalReport {
  std::size_t scenarios = 0;  // evaluated by every method
  std::size_t excluded = 0;   // dropped because some method failed
  std::vector<MethodSummary> methods;
  std::vector<ScenarioRow> rows;
  std::vector<CurvePoint> curve;

  const MethodSummary* find(std::string_view name) const;
};

/// Compares raw, benchmark, WLS with `w_init` and (if given) WLS with
/// `w_opt` on the same records. Losses cover the records every method
/// restored; each method's failures are counted separately.
EvalReport evaluate(const Network& net, std::span<const ScenarioRecord> test,
                    const WeightVector& w_init, const WeightVector* w_opt,
                    const EvalOptions& opts = {});

/// Trains on the first n records of `train` for each n in `counts` and
/// reports the held-out loss of the resulting weights.
std::vector<CurvePoint> scenario_curve(const Network& net, std::span<const ScenarioRecord> train,
                                       std::span<const ScenarioRecord> test,
                                       std::span<const std::size_t> counts,
                                       const TrainConfig& cfg, const EvalOptions& opts = {});

std::string report_to_json(const EvalReport& report);
/// Method summary table.
std::string report_to_csv(const EvalReport& report);
std::string scenario_rows_to_csv(const EvalReport& report);
std::string curve_to_csv(std::span<const CurvePoint> curve);

}  // namespace pfr
