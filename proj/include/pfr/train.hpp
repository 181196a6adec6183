#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pfr/measurement.hpp"
#include "pfr/network.hpp"
#include "pfr/wls.hpp"

namespace pfr {

/// One training or test sample: the scenario's demand, the ground-truth AC
/// state and the measurement vector taken from a relaxed/approximated (or
/// synthetic) solution.
struct ScenarioRecord {
  LoadTable loads;
  StateVector x_ac;
  MeasurementSet z;
  std::string source_tag;
};

/// Throws LayoutError unless every record shares `layout` and matches `net`.
void validate_dataset(const Network& net, std::span<const ScenarioRecord> records);

/// Sum over records of the squared state error, divided by the state
/// dimension 2N-1 (magnitudes in per-unit, angles in radians).
double loss(std::span<const ScenarioRecord> records, std::span<const StateVector> restored);

/// Vm/Va kinds get 1e4, injections and flows 1e3.
WeightVector default_initial_weights(std::span<const MeasurementKind> layout);

struct GradientOptions {
  WlsOptions wls;
  unsigned threads = 1;
  /// Abort when more than this fraction of records fails to restore.
  double max_failure_fraction = 0.1;
};

struct GradientResult {
  Eigen::VectorXd gradient;          // sum over records of S'(x_R - x_AC)
  std::vector<StateVector> restored;  // per record; x_AC placeholder for failed records
  std::vector<bool> ok;
  std::size_t failures = 0;
  std::vector<std::string> failure_log;
  double objective = 0.0;  // F = 1/2 sum ||x_R - x_AC||^2 over successful records
  double loss = 0.0;       // loss() over successful records
};

/// Restores every record with weights `w`, then accumulates the analytic
/// gradient of F(w) = 1/2 sum ||x_R(w) - x_AC||^2. Records whose restoration
/// fails are skipped and logged; throws TrainingError past the failure limit.
GradientResult accumulate_gradient(const Network& net, std::span<const ScenarioRecord> records,
                                   const WeightVector& w, const GradientOptions& opts = {});

struct TrainConfig {
  double eta = 10.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int max_iter = 200;
  WeightVector w_init;
  double w_floor = kDefaultWeightFloor;
  std::uint64_t rng_seed = 0;
  /// 0 trains on the full batch every iteration.
  std::size_t batch_size = 0;
  /// Keep a copy of the weights every this many iterations (0 = never).
  int snapshot_every = 0;
  GradientOptions gradient;
};

/// Throws PreconditionError on invalid hyper-parameters.
void validate(const TrainConfig& cfg);

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  int t = 0;  // number of completed steps
};

/// One Adam update (bias-corrected first and second moments), followed by
/// clamping every weight to at least cfg.w_floor. Increments state.t.
Eigen::VectorXd adam_step(const Eigen::VectorXd& w, AdamState& state, const Eigen::VectorXd& g,
                          const TrainConfig& cfg);

struct TraceEntry {
  int iteration = 0;
  double loss = 0.0;
  double grad_norm = 0.0;  // infinity norm
  std::size_t failures = 0;
};

struct TrainTrace {
  std::vector<TraceEntry> entries;
  std::vector<std::pair<int, Eigen::VectorXd>> snapshots;
};

struct TrainResult {
  WeightVector weights;
  TrainTrace trace;
};

/// Alternates full (or mini-) batch gradient accumulation and Adam steps for
/// cfg.max_iter iterations. Each trace entry reports the loss of the
/// restorations the iteration's gradient was computed from.
TrainResult train_weights(const Network& net, std::span<const ScenarioRecord> train_set,
                          const TrainConfig& cfg);

/// Restores every record with weights `w` from a flat start. Failed or
/// non-converged restorations are flagged false in `ok`.
std::vector<StateVector> restore_all(const Network& net, std::span<const ScenarioRecord> records,
                                     const WeightVector& w, const WlsOptions& wls,
                                     unsigned threads, std::vector<bool>* ok = nullptr);

}  // namespace pfr
