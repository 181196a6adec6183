#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pfr/acpf.hpp"
#include "pfr/lpac.hpp"
#include "pfr/network.hpp"
#include "pfr/train.hpp"

namespace pfr {

struct ScenarioSpec {
  std::size_t count = 100;
  double sigma = 0.1;  // std-dev of the multiplicative load factor
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
};

inline constexpr double kMinLoadFactor = 0.1;

void validate(const ScenarioSpec& spec);

/// One Normal(1, sigma) factor per load bus and scenario, clamped to at least
/// kMinLoadFactor, scaling P and Q together. Scenario s draws from its own
/// generator seeded by (seed, s), so results do not depend on evaluation order.
std::vector<LoadTable> gen_load_scenarios(const Network& net, const ScenarioSpec& spec);

/// Per-family standard deviations of the additive measurement noise.
struct NoiseProfile {
  double vm = 0.005;
  double va = 0.005;
  double p_inj = 0.02;
  double q_inj = 0.05;
  double p_flow = 0.02;
  double q_flow = 0.05;

  static NoiseProfile none() { return {0, 0, 0, 0, 0, 0}; }
  double sigma(Quantity q) const;
};

/// Generator set-points scaled by the ratio of scenario to nominal demand.
PowerFlowSpec proportional_dispatch(const Network& scenario_net, const Network& nominal);

struct DatasetOptions {
  unsigned threads = 1;
  std::uint64_t seed = 0;  // noise streams
  NewtonOptions pf;
  LpacConfig lpac;
  SimplexOptions simplex;
};

struct Dataset {
  std::vector<ScenarioRecord> records;
  std::vector<std::size_t> scenario_index;  // source scenario of each record
  std::vector<std::string> skipped;         // one line per dropped scenario
};

/// Ground truth from a power flow at proportional dispatch; measurements are
/// h(x_AC) plus Gaussian noise per `noise`. Records are tagged "synthetic".
Dataset synth_dataset(const Network& net, std::span<const LoadTable> scenarios,
                      const NoiseProfile& noise, const DatasetOptions& opts = {});

/// Power flow at the LPAC active dispatch with the network's generator
/// voltage set-points: Pinj at non-slack generator buses from `z`, Vm from
/// the case.
StateVector lpac_ground_truth(const Network& scenario_net, const MeasurementSet& z,
                              const NewtonOptions& opts = {});

/// Solves the LPAC model for each scenario and records its measurements.
/// `external` (empty or one entry per scenario) overrides the ground truth.
Dataset build_lpac_dataset(const Network& net, std::span<const LoadTable> scenarios,
                           const DatasetOptions& opts = {},
                           std::span<const std::optional<StateVector>> external = {});

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Disjoint, exhaustive split of [0, count): a seeded shuffle, then the first
/// round(count * train_fraction) indices train.
Split split_indices(std::size_t count, double train_fraction, std::uint64_t seed);

std::vector<ScenarioRecord> select(std::span<const ScenarioRecord> records,
                                   std::span<const std::size_t> indices);

}  // namespace pfr
