#include "pfr/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "pfr/errors.hpp"
#include "pfr/parallel.hpp"

namespace pfr {

namespace {

using Eigen::Index;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index, std::uint32_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    purpose};
  return std::mt19937_64(seq);
}

constexpr std::uint32_t kLoadStream = 1;
constexpr std::uint32_t kNoiseStream = 2;
constexpr std::uint32_t kSplitStream = 3;

struct Slot {
  std::optional<ScenarioRecord> record;
  std::string error;
};

Dataset collect(std::vector<Slot>& slots) {
  Dataset ds;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (slots[s].record) {
      ds.records.push_back(std::move(*slots[s].record));
      ds.scenario_index.push_back(s);
    } else {
      ds.skipped.push_back(fmt::format("scenario {}: {}", s, slots[s].error));
      spdlog::warn("skipping scenario {}: {}", s, slots[s].error);
    }
  }
  return ds;
}

}  // namespace

void validate(const ScenarioSpec& spec) {
  if (!(spec.sigma >= 0.0) || !std::isfinite(spec.sigma)) {
    throw PreconditionError("load perturbation sigma must be non-negative");
  }
  if (!(spec.train_fraction >= 0.0 && spec.train_fraction <= 1.0)) {
    throw PreconditionError("train fraction must lie in [0, 1]");
  }
}

std::vector<LoadTable> gen_load_scenarios(const Network& net, const ScenarioSpec& spec) {
  validate(spec);
  const LoadTable nominal = net.loads();
  std::vector<LoadTable> out(spec.count, nominal);
  for (std::size_t s = 0; s < spec.count; ++s) {
    auto rng = stream(spec.seed, s, kLoadStream);
    std::normal_distribution<double> factor(1.0, spec.sigma);
    for (BusLoad& load : out[s]) {
      if (load.p == 0.0 && load.q == 0.0) continue;
      const double f = spec.sigma > 0.0 ? std::max(factor(rng), kMinLoadFactor) : 1.0;
      load.p *= f;
      load.q *= f;
    }
  }
  return out;
}

double NoiseProfile::sigma(Quantity q) const {
  switch (q) {
    case Quantity::Vm: return vm;
    case Quantity::Va: return va;
    case Quantity::Pinj: return p_inj;
    case Quantity::Qinj: return q_inj;
    case Quantity::Pfr:
    case Quantity::Pto: return p_flow;
    case Quantity::Qfr:
    case Quantity::Qto: return q_flow;
  }
  return 0.0;
}

PowerFlowSpec proportional_dispatch(const Network& scenario_net, const Network& nominal) {
  double nominal_load = 0.0;
  double scenario_load = 0.0;
  for (const Bus& b : nominal.buses()) nominal_load += b.p_load;
  for (const Bus& b : scenario_net.buses()) scenario_load += b.p_load;
  const double ratio = nominal_load != 0.0 ? scenario_load / nominal_load : 1.0;
  PowerFlowSpec spec = nominal_spec(scenario_net);
  for (std::size_t i = 0; i < scenario_net.num_buses(); ++i) {
    double gen = 0.0;
    for (std::size_t g : scenario_net.generators_at(i)) gen += scenario_net.generator(g).p_set;
    spec.p[static_cast<Index>(i)] = ratio * gen - scenario_net.bus(i).p_load;
  }
  return spec;
}

Dataset synth_dataset(const Network& net, std::span<const LoadTable> scenarios,
                      const NoiseProfile& noise, const DatasetOptions& opts) {
  const Layout layout = canonical_layout(net);
  std::vector<Slot> slots(scenarios.size());
  parallel_for(scenarios.size(), opts.threads, [&](std::size_t s) {
    try {
      const Network scn = net.with_loads(scenarios[s]);
      const NewtonResult pf =
          newton_pf(scn, proportional_dispatch(scn, net), StateVector::flat(scn), opts.pf);
      Eigen::VectorXd z = eval_h(scn, pf.state, layout);
      auto rng = stream(opts.seed, s, kNoiseStream);
      std::normal_distribution<double> unit(0.0, 1.0);
      for (std::size_t r = 0; r < layout.size(); ++r) {
        const double sd = noise.sigma(layout[r].quantity);
        if (sd > 0.0) z[static_cast<Index>(r)] += sd * unit(rng);
      }
      slots[s].record = ScenarioRecord{scenarios[s], pf.state, {layout, std::move(z)}, "synthetic"};
    } catch (const Error& e) {
      slots[s].error = fmt::format("{}: {}", e.category(), e.what());
    }
  });
  return collect(slots);
}

StateVector lpac_ground_truth(const Network& scenario_net, const MeasurementSet& z,
                              const NewtonOptions& opts) {
  PowerFlowSpec spec = benchmark_spec(scenario_net, z);
  spec.vm = nominal_spec(scenario_net).vm;
  return newton_pf(scenario_net, spec, StateVector::flat(scenario_net), opts).state;
}

Dataset build_lpac_dataset(const Network& net, std::span<const LoadTable> scenarios,
                           const DatasetOptions& opts,
                           std::span<const std::optional<StateVector>> external) {
  if (!external.empty() && external.size() != scenarios.size()) {
    throw LayoutError(fmt::format("{} external ground-truth entries for {} scenarios",
                                  external.size(), scenarios.size()));
  }
  std::vector<Slot> slots(scenarios.size());
  parallel_for(scenarios.size(), opts.threads, [&](std::size_t s) {
    try {
      const Network scn = net.with_loads(scenarios[s]);
      const LpacSolution sol = solve_lpac(scn, opts.lpac, opts.simplex);
      MeasurementSet z = lpac_to_measurements(scn, sol);
      StateVector truth = !external.empty() && external[s]
                              ? *external[s]
                              : lpac_ground_truth(scn, z, opts.pf);
      slots[s].record = ScenarioRecord{scenarios[s], std::move(truth), std::move(z), "lpac"};
    } catch (const Error& e) {
      slots[s].error = fmt::format("{}: {}", e.category(), e.what());
    }
  });
  return collect(slots);
}

Split split_indices(std::size_t count, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw PreconditionError("train fraction must lie in [0, 1]");
  }
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = stream(seed, 0, kSplitStream);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(count)));
  Split split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::vector<ScenarioRecord> select(std::span<const ScenarioRecord> records,
                                   std::span<const std::size_t> indices) {
  std::vector<ScenarioRecord> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= records.size()) {
      throw LayoutError(fmt::format("record index {} out of range ({} records)", i, records.size()));
    }
    out.push_back(records[i]);
  }
  return out;
}

}  // namespace pfr
