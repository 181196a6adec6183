#include "pfr/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "pfr/errors.hpp"
#include "pfr/parallel.hpp"
#include "pfr/sensitivity.hpp"

namespace pfr {

namespace {

using Eigen::Index;

struct RecordOutcome {
  std::optional<StateVector> x_r;
  Eigen::VectorXd contribution;
  std::string error;
};

RecordOutcome restore_one(const Network& net, const ScenarioRecord& rec, const WeightVector& w,
                          const WlsOptions& wls, bool with_gradient) {
  RecordOutcome out;
  try {
    WlsResult res = wls_restore(net, rec.z, w, StateVector::flat(net), wls);
    if (!res.converged) {
      out.error = fmt::format("restoration did not converge in {} iterations (last step {:.2e})",
                              res.iterations, res.last_step);
      return out;
    }
    if (with_gradient) {
      const SensitivityMatrix S = solution_sensitivity(net, rec.z, w, res.x);
      out.contribution = S.transpose() * (res.x.flatten() - rec.x_ac.flatten());
    }
    out.x_r = std::move(res.x);
  } catch (const Error& e) {
    out.error = fmt::format("{}: {}", e.category(), e.what());
  }
  return out;
}

}  // namespace

void validate_dataset(const Network& net, std::span<const ScenarioRecord> records) {
  if (records.empty()) return;
  const Layout& layout = records.front().z.kinds;
  validate_layout(layout, net);
  for (std::size_t s = 0; s < records.size(); ++s) {
    const ScenarioRecord& rec = records[s];
    if (rec.z.kinds != layout) {
      throw LayoutError(fmt::format("record {} uses a different measurement layout", s));
    }
    if (static_cast<std::size_t>(rec.z.values.size()) != layout.size()) {
      throw LayoutError(fmt::format("record {} has {} values for {} kinds", s,
                                    rec.z.values.size(), layout.size()));
    }
    if (rec.x_ac.num_buses() != net.num_buses() || rec.x_ac.slack_index() != net.slack()) {
      throw LayoutError(fmt::format("record {} ground truth does not match the network", s));
    }
    if (!rec.loads.empty() && rec.loads.size() != net.num_buses()) {
      throw LayoutError(fmt::format("record {} load table has the wrong length", s));
    }
  }
}

double loss(std::span<const ScenarioRecord> records, std::span<const StateVector> restored) {
  if (records.size() != restored.size()) {
    throw LayoutError(fmt::format("{} records but {} restored states", records.size(),
                                  restored.size()));
  }
  if (records.empty()) return 0.0;
  const std::size_t dim = records.front().x_ac.dim();
  double total = 0.0;
  for (std::size_t s = 0; s < records.size(); ++s) {
    if (restored[s].dim() != records[s].x_ac.dim() || records[s].x_ac.dim() != dim) {
      throw LayoutError(fmt::format("record {}: state dimensions differ", s));
    }
    total += (restored[s].flatten() - records[s].x_ac.flatten()).squaredNorm();
  }
  return total / static_cast<double>(dim);
}

WeightVector default_initial_weights(std::span<const MeasurementKind> layout) {
  Eigen::VectorXd w(static_cast<Index>(layout.size()));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    w[static_cast<Index>(i)] = is_voltage_quantity(layout[i].quantity) ? 1e4 : 1e3;
  }
  return WeightVector(std::move(w));
}

std::vector<StateVector> restore_all(const Network& net, std::span<const ScenarioRecord> records,
                                     const WeightVector& w, const WlsOptions& wls,
                                     unsigned threads, std::vector<bool>* ok) {
  std::vector<RecordOutcome> outcomes(records.size());
  parallel_for(records.size(), threads,
               [&](std::size_t s) { outcomes[s] = restore_one(net, records[s], w, wls, false); });
  std::vector<StateVector> out;
  out.reserve(records.size());
  if (ok) ok->assign(records.size(), false);
  for (std::size_t s = 0; s < records.size(); ++s) {
    if (outcomes[s].x_r) {
      out.push_back(std::move(*outcomes[s].x_r));
      if (ok) (*ok)[s] = true;
    } else {
      out.push_back(StateVector::flat(net));
    }
  }
  return out;
}

GradientResult accumulate_gradient(const Network& net, std::span<const ScenarioRecord> records,
                                   const WeightVector& w, const GradientOptions& opts) {
  validate_dataset(net, records);
  if (!records.empty() && records.front().z.size() != w.size()) {
    throw LayoutError(fmt::format("{} weights for {} measurements", w.size(),
                                  records.front().z.size()));
  }
  std::vector<RecordOutcome> outcomes(records.size());
  parallel_for(records.size(), opts.threads, [&](std::size_t s) {
    outcomes[s] = restore_one(net, records[s], w, opts.wls, true);
  });

  GradientResult res;
  res.gradient = Eigen::VectorXd::Zero(static_cast<Index>(w.size()));
  res.ok.assign(records.size(), false);
  double sq = 0.0;
  const double dim = static_cast<double>(net.state_dim());
  // Index-ordered reduction keeps results independent of the thread count.
  for (std::size_t s = 0; s < records.size(); ++s) {
    RecordOutcome& o = outcomes[s];
    if (!o.x_r) {
      ++res.failures;
      res.failure_log.push_back(fmt::format("record {}: {}", s, o.error));
      spdlog::warn("skipping record {}: {}", s, o.error);
      res.restored.push_back(records[s].x_ac);
      continue;
    }
    res.ok[s] = true;
    res.gradient += o.contribution;
    sq += (o.x_r->flatten() - records[s].x_ac.flatten()).squaredNorm();
    res.restored.push_back(std::move(*o.x_r));
  }
  res.objective = 0.5 * sq;
  res.loss = sq / dim;
  const double limit = opts.max_failure_fraction * static_cast<double>(records.size());
  if (static_cast<double>(res.failures) > limit) {
    throw TrainingError(fmt::format("{} of {} records failed to restore (limit {:.0f}%); first: {}",
                                    res.failures, records.size(),
                                    100.0 * opts.max_failure_fraction,
                                    res.failure_log.front()));
  }
  return res;
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.eta > 0.0)) throw PreconditionError("learning rate must be positive");
  if (!(cfg.beta1 > 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 > 0.0 && cfg.beta2 < 1.0)) {
    throw PreconditionError("Adam decay factors must lie in (0, 1)");
  }
  if (!(cfg.epsilon > 0.0)) throw PreconditionError("Adam epsilon must be positive");
  if (cfg.max_iter < 0) throw PreconditionError("iteration count must be non-negative");
  if (!(cfg.w_floor > 0.0)) throw PreconditionError("weight floor must be positive");
}

Eigen::VectorXd adam_step(const Eigen::VectorXd& w, AdamState& state, const Eigen::VectorXd& g,
                          const TrainConfig& cfg) {
  if (state.m.size() == 0) state.m = Eigen::VectorXd::Zero(w.size());
  if (state.v.size() == 0) state.v = Eigen::VectorXd::Zero(w.size());
  if (g.size() != w.size() || state.m.size() != w.size() || state.v.size() != w.size()) {
    throw LayoutError("Adam state, gradient and weights must have equal length");
  }
  ++state.t;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * g;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
  const Eigen::VectorXd m_hat = state.m / (1.0 - std::pow(cfg.beta1, state.t));
  const Eigen::VectorXd v_hat = state.v / (1.0 - std::pow(cfg.beta2, state.t));
  Eigen::VectorXd next =
      w.array() - cfg.eta * m_hat.array() / (v_hat.array().sqrt() + cfg.epsilon);
  return next.cwiseMax(cfg.w_floor);
}

TrainResult train_weights(const Network& net, std::span<const ScenarioRecord> train_set,
                          const TrainConfig& cfg) {
  validate(cfg);
  if (train_set.empty()) throw PreconditionError("training set is empty");
  validate_dataset(net, train_set);
  if (cfg.w_init.size() != train_set.front().z.size()) {
    throw LayoutError(fmt::format("initial weights have {} entries, layout has {}",
                                  cfg.w_init.size(), train_set.front().z.size()));
  }

  TrainResult out{WeightVector(cfg.w_init.values(), cfg.w_floor), {}};
  Eigen::VectorXd w = cfg.w_init.values();
  AdamState adam;
  std::mt19937_64 rng(cfg.rng_seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<ScenarioRecord> batch;

  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    std::span<const ScenarioRecord> active = train_set;
    if (cfg.batch_size > 0 && cfg.batch_size < train_set.size()) {
      std::shuffle(order.begin(), order.end(), rng);
      batch.clear();
      for (std::size_t k = 0; k < cfg.batch_size; ++k) batch.push_back(train_set[order[k]]);
      active = batch;
    }
    const GradientResult grad =
        accumulate_gradient(net, active, WeightVector(w, cfg.w_floor), cfg.gradient);
    out.trace.entries.push_back(
        {iter, grad.loss, grad.gradient.lpNorm<Eigen::Infinity>(), grad.failures});
    w = adam_step(w, adam, grad.gradient, cfg);
    if (cfg.snapshot_every > 0 && iter % cfg.snapshot_every == 0) {
      out.trace.snapshots.emplace_back(iter, w);
    }
  }
  out.weights = WeightVector(std::move(w), cfg.w_floor);
  return out;
}

}  // namespace pfr
