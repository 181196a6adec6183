#include <doctest.h>

#include <cmath>

#include "fd_oracles.hpp"
#include "fixtures.hpp"
#include "pfr/errors.hpp"
#include "pfr/scenarios.hpp"
#include "pfr/train.hpp"

using namespace pfr;
using Eigen::VectorXd;

namespace {

std::vector<ScenarioRecord> synthetic(const Network& net, std::size_t count, std::uint64_t seed,
                                      unsigned threads = 1, double noise_scale = 1.0) {
  ScenarioSpec spec;
  spec.count = count;
  spec.seed = seed;
  DatasetOptions opts;
  opts.seed = seed;
  opts.threads = threads;
  const auto loads = gen_load_scenarios(net, spec);
  const NoiseProfile d{};
  const double k = noise_scale;
  const NoiseProfile noise{d.vm * k, d.va * k, d.p_inj * k, d.q_inj * k, d.p_flow * k, d.q_flow * k};
  return synth_dataset(net, loads, noise, opts).records;
}

GradientOptions tight_gradient() {
  GradientOptions opts;
  opts.wls.tol = 1e-13;
  opts.wls.max_iter = 200;
  return opts;
}

TrainConfig config_for(const std::vector<ScenarioRecord>& records, int iters) {
  TrainConfig cfg;
  cfg.max_iter = iters;
  cfg.w_init = default_initial_weights(records.front().z.kinds);
  return cfg;
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("loss is zero on exact states and scales with the state dimension") {
    const Network net = test::two_bus();
    const auto records = synthetic(net, 2, 1);
    std::vector<StateVector> exact = {records[0].x_ac, records[1].x_ac};
    CHECK(loss(records, exact) == 0.0);
    VectorXd x = records[0].x_ac.flatten();
    x[0] += 0.1;
    exact[0] = StateVector::from_flat(x, 2, net.slack());
    CHECK(loss(records, exact) == doctest::Approx(0.01 / 3.0).epsilon(1e-12));
  }

  TEST_CASE("initial weights separate voltages from power quantities") {
    const Network net = test::load_fixture("case5.m");
    const Layout layout = canonical_layout(net);
    const WeightVector w = default_initial_weights(layout);
    for (std::size_t k = 0; k < layout.size(); ++k) {
      CHECK(w[k] == (is_voltage_quantity(layout[k].quantity) ? 1e4 : 1e3));
    }
  }

  TEST_CASE("two-bus gradient agrees with finite differences") {
    const Network net = test::two_bus();
    const auto records = synthetic(net, 3, 8, 1, 0.25);
    const VectorXd w = default_initial_weights(records.front().z.kinds).values();
    const GradientResult g = accumulate_gradient(net, records, WeightVector(w), tight_gradient());
    const VectorXd fd = test::fd_gradient(net, records, w);
    CHECK((g.gradient - fd).norm() / fd.norm() < 1e-2);
    CHECK(g.objective == doctest::Approx(test::half_sq_loss(net, records, w)).epsilon(1e-9));
  }

  TEST_CASE("gradient error shrinks linearly with the residual") {
    // The analytic gradient holds the Jacobian fixed, so its error is
    // proportional to the measurement inconsistency.
    const Network net = test::two_bus();
    double errs[2];
    for (int k = 0; k < 2; ++k) {
      const auto records = synthetic(net, 3, 1, 1, k == 0 ? 1.0 : 0.5);
      const VectorXd w = default_initial_weights(records.front().z.kinds).values();
      const VectorXd g = accumulate_gradient(net, records, WeightVector(w), tight_gradient()).gradient;
      const VectorXd fd = test::fd_gradient(net, records, w);
      errs[k] = (g - fd).norm() / fd.norm();
    }
    CHECK(errs[1] / errs[0] == doctest::Approx(0.5).epsilon(0.1));
  }

  TEST_CASE("zero noise gives a zero gradient") {
    const Network net = test::load_fixture("case5.m");
    const auto records = synthetic(net, 3, 2, 1, 0.0);
    const GradientResult g =
        accumulate_gradient(net, records, default_initial_weights(records.front().z.kinds));
    CHECK(g.gradient.lpNorm<Eigen::Infinity>() < 1e-12);
  }

  TEST_CASE("gradient is additive over records") {
    const Network net = test::load_fixture("case5.m");
    const auto records = synthetic(net, 6, 3);
    const WeightVector w = default_initial_weights(records.front().z.kinds);
    const std::span<const ScenarioRecord> all(records);
    const VectorXd whole = accumulate_gradient(net, all, w).gradient;
    const VectorXd parts =
        accumulate_gradient(net, all.first(2), w).gradient + accumulate_gradient(net, all.subspan(2), w).gradient;
    CHECK((whole - parts).lpNorm<Eigen::Infinity>() <= 1e-12 * whole.lpNorm<Eigen::Infinity>());
  }

  TEST_CASE("first Adam step has the bias-corrected closed form") {
    TrainConfig cfg;
    VectorXd w(3), g(3);
    w << 1e4, 1e3, 5.0;
    g << 2.5e-3, -7.0, 1e-9;
    AdamState st;
    const VectorXd next = adam_step(w, st, g, cfg);
    CHECK(st.t == 1);
    for (Eigen::Index i = 0; i < 3; ++i) {
      const double want = w[i] - cfg.eta * g[i] / (std::sqrt(g[i] * g[i]) + cfg.epsilon);
      CHECK(std::abs(next[i] - want) <= 1e-12 * std::abs(want));
    }
  }

  TEST_CASE("Adam clamps weights at the floor") {
    TrainConfig cfg;
    cfg.eta = 100.0;
    VectorXd w = VectorXd::Constant(2, 1.0);
    AdamState st;
    for (int k = 0; k < 3; ++k) w = adam_step(w, st, VectorXd::Constant(2, 5.0), cfg);
    CHECK(w.minCoeff() == cfg.w_floor);
  }

  TEST_CASE("invalid hyper-parameters are rejected") {
    TrainConfig cfg;
    cfg.eta = 0.0;
    CHECK_THROWS_AS(validate(cfg), PreconditionError);
    cfg = {};
    cfg.beta2 = 1.0;
    CHECK_THROWS_AS(validate(cfg), PreconditionError);
    cfg = {};
    cfg.max_iter = -1;
    CHECK_THROWS_AS(validate(cfg), PreconditionError);
  }

  TEST_CASE("zero iterations return the initial weights") {
    const Network net = test::two_bus();
    const auto records = synthetic(net, 3, 2);
    const TrainConfig cfg = config_for(records, 0);
    const TrainResult r = train_weights(net, records, cfg);
    CHECK(r.weights.values() == cfg.w_init.values());
    CHECK(r.trace.entries.empty());
  }

  TEST_CASE("training is deterministic") {
    const Network net = test::load_fixture("case5.m");
    const auto records = synthetic(net, 8, 4);
    TrainConfig cfg = config_for(records, 5);
    const TrainResult a = train_weights(net, records, cfg);
    const TrainResult b = train_weights(net, records, cfg);
    REQUIRE(a.trace.entries.size() == 5);
    for (std::size_t k = 0; k < 5; ++k) CHECK(a.trace.entries[k].loss == b.trace.entries[k].loss);
    CHECK(a.weights.values() == b.weights.values());
    cfg.gradient.threads = 4;
    const TrainResult c = train_weights(net, records, cfg);
    for (std::size_t k = 0; k < 5; ++k) {
      CHECK(std::abs(c.trace.entries[k].loss - a.trace.entries[k].loss) <= 1e-12);
    }
  }

  TEST_CASE("mini-batches draw from the seeded generator") {
    const Network net = test::load_fixture("case5.m");
    const auto records = synthetic(net, 10, 6);
    TrainConfig cfg = config_for(records, 3);
    cfg.batch_size = 4;
    cfg.rng_seed = 17;
    const TrainResult a = train_weights(net, records, cfg);
    const TrainResult b = train_weights(net, records, cfg);
    CHECK(a.weights.values() == b.weights.values());
  }

  TEST_CASE("training lowers the held-out loss") {
    const Network net = test::load_fixture("case5.m");
    const auto records = synthetic(net, 150, 12, 0);
    const std::span<const ScenarioRecord> all(records);
    const auto train = all.first(100);
    const auto test_set = all.subspan(100);
    TrainConfig cfg = config_for(records, 40);
    cfg.gradient.threads = 0;
    const TrainResult r = train_weights(net, train, cfg);
    const auto before = restore_all(net, test_set, cfg.w_init, {}, 0);
    const auto after = restore_all(net, test_set, r.weights, {}, 0);
    CHECK(loss(test_set, after) < loss(test_set, before));
  }

  TEST_CASE("too many failures abort the gradient") {
    const Network net = test::load_fixture("case5.m");
    auto records = synthetic(net, 4, 5);
    for (auto& rec : records) rec.z.values *= 50.0;
    GradientOptions opts;
    opts.wls.max_iter = 3;
    opts.max_failure_fraction = 0.0;
    CHECK_THROWS_AS(accumulate_gradient(net, records, default_initial_weights(records.front().z.kinds), opts),
                    TrainingError);
  }
}
