// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "fd_oracles.hpp"
#include "fixtures.hpp"
#include "pfr/acpf.hpp"
#include "pfr/eval.hpp"
#include "pfr/io.hpp"
#include "pfr/lpac.hpp"
#include "pfr/scenarios.hpp"
#include "pfr/sensitivity.hpp"
#include "pfr/train.hpp"
#include "pfr/wls.hpp"

using namespace pfr;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

MatrixXd fd_jacobian(const Network& net, const StateVector& x, const Layout& kinds) {
  constexpr double step = 1e-6;
  const VectorXd x0 = x.flatten();
  MatrixXd H(static_cast<Eigen::Index>(kinds.size()), x0.size());
  for (Eigen::Index j = 0; j < x0.size(); ++j) {
    VectorXd xp = x0, xm = x0;
    xp[j] += step;
    xm[j] -= step;
    H.col(j) = (eval_h(net, StateVector::from_flat(xp, net.num_buses(), net.slack()), kinds) -
                eval_h(net, StateVector::from_flat(xm, net.num_buses(), net.slack()), kinds)) /
               (2 * step);
  }
  return H;
}

VectorXd random_weights(Eigen::Index m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(1.0, 1e4);
  VectorXd w(m);
  for (Eigen::Index i = 0; i < m; ++i) w[i] = u(rng);
  return w;
}

Outcome jacobian() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (const auto& name : test::fixture_names()) {
    const Network net = test::load_fixture(name);
    const Layout kinds = canonical_layout(net);
    for (int trial = 0; trial < 10; ++trial) {
      const StateVector x = test::random_state(net, rng);
      const MatrixXd F = fd_jacobian(net, x, kinds);
      const double err = (eval_H(net, x, kinds) - F).cwiseAbs().maxCoeff() / (1.0 + F.cwiseAbs().maxCoeff());
      worst = std::max(worst, err);
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-6 && secs < 30.0,
          fmt::format("max rel err {:.2e} (< 1e-6), {:.1f} s (< 30 s)", worst, secs)};
}

Outcome wls_consistency() {
  std::mt19937_64 rng(202);
  double worst_err = 0.0, worst_scale = 0.0;
  int worst_iter = 0;
  bool converged = true;
  for (const auto& name : test::fixture_names()) {
    const Network net = test::load_fixture(name);
    const StateVector truth = test::random_state(net, rng, 0.03, 0.1);
    const MeasurementSet z = test::exact_measurements(net, truth, canonical_layout(net));
    const WeightVector w(random_weights(z.values.size(), rng));
    WlsOptions opts;
    opts.record_iterates = true;
    const WlsResult base = wls_restore(net, z, w, StateVector::flat(net), opts);
    converged = converged && base.converged;
    worst_iter = std::max(worst_iter, base.iterations);
    worst_err = std::max(worst_err, (base.x.flatten() - truth.flatten()).lpNorm<Eigen::Infinity>());
    for (double c : {1e-3, 1.0, 1e3}) {
      const WlsResult s = wls_restore(net, z, w.scaled(c), StateVector::flat(net), opts);
      if (s.iterates.size() != base.iterates.size()) {
        worst_scale = kInf;
        continue;
      }
      for (std::size_t k = 0; k < s.iterates.size(); ++k) {
        worst_scale = std::max(worst_scale, (s.iterates[k] - base.iterates[k]).lpNorm<Eigen::Infinity>());
      }
    }
  }
  return {converged && worst_iter <= 10 && worst_err < 1e-8 && worst_scale <= 1e-12,
          fmt::format("iterations {} (<= 10), state err {:.2e} (< 1e-8), scale drift {:.2e} (<= 1e-12)",
                      worst_iter, worst_err, worst_scale)};
}

struct SensitivityCheck {
  double all = 0.0;
  double voltage = 0.0;
};

SensitivityCheck compare_sensitivity(const Network& net, const MeasurementSet& z, const VectorXd& w) {
  const StateVector x = test::restore_tight(net, z, w, StateVector::flat(net));
  const MatrixXd S = solution_sensitivity(net, z, WeightVector(w), x);
  const MatrixXd F = test::fd_sensitivity(net, z, w, x, 1e-4);
  const double floor = 1e-3 * F.cwiseAbs().maxCoeff();
  SensitivityCheck out;
  for (Eigen::Index j = 0; j < S.cols(); ++j) {
    const double err = test::column_rel_error(S.col(j), F.col(j), floor);
    out.all = std::max(out.all, err);
    if (is_voltage_quantity(z.kinds[static_cast<std::size_t>(j)].quantity)) out.voltage = std::max(out.voltage, err);
  }
  return out;
}

Outcome sensitivity() {
  const Network two = test::two_bus();
  const Layout kinds = {{Quantity::Vm, 0}, {Quantity::Vm, 1}, {Quantity::Pinj, 1}, {Quantity::Qinj, 1}};
  VectorXd zv(4), w2(4);
  zv << 1.0, 0.98, -0.4, -0.25;
  w2 << 1e4, 1e4, 1e3, 1e3;
  const SensitivityCheck a = compare_sensitivity(two, {kinds, zv}, w2);

  const Network net = test::load_fixture("case5.m");
  ScenarioSpec spec;
  spec.count = 1;
  spec.seed = 3;
  const Dataset ds = synth_dataset(net, gen_load_scenarios(net, spec), NoiseProfile{});
  const ScenarioRecord& rec = ds.records.front();
  const Network scn = net.with_loads(rec.loads);
  const SensitivityCheck b =
      compare_sensitivity(scn, rec.z, default_initial_weights(rec.z.kinds).values());

  const MeasurementSet exact = test::exact_measurements(scn, rec.x_ac, rec.z.kinds);
  const double zero =
      solution_sensitivity(scn, exact, default_initial_weights(rec.z.kinds), rec.x_ac).cwiseAbs().maxCoeff();

  const double all = std::max(a.all, b.all);
  const double volt = std::max(a.voltage, b.voltage);
  return {all < 1e-2 && volt < 1e-4 && zero == 0.0,
          fmt::format("column err 2-bus {:.2e} / 5-bus {:.2e} (< 1e-2), Vm/Va columns {:.2e} / {:.2e} "
                      "(< 1e-4), zero residual {:.1e}",
                      a.all, b.all, a.voltage, b.voltage, zero)};
}

Outcome gradient() {
  const Network net = test::load_fixture("case5.m");
  ScenarioSpec spec;
  spec.count = 5;
  spec.seed = 4;
  const Dataset ds = synth_dataset(net, gen_load_scenarios(net, spec), NoiseProfile{});
  const VectorXd w = default_initial_weights(ds.records.front().z.kinds).values();
  GradientOptions opts;
  opts.wls.tol = 1e-13;
  opts.wls.max_iter = 200;
  const VectorXd g = accumulate_gradient(net, ds.records, WeightVector(w), opts).gradient;
  const VectorXd fd = test::fd_gradient(net, ds.records, w, 1e-4);
  const double err = (g - fd).norm() / fd.norm();
  return {err < 1e-2, fmt::format("rel err {:.2e} (< 1e-2) over {} weights", err, w.size())};
}

Outcome adam() {
  TrainConfig cfg;
  VectorXd w(4), g(4);
  w << 1e4, 1e3, 20.0, 3.0;
  g << 3e-4, -2.0, 1e-7, 0.5;
  AdamState st;
  const VectorXd next = adam_step(w, st, g, cfg);
  double err = 0.0;
  bool floor_ok = true;
  for (Eigen::Index i = 0; i < 4; ++i) {
    const double want = w[i] - cfg.eta * g[i] / (std::sqrt(g[i] * g[i]) + cfg.epsilon);
    if (want > cfg.w_floor) {
      err = std::max(err, std::abs(next[i] - want) / std::abs(want));
    } else {
      floor_ok = floor_ok && next[i] == cfg.w_floor;
    }
  }
  floor_ok = floor_ok && next.minCoeff() >= cfg.w_floor;
  return {err <= 1e-12 && floor_ok,
          fmt::format("first-step err {:.2e} (<= 1e-12), clamped entry {:.1e} (floor {:.1e})", err,
                      next.minCoeff(), cfg.w_floor)};
}

struct Pipeline {
  Network net;
  std::vector<ScenarioRecord> train;
  std::vector<ScenarioRecord> test;
  EvalReport report;
  double seconds = 0.0;
};

Pipeline lpac_pipeline() {
  const auto t0 = Clock::now();
  Pipeline p{test::load_fixture("case5.m"), {}, {}, {}, 0.0};
  ScenarioSpec spec;
  spec.count = 500;
  spec.seed = 7;
  DatasetOptions opts;
  opts.threads = 0;
  opts.seed = 7;
  const Dataset ds = build_lpac_dataset(p.net, gen_load_scenarios(p.net, spec), opts);
  const Split split = split_indices(ds.records.size(), 0.8, 7);
  p.train = select(ds.records, split.train);
  p.test = select(ds.records, split.test);
  TrainConfig cfg;
  cfg.max_iter = 200;
  cfg.w_init = default_initial_weights(p.train.front().z.kinds);
  cfg.gradient.threads = 0;
  const TrainResult tr = train_weights(p.net, p.train, cfg);
  EvalOptions eo;
  eo.threads = 0;
  p.report = evaluate(p.net, p.test, cfg.w_init, &tr.weights, eo);
  p.seconds = seconds_since(t0);
  return p;
}

Outcome training(const Pipeline& p) {
  const double opt = p.report.find("wls_opt")->loss;
  const double init = p.report.find("wls_init")->loss;
  const double bench = p.report.find("benchmark")->loss;
  const double raw = p.report.find("raw")->loss;
  return {p.train.size() == 400 && p.test.size() == 100 && opt < init && opt < bench && opt < raw &&
              p.seconds < 600.0,
          fmt::format("{}/{} records, test loss opt {:.4f} < init {:.4f}, benchmark {:.4f}, raw {:.4f}; "
                      "{:.1f} s (< 600 s)",
                      p.train.size(), p.test.size(), opt, init, bench, raw, p.seconds)};
}

Outcome curve(const Pipeline& p) {
  TrainConfig cfg;
  cfg.max_iter = 200;
  cfg.w_init = default_initial_weights(p.train.front().z.kinds);
  cfg.gradient.threads = 0;
  EvalOptions eo;
  eo.threads = 0;
  const std::vector<std::size_t> counts = {50, 100, 200, 400};
  const auto pts = scenario_curve(p.net, p.train, p.test, counts, cfg, eo);
  bool ok = true;
  std::string text;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    text += fmt::format("{}{}:{:.4f}", k ? " " : "", pts[k].train_scenarios, pts[k].test_loss);
    if (k > 0 && pts[k].train_scenarios >= 200) ok = ok && pts[k].test_loss <= 1.1 * pts[k - 1].test_loss;
  }
  return {ok, fmt::format("held-out loss {} (10% band from 200 on)", text)};
}

Outcome restoration_speed() {
  const Network net = test::load_fixture("case118.m");
  ScenarioSpec spec;
  spec.count = 10;
  spec.seed = 8;
  const Dataset ds = synth_dataset(net, gen_load_scenarios(net, spec), NoiseProfile{});
  const WeightVector w = default_initial_weights(ds.records.front().z.kinds);
  double total = 0.0;
  std::size_t done = 0;
  for (const ScenarioRecord& rec : ds.records) {
    const auto t0 = Clock::now();
    const OperatingPoint op = restore_record(net, rec, Method::Wls, &w, {});
    total += seconds_since(t0);
    done += op.state.num_buses() == net.num_buses();
  }
  const double mean = total / static_cast<double>(ds.records.size());
  return {done == ds.records.size() && mean < 1.0,
          fmt::format("{} scenarios, mean {:.3f} s (< 1 s)", ds.records.size(), mean)};
}

Outcome benchmark(const Pipeline& p) {
  double worst = 0.0;
  for (const auto& name : test::fixture_names()) {
    const Network net = test::load_fixture(name);
    const NewtonResult pf = newton_pf(net, nominal_spec(net), StateVector::flat(net));
    const SolutionFile file =
        solution_from_json(net, solution_to_json(net, make_solution(net, make_operating_point(net, pf.state), "ac")));
    worst = std::max(worst, benchmark_restore(net, solution_measurements(net, file)).mismatch);
  }
  const double bench = p.report.find("benchmark")->loss;
  const double opt = p.report.find("wls_opt")->loss;
  return {worst < 1e-8 && bench > opt,
          fmt::format("max mismatch {:.2e} (< 1e-8), LPAC loss benchmark {:.4f} > opt {:.4f}", worst, bench, opt)};
}

Outcome lpac_validity() {
  constexpr int grid = 1000;
  double worst_cut = -kInf;
  double worst_floor = -kInf;
  for (const auto& name : test::fixture_names()) {
    const Network net = test::load_fixture(name);
    const LpacModel m = build_lpac(net);
    for (std::size_t e = 0; e < net.num_branches(); ++e) {
      const double lim = std::min(net.branch(e).theta_max, std::numbers::pi / 2);
      const auto pts = cosine_tangent_points(lim, LpacConfig{}.cos_tangents);
      for (int s = 0; s < grid; ++s) {
        const double th = -lim + 2.0 * lim * s / (grid - 1);
        for (double t : pts) worst_cut = std::max(worst_cut, std::cos(th) - (std::cos(t) - std::sin(t) * (th - t)));
        worst_floor = std::max(worst_floor, m.lp.lower(m.phi[e]) - std::cos(th));
      }
    }
  }
  double worst_cert = 0.0;
  int solved = 0;
  for (const char* name : {"case5.m", "case14.m"}) {
    const Network net = test::load_fixture(name);
    ScenarioSpec spec;
    spec.count = 3;
    spec.seed = 5;
    std::vector<LoadTable> loads = gen_load_scenarios(net, spec);
    loads.push_back(net.loads());
    for (const LoadTable& l : loads) {
      const LpacModel m = build_lpac(net.with_loads(l));
      const Certificate c = check_certificate(m.lp, simplex_solve(m.lp));
      worst_cert = std::max({worst_cert, c.primal_violation, c.dual_violation, c.complementarity, c.duality_gap});
      ++solved;
    }
  }
  return {worst_cut <= 1e-12 && worst_floor <= 0.0 && worst_cert <= 1e-9,
          fmt::format("cosine above tangent by {:.1e}, floor above cosine by {:.1e}, {} LP certificates "
                      "within {:.1e} (<= 1e-9)",
                      worst_cut, worst_floor, solved, worst_cert)};
}

}  // namespace

int main() {
  int failures = 0;
  const auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    failures += !o.pass;
    std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "jacobian", jacobian);
  report(2, "wls consistency", wls_consistency);
  report(3, "sensitivity", sensitivity);
  report(4, "gradient", gradient);
  report(5, "adam", adam);
  std::optional<Pipeline> pipe;
  std::string pipe_error;
  try {
    pipe = lpac_pipeline();
  } catch (const std::exception& e) {
    pipe_error = e.what();
  }
  const auto needs_pipe = [&](const std::function<Outcome(const Pipeline&)>& fn) {
    return [&, fn]() -> Outcome {
      if (!pipe) return {false, fmt::format("pipeline failed: {}", pipe_error)};
      return fn(*pipe);
    };
  };
  report(6, "training efficacy", needs_pipe(training));
  report(7, "scenario curve", needs_pipe(curve));
  report(8, "restoration speed", restoration_speed);
  report(9, "benchmark restoration", needs_pipe(benchmark));
  report(10, "lpac validity", lpac_validity);
  std::printf("%d of 10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
